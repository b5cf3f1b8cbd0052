//! Diagrams: angular functions `φ(θ, φ)` (variance) or `ψ(θ, φ)` (volatility)
//! that define a homogeneous estimator, and their tabulated form.
//!
//! Tables are cell-centred on `(φ, t)` with `θ = s(φ) + t(c(φ) − s(φ))`, so the
//! curved domain becomes the rectangle `[−π/2, 0] × [0, 1]`, and are
//! interpolated by a tensor-product cubic spline with not-a-knot ends.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ohlc::theta_range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Variance,
    Volatility,
}

impl EstimatorKind {
    /// Degree of homogeneity in `(H, L, C)`.
    pub fn degree(self) -> i32 {
        match self {
            EstimatorKind::Variance => 2,
            EstimatorKind::Volatility => 1,
        }
    }
}

/// An angular function defining a homogeneous estimator.
pub trait Diagram: Sync {
    fn kind(&self) -> EstimatorKind;
    fn value(&self, theta: f64, phi: f64) -> f64;
}

/// Grid size for tabulated most-efficient diagrams.
pub const DEFAULT_TABLE_SIZE: usize = 128;
/// Classic diagrams are cheap to tabulate; the finer grid keeps the spline
/// error below 1e-8 up to the outermost cell centres.
pub const CLASSIC_TABLE_SIZE: usize = 256;

/// Second derivatives of the not-a-knot cubic spline through equally spaced `y`.
fn spline_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 4, "not-a-knot spline needs four points");
    let d = |i: usize| (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h);
    let mut m = vec![0.0; n];
    // Not-a-knot gives M₀ = 2M₁ − M₂, which collapses the first row to M₁ = d₁.
    m[1] = d(1);
    m[n - 2] = d(n - 2);
    let k = n - 4; // unknowns M₂ … M_{n−3}
    if k > 0 {
        let mut diag = vec![4.0; k];
        let mut rhs: Vec<f64> = (2..n - 2).map(|i| 6.0 * d(i)).collect();
        rhs[0] -= m[1];
        rhs[k - 1] -= m[n - 2];
        for i in 1..k {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        m[n - 3] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 2] = (rhs[i] - m[i + 3]) / diag[i];
        }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

/// Cell index and the four spline basis weights `(A, B, C, D)` at `x`.
#[inline]
fn basis(x: f64, x0: f64, h: f64, n: usize) -> (usize, [f64; 4]) {
    let pos = (x - x0) / h;
    let k = (pos.floor().max(0.0) as usize).min(n - 2);
    let b = pos - k as f64;
    let a = 1.0 - b;
    let h2 = h * h / 6.0;
    (k, [a, b, (a * a * a - a) * h2, (b * b * b - b) * h2])
}

/// Tabulated diagram over the admissible domain.
#[derive(Debug, Clone)]
pub struct DiagramTable {
    pub kind: EstimatorKind,
    /// Reference drift of a most-efficient diagram; `None` for classic ones.
    pub gamma0: Option<f64>,
    pub label: String,
    n_phi: usize,
    n_t: usize,
    values: Vec<f64>,
    // Second derivatives along t, along φ, and mixed; row-major [i_phi][j_t].
    m_t: Vec<f64>,
    m_p: Vec<f64>,
    m_pt: Vec<f64>,
}

impl DiagramTable {
    /// Tabulates `f` at the cell centres of an `n_phi × n_t` grid.
    pub fn tabulate(
        kind: EstimatorKind,
        gamma0: Option<f64>,
        label: impl Into<String>,
        n_phi: usize,
        n_t: usize,
        f: impl Fn(f64, f64) -> Result<f64> + Sync,
    ) -> Result<Self> {
        if n_phi < 4 || n_t < 4 {
            return Err(Error::domain("diagram grid needs at least 4 nodes per axis"));
        }
        let values: Result<Vec<f64>> = (0..n_phi * n_t)
            .into_par_iter()
            .map(|idx| {
                let (theta, phi) = node(n_phi, n_t, idx / n_t, idx % n_t);
                f(theta, phi)
            })
            .collect();
        DiagramTable::from_values(kind, gamma0, label, n_phi, n_t, values?)
    }

    pub fn from_values(
        kind: EstimatorKind,
        gamma0: Option<f64>,
        label: impl Into<String>,
        n_phi: usize,
        n_t: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != n_phi * n_t {
            return Err(Error::domain("value count does not match the grid"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("diagram value {v} is not finite")));
        }
        let hp = FRAC_PI_2 / n_phi as f64;
        let ht = 1.0 / n_t as f64;
        let along_t = |src: &[f64]| -> Vec<f64> {
            src.chunks(n_t).flat_map(|row| spline_second_derivatives(row, ht)).collect()
        };
        let along_phi = |src: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; src.len()];
            for j in 0..n_t {
                let col: Vec<f64> = (0..n_phi).map(|i| src[i * n_t + j]).collect();
                for (i, v) in spline_second_derivatives(&col, hp).into_iter().enumerate() {
                    out[i * n_t + j] = v;
                }
            }
            out
        };
        let m_t = along_t(&values);
        let m_p = along_phi(&values);
        let m_pt = along_phi(&m_t);
        Ok(DiagramTable { kind, gamma0, label: label.into(), n_phi, n_t, values, m_t, m_p, m_pt })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_phi, self.n_t)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(θ, φ)` of grid node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        node(self.n_phi, self.n_t, i, j)
    }

    /// Same table with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64, label: impl Into<String>) -> Result<Self> {
        DiagramTable::from_values(
            self.kind,
            self.gamma0,
            label,
            self.n_phi,
            self.n_t,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Table of the reflected diagram `(θ, φ) → D(−θ, −π/2 − φ)`, built for `−γ₀`.
    ///
    /// Cell centres map onto cell centres, so this is a reversal of the node order.
    pub fn reflected(&self, label: impl Into<String>) -> Result<Self> {
        DiagramTable::from_values(
            self.kind,
            self.gamma0.map(|g| -g),
            label,
            self.n_phi,
            self.n_t,
            self.values.iter().rev().copied().collect(),
        )
    }

    /// Pointwise `Σ wₖ Tₖ` over tables of the same kind and shape.
    pub fn combine(parts: &[(f64, &DiagramTable)], gamma0: Option<f64>, label: impl Into<String>) -> Result<Self> {
        let (_, first) = parts.first().ok_or_else(|| Error::domain("nothing to combine"))?;
        if parts.iter().any(|(_, t)| t.shape() != first.shape() || t.kind != first.kind) {
            return Err(Error::domain("tables differ in kind or shape"));
        }
        let values = (0..first.values.len())
            .map(|k| parts.iter().map(|(w, t)| w * t.values[k]).sum())
            .collect();
        DiagramTable::from_values(first.kind, gamma0, label, first.n_phi, first.n_t, values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Writes `phi,theta,value` rows, φ outer and θ inner, with 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "phi,theta,value")?;
        for i in 0..self.n_phi {
            for j in 0..self.n_t {
                let (theta, phi) = self.node(i, j);
                writeln!(out, "{:.16e},{:.16e},{:.16e}", phi, theta, self.values[i * self.n_t + j])?;
            }
        }
        Ok(())
    }
}

fn node(n_phi: usize, n_t: usize, i: usize, j: usize) -> (f64, f64) {
    let phi = -FRAC_PI_2 + (i as f64 + 0.5) * FRAC_PI_2 / n_phi as f64;
    let t = (j as f64 + 0.5) / n_t as f64;
    let (lo, hi) = theta_range(phi);
    (lo + t * (hi - lo), phi)
}

impl Diagram for DiagramTable {
    fn kind(&self) -> EstimatorKind {
        self.kind
    }

    fn value(&self, theta: f64, phi: f64) -> f64 {
        let (lo, hi) = theta_range(phi);
        let t = if hi > lo { (theta - lo) / (hi - lo) } else { 0.5 };
        let hp = FRAC_PI_2 / self.n_phi as f64;
        let ht = 1.0 / self.n_t as f64;
        let (ip, bp) = basis(phi, -FRAC_PI_2 + 0.5 * hp, hp, self.n_phi);
        let (jt, bt) = basis(t, 0.5 * ht, ht, self.n_t);
        let n_t = self.n_t;
        // Tensor form: Σ over {value, M} in φ × {value, M} in t.
        let mut acc = 0.0;
        for di in 0..2 {
            for dj in 0..2 {
                let k = (ip + di) * n_t + jt + dj;
                let (a, c) = (bp[di], bp[2 + di]);
                let (b, d) = (bt[dj], bt[2 + dj]);
                acc += a * (b * self.values[k] + d * self.m_t[k]) + c * (b * self.m_p[k] + d * self.m_pt[k]);
            }
        }
        acc
    }
}

/// Diagrams of the classic quadratic estimators in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicDiagram {
    RogersSatchell,
    GarmanKlass,
    Parkinson,
}

pub const GK_K1: f64 = 0.511;
pub const GK_K2: f64 = 0.019;
pub const GK_K3: f64 = 0.383;

impl Diagram for ClassicDiagram {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Variance
    }

    fn value(&self, theta: f64, phi: f64) -> f64 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let sin2t = 2.0 * st * ct;
        match self {
            ClassicDiagram::RogersSatchell => ct * ct - 0.5 * sin2t * (cp + sp),
            ClassicDiagram::GarmanKlass => {
                let d = cp - sp;
                GK_K1 * ct * ct * d * d + GK_K2 * (ct * ct * 2.0 * sp * cp - 0.5 * sin2t * (cp + sp))
                    - GK_K3 * st * st
            }
            ClassicDiagram::Parkinson => {
                let d = cp - sp;
                ct * ct * d * d / (4.0 * std::f64::consts::LN_2)
            }
        }
    }
}

/// Square root of a variance diagram, the matching volatility estimator.
#[derive(Debug, Clone, Copy)]
pub struct SqrtDiagram<D>(pub D);

impl<D: Diagram> Diagram for SqrtDiagram<D> {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Volatility
    }

    fn value(&self, theta: f64, phi: f64) -> f64 {
        self.0.value(theta, phi).max(0.0).sqrt()
    }
}

impl<D: Diagram + ?Sized> Diagram for &D {
    fn kind(&self) -> EstimatorKind {
        (**self).kind()
    }

    fn value(&self, theta: f64, phi: f64) -> f64 {
        (**self).value(theta, phi)
    }
}
