//! Radial moments `g_n(θ, φ; γ) = ∫₀^∞ ρ^{2+n} 𝒬̄(ρ·dir) dρ` of the joint
//! density along rays, the angular rule over the admissible domain, and the
//! efficiency functionals built from them.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::density::{close_pdf, r_series, SeriesControl, UNDERFLOW_RANGE};
use crate::error::{Error, Result};
use crate::ohlc::{check_gamma, direction, theta_range};
use crate::quad::{gauss_legendre, integrate_adaptive, integrate_half_line, pairwise_sum, AdaptiveOptions};

/// Orders of the radial moments used by the functionals.
pub const ORDERS: [u32; 3] = [1, 2, 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub radial_tol: f64,
    pub angular_tol: f64,
    /// Gauss–Legendre node counts in φ and, per φ, in θ.
    pub n_phi: usize,
    pub n_theta: usize,
    pub series: SeriesControl,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            radial_tol: 1e-9,
            angular_tol: 1e-7,
            n_phi: 64,
            n_theta: 64,
            series: SeriesControl::default(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("radial_tol", self.radial_tol), ("angular_tol", self.angular_tol)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.n_phi < 8 || self.n_theta < 8 {
            return Err(Error::domain("angular grid needs at least 8 nodes per axis"));
        }
        self.series.validate()
    }

    fn radial_options(&self) -> AdaptiveOptions {
        AdaptiveOptions { rel_tol: self.radial_tol, abs_tol: 0.0, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub n: u32,
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
    pub value: f64,
    pub est_error: f64,
}

fn order_index(n: u32) -> Result<usize> {
    ORDERS
        .iter()
        .position(|&k| k == n)
        .ok_or_else(|| Error::domain(format!("kernel order {n} not in {{1, 2, 4}}")))
}

/// True when the ray is on the boundary of (or outside) the admissible domain.
fn on_boundary(h: f64, l: f64, c: f64) -> bool {
    !(h > 0.0 && l < 0.0 && c > l && c < h)
}

/// `[g₁, g₂, g₄]` and their error estimates along the ray `(θ, φ)` by radial quadrature.
pub fn radial_moments(theta: f64, phi: f64, gamma: f64, cfg: &QuadratureConfig) -> Result<([f64; 3], [f64; 3])> {
    let (h, l, c) = direction(theta, phi);
    if on_boundary(h, l, c) {
        return Ok(([0.0; 3], [0.0; 3]));
    }
    let rho0 = UNDERFLOW_RANGE / (h - l);
    let mut failure = None;
    let res = integrate_half_line(
        |x| {
            let rho = rho0 + x;
            match r_series(rho * h, rho * l, rho * c, &cfg.series) {
                Ok(r) => {
                    let q = close_pdf(rho * c, gamma) * r.value;
                    let r3 = rho * rho * rho * q;
                    [r3, r3 * rho, r3 * rho * rho * rho]
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 3]
                }
            }
        },
        &cfg.radial_options(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((res.value, res.est_error))
}

pub fn g_n_radial(n: u32, theta: f64, phi: f64, gamma: f64, cfg: &QuadratureConfig) -> Result<KernelValue> {
    let k = order_index(n)?;
    check_gamma(gamma)?;
    let (v, e) = radial_moments(theta, phi, gamma, cfg)?;
    Ok(KernelValue { n, theta, phi, gamma, value: v[k], est_error: e[k] })
}

/// `F(n) = 2^{(1+n)/2}(2+n)Γ((3+n)/2)` for n = 1, 2, 4.
pub fn closed_form_constant(n: u32) -> Result<f64> {
    // Γ(2) = 1, Γ(5/2) = 3√π/4, Γ(7/2) = 15√π/8.
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let gamma_half = match n {
        1 => 1.0,
        2 => 0.75 * sqrt_pi,
        4 => 1.875 * sqrt_pi,
        _ => return Err(Error::domain(format!("kernel order {n} not in {{1, 2, 4}}"))),
    };
    let nf = n as f64;
    Ok(2f64.powf(0.5 * (1.0 + nf)) * (2.0 + nf) * gamma_half)
}

/// `J_n(β) = ∫₀^∞ t^{2+n}(t² − 1)e^{βt − t²/2} dt` for n = 1, 2, 4.
fn j_all(beta: f64) -> Result<[f64; 3]> {
    if beta == 0.0 {
        return Ok([
            closed_form_constant(1)?,
            closed_form_constant(2)?,
            closed_form_constant(4)?,
        ]);
    }
    let opts = AdaptiveOptions { rel_tol: 1e-13, abs_tol: 1e-14, max_intervals: 400 };
    let r = integrate_half_line(
        |t| {
            let base = t * t * t * (t * t - 1.0) * (beta * t - 0.5 * t * t).exp();
            [base, base * t, base * t * t * t]
        },
        &opts,
    )?;
    Ok(r.value)
}

/// `I_n(x, c; γ) = ∫₀^∞ ρ^{2+n}(a²ρ² − 1)exp(γcρ − a²ρ²/2)dρ` with `a = |2x − c|`,
/// which is `a^{−(3+n)} J_n(γc/a)`.
pub fn i_n(n: u32, x: f64, c: f64, gamma: f64) -> Result<f64> {
    let k = order_index(n)?;
    Ok(i_all(x, c, gamma)?[k])
}

fn i_all(x: f64, c: f64, gamma: f64) -> Result<[f64; 3]> {
    let a = (2.0 * x - c).abs();
    if a == 0.0 {
        return Err(Error::domain("I_n undefined for 2x = c"));
    }
    let j = j_all(gamma * c / a)?;
    let a3 = a * a * a;
    Ok([j[0] / (a3 * a), j[1] / (a3 * a * a), j[2] / (a3 * a3 * a)])
}

/// `[g₁, g₂, g₄]` along `(θ, φ)` from the image series of radial integrals.
///
/// Pair sums `P(m) = T(m) + T(−m)` decay only like `m^{−3−n}`; pairs up to
/// `m = 32` are summed and the remainder is the Euler–Maclaurin midpoint form
/// `∫_{32.5}^∞ P + P'(32.5)/24`.
pub fn series_moments(theta: f64, phi: f64, gamma: f64) -> Result<[f64; 3]> {
    const PAIRS: usize = 32;
    let (h, l, c) = direction(theta, phi);
    if on_boundary(h, l, c) {
        return Ok([0.0; 3]);
    }
    let w = h - l;
    let t = |m: f64| -> Result<[f64; 3]> {
        let a = i_all(m * w, c, gamma)?;
        let b = if m == 0.0 || m == 1.0 { [0.0; 3] } else { i_all(m * w + l, c, gamma)? };
        Ok(std::array::from_fn(|k| m * (m * a[k] + (1.0 - m) * b[k])))
    };
    let pair = |m: f64| -> Result<[f64; 3]> {
        let p = t(m)?;
        let q = t(-m)?;
        Ok(std::array::from_fn(|k| p[k] + q[k]))
    };
    let mut terms: Vec<[f64; 3]> = Vec::with_capacity(PAIRS + 2);
    for m in 1..=PAIRS {
        terms.push(pair(m as f64)?);
    }
    let x0 = PAIRS as f64 + 0.5;
    let mut failure = None;
    let opts = AdaptiveOptions { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 200 };
    let tail = integrate_adaptive(
        |s| {
            if s == 0.0 {
                return [0.0; 3];
            }
            match pair(x0 / s) {
                Ok(p) => std::array::from_fn(|k| p[k] * x0 / (s * s)),
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 3]
                }
            }
        },
        0.0,
        1.0,
        &opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let dx = 1e-3 * x0;
    let (pp, pm) = (pair(x0 + dx)?, pair(x0 - dx)?);
    terms.push(tail.value);
    terms.push(std::array::from_fn(|k| (pp[k] - pm[k]) / (2.0 * dx) / 24.0));
    let pref = 4.0 * close_pdf(0.0, gamma);
    Ok(std::array::from_fn(|k| pref * pairwise_sum(&terms.iter().map(|v| v[k]).collect::<Vec<_>>())))
}

pub fn g_n_series(n: u32, theta: f64, phi: f64, gamma: f64, cfg: &QuadratureConfig) -> Result<KernelValue> {
    let k = order_index(n)?;
    check_gamma(gamma)?;
    cfg.validate()?;
    let v = series_moments(theta, phi, gamma)?;
    Ok(KernelValue { n, theta, phi, gamma, value: v[k], est_error: cfg.radial_tol * v[k].abs() })
}

/// Tensor Gauss–Legendre rule on the admissible domain with the `cosθ` weight folded in.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub n_phi: usize,
    pub n_theta: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub weight: Vec<f64>,
}

impl AngularRule {
    pub fn new(n_phi: usize, n_theta: usize) -> Self {
        let (xp, wp) = gauss_legendre(n_phi);
        let (xt, wt) = gauss_legendre(n_theta);
        let size = n_phi * n_theta;
        let mut rule = AngularRule {
            n_phi,
            n_theta,
            theta: Vec::with_capacity(size),
            phi: Vec::with_capacity(size),
            weight: Vec::with_capacity(size),
        };
        for (x, w) in xp.iter().zip(&wp) {
            let phi = -FRAC_PI_4 + FRAC_PI_4 * x;
            let (lo, hi) = theta_range(phi);
            let half = 0.5 * (hi - lo);
            for (y, v) in xt.iter().zip(&wt) {
                let theta = 0.5 * (lo + hi) + half * y;
                rule.theta.push(theta);
                rule.phi.push(phi);
                rule.weight.push(FRAC_PI_4 * w * half * v * theta.cos());
            }
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// `Σ wᵢ vᵢ`, summed pairwise in node order.
    pub fn dot(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let prods: Vec<f64> = self.weight.iter().zip(values).map(|(w, v)| w * v).collect();
        pairwise_sum(&prods)
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = (0..self.len()).into_par_iter().map(|i| f(self.theta[i], self.phi[i])).collect();
        self.dot(&vals)
    }
}

/// `∫_{−π/2}^0 dφ ∫_{s(φ)}^{c(φ)} cosθ f(θ, φ) dθ` with grid doubling until
/// successive values agree to `angular_tol`. Returns `(value, est_error)`.
pub fn angular_integral(
    f: impl Fn(f64, f64) -> Result<f64> + Sync,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    let eval = |rule: &AngularRule| -> Result<f64> {
        let vals: Result<Vec<f64>> = (0..rule.len()).into_par_iter().map(|i| f(rule.theta[i], rule.phi[i])).collect();
        Ok(rule.dot(&vals?))
    };
    let (mut np, mut nt) = (cfg.n_phi, cfg.n_theta);
    let mut prev = eval(&AngularRule::new(np, nt))?;
    for _ in 0..4 {
        np *= 2;
        nt *= 2;
        let cur = eval(&AngularRule::new(np, nt))?;
        let err = (cur - prev).abs();
        if err <= cfg.angular_tol * cur.abs() || err == 0.0 {
            return Ok((cur, err));
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged { value: prev, est_error: f64::NAN })
}

/// Radial moments at every node of an angular rule for one drift.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub gamma: f64,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g4: Vec<f64>,
}

impl KernelField {
    pub fn compute(rule: &AngularRule, gamma: f64, cfg: &QuadratureConfig) -> Result<Self> {
        check_gamma(gamma)?;
        let vals: Result<Vec<[f64; 3]>> = (0..rule.len())
            .into_par_iter()
            .map(|i| radial_moments(rule.theta[i], rule.phi[i], gamma, cfg).map(|(v, _)| v))
            .collect();
        let vals = vals?;
        Ok(KernelField {
            gamma,
            g1: vals.iter().map(|v| v[0]).collect(),
            g2: vals.iter().map(|v| v[1]).collect(),
            g4: vals.iter().map(|v| v[2]).collect(),
        })
    }

    pub fn order(&self, n: u32) -> Result<&[f64]> {
        Ok(match order_index(n)? {
            0 => &self.g1,
            1 => &self.g2,
            _ => &self.g4,
        })
    }
}

/// Kernel fields on a shared angular rule, computed once per drift and shared.
#[derive(Debug)]
pub struct KernelBank {
    cfg: QuadratureConfig,
    rule: Arc<AngularRule>,
    fields: Mutex<HashMap<u64, Arc<KernelField>>>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl KernelBank {
    pub fn new(cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(KernelBank {
            rule: Arc::new(AngularRule::new(cfg.n_phi, cfg.n_theta)),
            cfg,
            fields: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    pub fn rule(&self) -> &AngularRule {
        &self.rule
    }

    pub fn field(&self, gamma: f64) -> Result<Arc<KernelField>> {
        check_gamma(gamma)?;
        // -0.0 and 0.0 share a field.
        let key = (gamma + 0.0).to_bits();
        if let Some(f) = self.fields.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(f.clone());
        }
        let field = if gamma < 0.0 {
            // The reflection maps node k of the tensor rule onto node len − 1 − k.
            let f = self.field(-gamma)?;
            let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
            Arc::new(KernelField { gamma, g1: rev(&f.g1), g2: rev(&f.g2), g4: rev(&f.g4) })
        } else {
            Arc::new(KernelField::compute(&self.rule, gamma, &self.cfg)?)
        };
        let mut map = self.fields.lock().expect("kernel cache poisoned");
        Ok(map.entry(key).or_insert(field).clone())
    }

    fn integrate_fields(&self, f: impl Fn(usize) -> f64) -> f64 {
        let vals: Vec<f64> = (0..self.rule.len()).map(f).collect();
        self.rule.dot(&vals)
    }

    /// `𝓔(γ) = ∫∫ cosθ g₂²/g₄`.
    pub fn cal_e(&self, gamma: f64) -> Result<f64> {
        let k = self.field(gamma)?;
        Ok(self.integrate_fields(|i| ratio(k.g2[i] * k.g2[i], k.g4[i])))
    }

    /// `𝓕(γ) = ∫∫ cosθ g₁²/g₂`.
    pub fn cal_f(&self, gamma: f64) -> Result<f64> {
        let k = self.field(gamma)?;
        Ok(self.integrate_fields(|i| ratio(k.g1[i] * k.g1[i], k.g2[i])))
    }

    /// `𝓔(γ, γ₀) = ∫∫ cosθ g₂(γ) g₂(γ₀)/g₄(γ₀)`.
    pub fn cal_e_cross(&self, gamma: f64, gamma0: f64) -> Result<f64> {
        let k = self.field(gamma)?;
        let k0 = self.field(gamma0)?;
        Ok(self.integrate_fields(|i| k.g2[i] * ratio(k0.g2[i], k0.g4[i])))
    }

    /// `𝓜(γ, γ₀) = ∫∫ cosθ g₄(γ) g₂²(γ₀)/g₄²(γ₀)`.
    pub fn cal_m_cross(&self, gamma: f64, gamma0: f64) -> Result<f64> {
        let k = self.field(gamma)?;
        let k0 = self.field(gamma0)?;
        Ok(self.integrate_fields(|i| {
            let r = ratio(k0.g2[i], k0.g4[i]);
            k.g4[i] * r * r
        }))
    }

    /// Variance of the most-efficient estimator built at `γ₀` when the drift is `γ`:
    /// `(𝓜(γ, γ₀) − 𝓔²(γ, γ₀))/𝓔²(γ₀)`.
    pub fn efficient_variance(&self, gamma: f64, gamma0: f64) -> Result<f64> {
        let e0 = self.cal_e(gamma0)?;
        let e = self.cal_e_cross(gamma, gamma0)?;
        let m = self.cal_m_cross(gamma, gamma0)?;
        Ok((m - e * e) / (e0 * e0))
    }

    /// `Σ wᵢ g_n,i(γ) vᵢ` for values `v` tabulated on this bank's rule.
    pub fn weighted(&self, n: u32, gamma: f64, values: &[f64]) -> Result<f64> {
        if values.len() != self.rule.len() {
            return Err(Error::domain("value count does not match the angular rule"));
        }
        let k = self.field(gamma)?;
        let g = k.order(n)?;
        Ok(self.integrate_fields(|i| g[i] * values[i]))
    }
}

pub fn cal_e(gamma0: f64, cfg: &QuadratureConfig) -> Result<f64> {
    KernelBank::new(*cfg)?.cal_e(gamma0)
}

pub fn cal_f(gamma0: f64, cfg: &QuadratureConfig) -> Result<f64> {
    KernelBank::new(*cfg)?.cal_f(gamma0)
}

pub fn cal_e_cross(gamma: f64, gamma0: f64, cfg: &QuadratureConfig) -> Result<f64> {
    KernelBank::new(*cfg)?.cal_e_cross(gamma, gamma0)
}

pub fn cal_m_cross(gamma: f64, gamma0: f64, cfg: &QuadratureConfig) -> Result<f64> {
    KernelBank::new(*cfg)?.cal_m_cross(gamma, gamma0)
}

/// Image of `(θ, φ)` under the reflection `(h, l, c) → (−l, −h, −c)`.
pub fn reflect_angles(theta: f64, phi: f64) -> (f64, f64) {
    (-theta, -FRAC_PI_2 - phi)
}
