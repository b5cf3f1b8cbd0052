//! OHLC bars, their normalized form, and geographic coordinates of the
//! (high, low, close) triple.
//!
//! Every homogeneous estimator in this crate is a function of the triple
//! `(H, L, C)` measured from the open. In geographic coordinates the triple is
//! `H = R cosΘ cosΦ`, `L = R cosΘ sinΦ`, `C = R sinΘ`, and the ordering
//! constraints `L ≤ C ≤ H`, `L ≤ 0 ≤ H` confine the angles to
//! `-π/2 ≤ Φ ≤ 0`, `s(Φ) ≤ Θ ≤ c(Φ)` with `s(φ) = atan(sin φ)` and
//! `c(φ) = atan(cos φ)`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Slack allowed when checking that angles lie in the admissible domain.
const ANGLE_SLACK: f64 = 1e-12;

/// One interval of log-prices plus its length in time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcBar {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub horizon: f64,
}

impl OhlcBar {
    /// Builds a bar, checking `low ≤ open, close ≤ high` and `horizon > 0`.
    pub fn new(open: f64, high: f64, low: f64, close: f64, horizon: f64) -> Result<Self> {
        let bar = OhlcBar { open, high, low, close, horizon };
        bar.validate()?;
        Ok(bar)
    }

    /// Checks the bar invariants, naming the first violated inequality.
    pub fn validate(&self) -> Result<()> {
        let vals = [self.open, self.high, self.low, self.close, self.horizon];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("bar contains a non-finite value"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::domain("horizon > 0 violated"));
        }
        if self.low > self.open {
            return Err(Error::domain("low <= open violated"));
        }
        if self.open > self.high {
            return Err(Error::domain("open <= high violated"));
        }
        if self.low > self.close {
            return Err(Error::domain("low <= close violated"));
        }
        if self.close > self.high {
            return Err(Error::domain("close <= high violated"));
        }
        Ok(())
    }

    /// `(H, L, C)` measured from the open, in log-price units.
    pub fn relative(&self) -> (f64, f64, f64) {
        (self.high - self.open, self.low - self.open, self.close - self.open)
    }

    /// Relative triple divided by `√T`: the normalized triple at unit volatility.
    pub fn scaled_triple(&self) -> NormalizedTriple {
        let s = self.horizon.sqrt();
        let (h, l, c) = self.relative();
        NormalizedTriple::new_unchecked(h / s, l / s, c / s)
    }

    /// The bar with `(H, L, C)` scaled by `lambda` about the open.
    pub fn scaled(&self, lambda: f64) -> OhlcBar {
        let (h, l, c) = self.relative();
        OhlcBar {
            open: self.open,
            high: self.open + lambda * h,
            low: self.open + lambda * l,
            close: self.open + lambda * c,
            horizon: self.horizon,
        }
    }
}

/// High, low and close of the unit-volatility auxiliary process.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizedTriple {
    pub h: f64,
    pub l: f64,
    pub c: f64,
}

impl NormalizedTriple {
    pub fn new(h: f64, l: f64, c: f64) -> Result<Self> {
        if !(h.is_finite() && l.is_finite() && c.is_finite()) {
            return Err(Error::domain("triple contains a non-finite value"));
        }
        if h < 0.0 || l > 0.0 || c < l || c > h {
            return Err(Error::domain(format!(
                "triple ({h}, {l}, {c}) violates l <= 0 <= h and l <= c <= h"
            )));
        }
        Ok(NormalizedTriple { h, l, c })
    }

    pub(crate) fn new_unchecked(h: f64, l: f64, c: f64) -> Self {
        NormalizedTriple { h, l, c }
    }

    pub fn radius(&self) -> f64 {
        (self.h * self.h + self.l * self.l + self.c * self.c).sqrt()
    }

    pub fn scale(&self, lambda: f64) -> Self {
        NormalizedTriple { h: lambda * self.h, l: lambda * self.l, c: lambda * self.c }
    }

    /// Mirror image under `X → -X` (swaps the roles of high and low).
    pub fn reflect(&self) -> Self {
        NormalizedTriple { h: -self.l, l: -self.h, c: -self.c }
    }
}

/// Geographic coordinates `(R, Θ, Φ)` of a triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalTriple {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    /// Set for the origin, where the angles are undefined and reported as zero.
    pub degenerate: bool,
}

impl SphericalTriple {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::domain(format!("radius {r} must be finite and >= 0")));
        }
        check_angles(theta, phi)?;
        Ok(SphericalTriple { r, theta, phi, degenerate: r == 0.0 })
    }
}

/// Normalized drift `γ = (μ/σ)√T`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Drift(f64);

impl Drift {
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::domain("drift must be finite"));
        }
        Ok(Drift(gamma))
    }

    pub fn from_dimensional(mu: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(horizon > 0.0) {
            return Err(Error::domain("sigma and horizon must be positive"));
        }
        Drift::new(mu / sigma * horizon.sqrt())
    }

    pub fn gamma(self) -> f64 {
        self.0
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("drift must be finite"))
    }
}

/// Divides the open-relative triple by `σ√T`.
pub fn normalize_bar(bar: &OhlcBar, sigma: f64) -> Result<NormalizedTriple> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma {sigma} must be positive")));
    }
    bar.validate()?;
    let scale = sigma * bar.horizon.sqrt();
    let (h, l, c) = bar.relative();
    Ok(NormalizedTriple::new_unchecked(h / scale, l / scale, c / scale))
}

pub fn to_spherical(t: &NormalizedTriple) -> SphericalTriple {
    let r = t.radius();
    if r == 0.0 {
        return SphericalTriple { r: 0.0, theta: 0.0, phi: 0.0, degenerate: true };
    }
    let rho = t.h.hypot(t.l);
    SphericalTriple {
        r,
        theta: t.c.atan2(rho),
        phi: t.l.atan2(t.h),
        degenerate: false,
    }
}

pub fn from_spherical(s: &SphericalTriple) -> Result<NormalizedTriple> {
    if s.r == 0.0 {
        return Ok(NormalizedTriple::default());
    }
    check_angles(s.theta, s.phi)?;
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Ok(NormalizedTriple::new_unchecked(s.r * ct * cp, s.r * ct * sp, s.r * st))
}

/// `(s(φ), c(φ)) = (atan(sin φ), atan(cos φ))`, the admissible Θ range at longitude φ.
pub fn angular_bounds(phi: f64) -> Result<(f64, f64)> {
    if !(-FRAC_PI_2 - ANGLE_SLACK..=ANGLE_SLACK).contains(&phi) {
        return Err(Error::domain(format!("phi {phi} outside [-pi/2, 0]")));
    }
    Ok(theta_range(phi))
}

#[inline]
pub(crate) fn theta_range(phi: f64) -> (f64, f64) {
    let (sp, cp) = phi.sin_cos();
    (sp.atan(), cp.atan())
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    let (lo, hi) = angular_bounds(phi)?;
    if theta < lo - ANGLE_SLACK || theta > hi + ANGLE_SLACK {
        return Err(Error::domain(format!(
            "theta {theta} outside [{lo}, {hi}] at phi {phi}"
        )));
    }
    Ok(())
}

/// Unit direction `(h̃, l̃, c̃)` of the ray with angles `(θ, φ)`.
#[inline]
pub(crate) fn direction(theta: f64, phi: f64) -> (f64, f64, f64) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (ct * cp, ct * sp, st)
}
