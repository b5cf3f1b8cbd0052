//! Densities of the drifted Wiener process on the unit interval: the heat
//! kernel, absorbing-boundary solutions obtained by images, and the joint and
//! conditional pdfs of the normalized high, low and close.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ohlc::NormalizedTriple;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this range `h - l` the image series for the conditional high/low pdf
/// is pure cancellation noise; the true value is below 1e-20 there.
pub const UNDERFLOW_RANGE: f64 = 0.3;

/// Truncation control for the image series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub tail_tol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { max_terms: 64, tail_tol: 1e-12 }
    }
}

impl SeriesControl {
    pub fn new(max_terms: usize, tail_tol: f64) -> Result<Self> {
        let ctl = SeriesControl { max_terms, tail_tol };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(Error::domain("max_terms must be at least 1"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::domain("tail_tol must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Value of a truncated image series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEval {
    pub value: f64,
    /// Number of symmetric pairs summed.
    pub terms: usize,
    /// Set when the point lies in the near-degenerate corner and 0 was returned.
    pub underflow: bool,
}

/// `g(x, τ) = exp(-x²/2τ)/√(2πτ)`.
pub fn gaussian_kernel(x: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau {tau} must be positive")));
    }
    Ok((-0.5 * x * x / tau).exp() / (2.0 * PI * tau).sqrt())
}

#[inline]
fn ln_gauss(x: f64, tau: f64) -> f64 {
    -0.5 * x * x / tau - 0.5 * tau.ln() - LN_SQRT_2PI
}

/// Pdf of the normalized close, `N(γ, 1)`.
#[inline]
pub fn close_pdf(c: f64, gamma: f64) -> f64 {
    let d = c - gamma;
    INV_SQRT_2PI * (-0.5 * d * d).exp()
}

/// Pdf of the high given the close, `2(2h - c)exp(2h(c - h))` on `h ≥ max(0, c)`.
pub fn cond_high_pdf(h: f64, c: f64) -> f64 {
    if h < 0.0 || h < c {
        return 0.0;
    }
    2.0 * (2.0 * h - c) * (2.0 * h * (c - h)).exp()
}

/// `𝒟(h, c) = ((c - 2h)² - 1)exp(2h(c - h))`.
#[inline]
pub fn d_kernel(h: f64, c: f64) -> f64 {
    let a = c - 2.0 * h;
    (a * a - 1.0) * (2.0 * h * (c - h)).exp()
}

/// Sums `Σ_{m≥1} pair(m)` stopping after two consecutive pairs below
/// `tail_tol·|partial sum|`. Pairs from m = 2 on may trigger the stop.
pub(crate) fn sum_pairs(ctl: &SeriesControl, mut pair: impl FnMut(i64) -> f64) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut quiet = 0;
    let mut last = 0.0;
    for m in 1..=ctl.max_terms as i64 {
        let p = pair(m);
        sum += p;
        last = p.abs();
        if last <= ctl.tail_tol * sum.abs() {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 && m >= 2 {
            return Ok((sum, m as usize));
        }
    }
    Err(Error::SeriesNotConverged { terms: ctl.max_terms, last_term: last })
}

/// Image series for the conditional high/low pdf, no support checks.
#[inline]
pub(crate) fn r_series(h: f64, l: f64, c: f64, ctl: &SeriesControl) -> Result<SeriesEval> {
    let w = h - l;
    if w < UNDERFLOW_RANGE {
        return Ok(SeriesEval { value: 0.0, terms: 0, underflow: true });
    }
    let term = |m: f64| m * (m * d_kernel(m * w, c) + (1.0 - m) * d_kernel(m * w + l, c));
    let (s, terms) = sum_pairs(ctl, |m| {
        let m = m as f64;
        term(m) + term(-m)
    })?;
    Ok(SeriesEval { value: 4.0 * s, terms, underflow: false })
}

#[inline]
fn in_support(h: f64, l: f64, c: f64) -> bool {
    h > 0.0 && l < 0.0 && l < c && c < h
}

/// Joint pdf of high and low given the close, with diagnostics.
pub fn cond_high_low_eval(h: f64, l: f64, c: f64, ctl: &SeriesControl) -> Result<SeriesEval> {
    if !in_support(h, l, c) {
        return Ok(SeriesEval { value: 0.0, terms: 0, underflow: false });
    }
    r_series(h, l, c, ctl)
}

/// Joint pdf `ℛ(h, l | c)` of high and low given the close; 0 off the open support.
pub fn cond_high_low_pdf(h: f64, l: f64, c: f64, ctl: &SeriesControl) -> Result<f64> {
    Ok(cond_high_low_eval(h, l, c, ctl)?.value)
}

/// Joint pdf `𝒬̄(h, l, c; γ) = f(c; γ) ℛ(h, l | c)` of the normalized triple.
pub fn joint_pdf(t: &NormalizedTriple, gamma: f64, ctl: &SeriesControl) -> Result<f64> {
    if !in_support(t.h, t.l, t.c) {
        return Ok(0.0);
    }
    let r = r_series(t.h, t.l, t.c, ctl)?;
    Ok(close_pdf(t.c, gamma) * r.value)
}

/// Density of the close at time `τ` for paths that have not reached the level `h > 0`.
pub fn single_boundary_density(c: f64, h: f64, tau: f64, gamma: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::domain("boundary level h must be positive"));
    }
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    if c >= h {
        return Ok(0.0);
    }
    let x = c - gamma * tau;
    let direct = ln_gauss(x, tau).exp();
    let image = (2.0 * h * gamma + ln_gauss(x - 2.0 * h, tau)).exp();
    Ok(direct - image)
}

/// Density of the close at time `τ` for paths kept strictly between the moving
/// absorbing boundaries `l + vτ` and `h + uτ`.
///
/// Image `m` sits at `2m(h - l)` with weight `W_m exp(2γm(h - l))`, its mirror
/// at `2h - 2m(h - l)`, where
/// `ln W_m = 2(v - u)(h - l)m(m - 1) + m(4ul - 2uh - 2vl)`.
/// Each pair cancels exactly on the upper boundary; the `W_m` recursion makes
/// mirror `m` cancel image `m + 1` on the lower one.
#[allow(clippy::too_many_arguments)]
pub fn two_boundary_density(
    c: f64,
    h: f64,
    l: f64,
    tau: f64,
    gamma: f64,
    u: f64,
    v: f64,
    ctl: &SeriesControl,
) -> Result<f64> {
    ctl.validate()?;
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    if !(h > 0.0 && l < 0.0) {
        return Err(Error::domain("need l < 0 < h"));
    }
    let upper = h + u * tau;
    let lower = l + v * tau;
    if !(lower < upper) {
        return Err(Error::domain("boundaries have crossed before tau"));
    }
    if c < lower || c > upper {
        return Ok(0.0);
    }
    let w = h - l;
    let k = 4.0 * u * l - 2.0 * u * h - 2.0 * v * l;
    let x = c - gamma * tau;
    let term = |m: f64| {
        let ln_w = 2.0 * (v - u) * w * m * (m - 1.0) + m * k;
        let direct = ln_w + 2.0 * gamma * m * w + ln_gauss(x - 2.0 * m * w, tau);
        let mirror =
            ln_w - 2.0 * u * (h - 2.0 * m * w) + 2.0 * gamma * (h - m * w) + ln_gauss(x - 2.0 * h + 2.0 * m * w, tau);
        direct.exp() - mirror.exp()
    };
    let (s, _) = sum_pairs(ctl, |m| {
        let m = m as f64;
        term(m) + term(-m)
    })?;
    Ok(term(0.0) + s)
}

/// Static-boundary special case written in its own image indexing:
/// `Σ_m [e^{-2γwm} g(x + 2wm) - e^{2γ(wm + l)} g(x - 2l - 2wm)]`, `x = c - γτ`.
pub fn static_two_boundary_density(
    c: f64,
    h: f64,
    l: f64,
    tau: f64,
    gamma: f64,
    ctl: &SeriesControl,
) -> Result<f64> {
    ctl.validate()?;
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    if !(h > 0.0 && l < 0.0) {
        return Err(Error::domain("need l < 0 < h"));
    }
    if c < l || c > h {
        return Ok(0.0);
    }
    let w = h - l;
    let x = c - gamma * tau;
    let term = |m: f64| {
        let a = -2.0 * gamma * w * m + ln_gauss(x + 2.0 * w * m, tau);
        let b = 2.0 * gamma * (w * m + l) + ln_gauss(x - 2.0 * l - 2.0 * w * m, tau);
        a.exp() - b.exp()
    };
    let (s, _) = sum_pairs(ctl, |m| {
        let m = m as f64;
        term(m) + term(-m)
    })?;
    Ok(term(0.0) + s)
}

/// Joint pdf of open-relative `(η, λ, ξ)` = (high, low, close) in log-price
/// units for drift `μ`, volatility `σ` and horizon `T`.
#[allow(clippy::too_many_arguments)]
pub fn dimensional_joint_pdf(
    eta: f64,
    lambda: f64,
    xi: f64,
    mu: f64,
    sigma: f64,
    horizon: f64,
    ctl: &SeriesControl,
) -> Result<f64> {
    if !(sigma > 0.0) || !(horizon > 0.0) {
        return Err(Error::domain("sigma and horizon must be positive"));
    }
    let scale = sigma * horizon.sqrt();
    let gamma = mu / sigma * horizon.sqrt();
    let t = NormalizedTriple::new_unchecked(eta / scale, lambda / scale, xi / scale);
    Ok(joint_pdf(&t, gamma, ctl)? / (scale * scale * scale))
}
