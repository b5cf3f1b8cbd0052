//! Maximum-likelihood drift, volatility and variance from one bar.
//!
//! With the drift at its ML value `C/T` the Gaussian factor of the likelihood is
//! constant, so `ŝ` maximizes `𝓝(s) = ln ℛ(H̄/s, L̄/s | C̄/s) − 3 ln s`.

use rayon::prelude::*;

use crate::density::{r_series, SeriesControl};
use crate::diagram::EstimatorKind;
use crate::error::{Error, Result};
use crate::estimators::{moments_on_rule, EstimateResult, Moments};
use crate::kernels::KernelBank;
use crate::ohlc::{direction, to_spherical, NormalizedTriple, OhlcBar};

/// Log-spaced scan points over the initial bracket.
pub const SCAN_POINTS: usize = 41;
/// Bracket half-width factor: `[w/10, 10w]` around the range `w`.
pub const BRACKET_FACTOR: f64 = 10.0;
/// Absolute tolerance in `ln s`, i.e. relative tolerance in `s`.
pub const LOG_SCALE_TOL: f64 = 1e-9;
/// Distance, in units of the range, by which bars on the support boundary are moved inside.
pub const BOUNDARY_NUDGE: f64 = 1e-4;
const MAX_EXPANSIONS: usize = 3;
const MAX_ITER: usize = 200;

/// `μ̂ = C/T`.
pub fn ml_drift(bar: &OhlcBar) -> Result<f64> {
    bar.validate()?;
    Ok((bar.close - bar.open) / bar.horizon)
}

/// `𝓝(s)`; `−∞` where `ℛ` vanishes or underflows.
pub fn ml_objective(t: &NormalizedTriple, s: f64, ctl: &SeriesControl) -> Result<f64> {
    let r = r_series(t.h / s, t.l / s, t.c / s, ctl)?;
    Ok(if r.value > 0.0 { r.value.ln() - 3.0 * s.ln() } else { f64::NEG_INFINITY })
}

/// Fitted scale of a normalized triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlFit {
    pub scale: f64,
    pub objective: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// The triple was on the boundary of the support and moved inside.
    pub nudged: bool,
    /// The scan found a single local maximum.
    pub unimodal: bool,
}

/// Moves a triple on the support boundary (`l = 0`, `h = 0`, `c = h` or `c = l`) inside by
/// `BOUNDARY_NUDGE·(h − l)`. The likelihood vanishes identically there.
fn nudge(t: &NormalizedTriple) -> (NormalizedTriple, bool) {
    let e = BOUNDARY_NUDGE * (t.h - t.l);
    let h = t.h.max(e);
    let l = t.l.min(-e);
    let c = t.c.clamp(l + e, h - e);
    let moved = h != t.h || l != t.l || c != t.c;
    (NormalizedTriple::new_unchecked(h, l, c), moved)
}

/// Brent's parabolic/golden-section minimizer on `[a, b]` with absolute tolerance `tol`.
/// Returns `(x, f(x), iterations)`.
fn brent_min(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64, usize)> {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for iter in 1..=MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = tol + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx, iter));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.is_finite() && q.is_finite() && p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Err(Error::Optimizer(format!("Brent search did not converge in {MAX_ITER} iterations")))
}

/// ML scale `ŝ` of a normalized triple: log scan of the bracket, then Brent in `ln s`.
pub fn ml_scale(t: &NormalizedTriple, ctl: &SeriesControl) -> Result<MlFit> {
    let w0 = t.h - t.l;
    if !(w0 > 0.0) || !w0.is_finite() {
        return Err(Error::domain("maximum likelihood needs a nondegenerate range H > L"));
    }
    let (t, nudged) = nudge(t);
    if nudged {
        log::debug!("bar on the support boundary moved inside by {BOUNDARY_NUDGE} of its range");
    }
    // Fit on the unit-range triple so that power-of-two rescaling of a bar is exact.
    let t = NormalizedTriple::new_unchecked(t.h / w0, t.l / w0, t.c / w0);
    let obj = |x: f64| ml_objective(&t, x.exp(), ctl);
    let (mut lo, mut hi) = ((1.0 / BRACKET_FACTOR).ln(), BRACKET_FACTOR.ln());
    let mut evals = 0;
    for _ in 0..=MAX_EXPANSIONS {
        let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
        let xs: Vec<f64> = (0..SCAN_POINTS).map(|k| lo + step * k as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| obj(x)).collect::<Result<_>>()?;
        evals += SCAN_POINTS;
        let best = (0..SCAN_POINTS)
            .filter(|&k| fs[k].is_finite())
            .max_by(|&i, &j| fs[i].total_cmp(&fs[j]))
            .ok_or_else(|| Error::Optimizer("likelihood vanishes over the whole bracket".into()))?;
        if best == 0 {
            lo -= BRACKET_FACTOR.ln();
            continue;
        }
        if best == SCAN_POINTS - 1 {
            hi += BRACKET_FACTOR.ln();
            continue;
        }
        let peaks = (1..SCAN_POINTS - 1)
            .filter(|&k| fs[k].is_finite() && fs[k] > fs[k - 1] && fs[k] >= fs[k + 1])
            .count();
        let unimodal = peaks == 1;
        if !unimodal {
            log::debug!("likelihood scan of ({}, {}, {}) has {peaks} local maxima", t.h, t.l, t.c);
        }
        // Brent minimizes; −∞ is replaced by a large finite penalty so parabolic steps stay defined.
        let neg = |x: f64| obj(x).map(|v| if v.is_finite() { -v } else { 1e300 });
        let (x, fx, iters) = brent_min(neg, xs[best - 1], xs[best + 1], LOG_SCALE_TOL)?;
        return Ok(MlFit {
            scale: x.exp() * w0,
            objective: -fx - 3.0 * w0.ln(),
            iterations: evals + iters,
            bracket: (lo.exp() * w0, hi.exp() * w0),
            nudged,
            unimodal,
        });
    }
    Err(Error::Optimizer("likelihood maximum lies outside the expanded bracket".into()))
}

/// ML estimates from one bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlResult {
    pub mu_hat: f64,
    pub sigma_hat: f64,
    /// `σ̂²`.
    pub d_hat: f64,
    /// `𝓝` at the maximum, in the Wiener-scaled units of the bar.
    pub loglik: f64,
    pub iterations: usize,
    /// Volatility bracket searched, per unit time.
    pub bracket: (f64, f64),
    pub nudged: bool,
    pub unimodal: bool,
}

pub fn ml_volatility(bar: &OhlcBar, ctl: &SeriesControl) -> Result<MlResult> {
    bar.validate()?;
    ctl.validate()?;
    let fit = ml_scale(&bar.scaled_triple(), ctl)?;
    let s = fit.scale;
    Ok(MlResult {
        mu_hat: ml_drift(bar)?,
        sigma_hat: s,
        d_hat: s * s,
        loglik: fit.objective,
        iterations: fit.iterations,
        bracket: fit.bracket,
        nudged: fit.nudged,
        unimodal: fit.unimodal,
    })
}

/// `D̂_ML = σ̂²_ML`.
pub fn ml_variance(bar: &OhlcBar, ctl: &SeriesControl) -> Result<f64> {
    Ok(ml_volatility(bar, ctl)?.d_hat)
}

/// ML scale along each node direction of the bank's rule: the ML volatility diagram there.
pub fn ml_on_rule(bank: &KernelBank, ctl: &SeriesControl) -> Result<Vec<f64>> {
    let rule = bank.rule();
    (0..rule.len())
        .into_par_iter()
        .map(|i| {
            let (h, l, c) = direction(rule.theta[i], rule.phi[i]);
            ml_scale(&NormalizedTriple::new_unchecked(h, l, c), ctl).map(|f| f.scale)
        })
        .collect()
}

/// Moments of `ŝ_ML` and `d̂_ML` at one drift, used to normalize them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlNormalizer {
    pub gamma0: f64,
    pub volatility: Moments,
    pub variance: Moments,
}

impl MlNormalizer {
    /// Moments by angular quadrature of the ML diagram; `ŝ_ML` is homogeneous of degree one.
    pub fn from_quadrature(gamma0: f64, bank: &KernelBank, ctl: &SeriesControl) -> Result<Self> {
        let s = ml_on_rule(bank, ctl)?;
        let d: Vec<f64> = s.iter().map(|v| v * v).collect();
        Ok(MlNormalizer {
            gamma0,
            volatility: moments_on_rule(bank, EstimatorKind::Volatility, &s, gamma0)?,
            variance: moments_on_rule(bank, EstimatorKind::Variance, &d, gamma0)?,
        })
    }

    /// Moments supplied externally, e.g. from simulation.
    pub fn from_moments(gamma0: f64, volatility: Moments, variance: Moments) -> Result<Self> {
        if !(volatility.mean > 0.0 && variance.mean > 0.0) {
            return Err(Error::domain("normalizing means must be positive"));
        }
        Ok(MlNormalizer { gamma0, volatility, variance })
    }
}

/// `σ̂_ML / E[ŝ_ML | γ₀]`, unbiased at `γ₀`.
pub fn normalized_ml(bar: &OhlcBar, norm: &MlNormalizer, ctl: &SeriesControl) -> Result<EstimateResult> {
    let r = ml_volatility(bar, ctl)?;
    let radius = to_spherical(&bar.scaled_triple()).r;
    let point = r.sigma_hat / norm.volatility.mean;
    Ok(EstimateResult { kind: EstimatorKind::Volatility, point, diagram_value: point / radius, radius })
}

/// `D̂_ML / E[d̂_ML | γ₀]`.
pub fn normalized_ml_variance(bar: &OhlcBar, norm: &MlNormalizer, ctl: &SeriesControl) -> Result<EstimateResult> {
    let r = ml_volatility(bar, ctl)?;
    let radius = to_spherical(&bar.scaled_triple()).r;
    let point = r.d_hat / norm.variance.mean;
    Ok(EstimateResult { kind: EstimatorKind::Variance, point, diagram_value: point / (radius * radius), radius })
}
