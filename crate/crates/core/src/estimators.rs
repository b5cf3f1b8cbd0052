//! Classic range estimators, most-efficient diagrams and lower bounds, moments
//! of diagram estimators, and their probability densities.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::density::{close_pdf, r_series};
use crate::diagram::{
    ClassicDiagram, Diagram, DiagramTable, EstimatorKind, CLASSIC_TABLE_SIZE, DEFAULT_TABLE_SIZE, GK_K1, GK_K2,
    GK_K3,
};
use crate::error::{Error, Result};
use crate::kernels::{radial_moments, AngularRule, KernelBank};
use crate::ohlc::{direction, to_spherical, NormalizedTriple, OhlcBar};
use crate::quad::pairwise_sum;

/// Rogers–Satchell variance `(H(H − C) + L(L − C))/T`.
pub fn rs_variance(bar: &OhlcBar) -> f64 {
    let (h, l, c) = bar.relative();
    (h * (h - c) + l * (l - c)) / bar.horizon
}

/// Garman–Klass variance `(k₁(H − L)² − k₂(C(H + L) − 2HL) − k₃C²)/T`.
///
/// Returned as computed; a negative value is logged, never clamped.
pub fn gk_variance(bar: &OhlcBar) -> f64 {
    let (h, l, c) = bar.relative();
    let v = (GK_K1 * (h - l) * (h - l) - GK_K2 * (c * (h + l) - 2.0 * h * l) - GK_K3 * c * c) / bar.horizon;
    if v < 0.0 {
        log::warn!("Garman-Klass estimate {v} is negative");
    }
    v
}

/// Parkinson variance `(H − L)²/(4 ln 2 T)`.
pub fn parkinson_variance(bar: &OhlcBar) -> f64 {
    let (h, l, _) = bar.relative();
    (h - l) * (h - l) / (4.0 * LN_2 * bar.horizon)
}

pub fn rs_volatility(bar: &OhlcBar) -> f64 {
    rs_variance(bar).max(0.0).sqrt()
}

pub fn gk_volatility(bar: &OhlcBar) -> f64 {
    gk_variance(bar).max(0.0).sqrt()
}

pub fn parkinson_volatility(bar: &OhlcBar) -> f64 {
    parkinson_variance(bar).sqrt()
}

/// Closed-form classic diagram tabulated on the classic grid.
pub fn classic_diagram(kind: ClassicDiagram) -> DiagramTable {
    let label = match kind {
        ClassicDiagram::RogersSatchell => "rs",
        ClassicDiagram::GarmanKlass => "gk",
        ClassicDiagram::Parkinson => "parkinson",
    };
    let n = CLASSIC_TABLE_SIZE;
    DiagramTable::tabulate(EstimatorKind::Variance, None, label, n, n, |t, p| Ok(kind.value(t, p)))
        .expect("closed-form diagrams are finite")
}

fn efficient_table(
    kind: EstimatorKind,
    gamma0: f64,
    bank: &KernelBank,
    size: usize,
) -> Result<DiagramTable> {
    let cfg = *bank.config();
    let (norm, label) = match kind {
        EstimatorKind::Variance => (bank.cal_e(gamma0)?, format!("eff-var({gamma0})")),
        EstimatorKind::Volatility => (bank.cal_f(gamma0)?, format!("eff-vol({gamma0})")),
    };
    DiagramTable::tabulate(kind, Some(gamma0), label, size, size, |theta, phi| {
        let (g, _) = radial_moments(theta, phi, gamma0, &cfg)?;
        let (num, den) = match kind {
            EstimatorKind::Variance => (g[1], g[2]),
            EstimatorKind::Volatility => (g[0], g[1]),
        };
        if !(den > 0.0) {
            return Err(Error::domain(format!("kernel vanishes at interior node ({theta}, {phi})")));
        }
        Ok(num / den / norm)
    })
}

/// `φ(θ, φ; γ₀) = g₂/(𝓔(γ₀) g₄)`, unbiased at `γ₀` with the least variance there.
pub fn efficient_variance_diagram(gamma0: f64, bank: &KernelBank) -> Result<DiagramTable> {
    efficient_table(EstimatorKind::Variance, gamma0, bank, DEFAULT_TABLE_SIZE)
}

/// `ψ(θ, φ; γ₀) = g₁/(𝓕(γ₀) g₂)`.
pub fn efficient_volatility_diagram(gamma0: f64, bank: &KernelBank) -> Result<DiagramTable> {
    efficient_table(EstimatorKind::Volatility, gamma0, bank, DEFAULT_TABLE_SIZE)
}

/// Efficient diagram on a custom grid size.
pub fn efficient_diagram_sized(kind: EstimatorKind, gamma0: f64, bank: &KernelBank, size: usize) -> Result<DiagramTable> {
    efficient_table(kind, gamma0, bank, size)
}

/// Exact values of the efficient diagram at the nodes of the bank's rule.
pub fn efficient_on_rule(kind: EstimatorKind, gamma0: f64, bank: &KernelBank) -> Result<Vec<f64>> {
    let f = bank.field(gamma0)?;
    let (num, den, norm) = match kind {
        EstimatorKind::Variance => (&f.g2, &f.g4, bank.cal_e(gamma0)?),
        EstimatorKind::Volatility => (&f.g1, &f.g2, bank.cal_f(gamma0)?),
    };
    Ok(num.iter().zip(den).map(|(a, b)| if *b > 0.0 { a / (b * norm) } else { 0.0 }).collect())
}

/// `V(γ) = 1/𝓔(γ) − 1`.
pub fn lower_bound_variance(gamma: f64, bank: &KernelBank) -> Result<f64> {
    Ok(1.0 / bank.cal_e(gamma)? - 1.0)
}

/// `W(γ) = 1/𝓕(γ) − 1`.
pub fn lower_bound_volatility(gamma: f64, bank: &KernelBank) -> Result<f64> {
    Ok(1.0 / bank.cal_f(gamma)? - 1.0)
}

/// Diagram values at the nodes of the bank's angular rule.
pub fn on_rule(diagram: &dyn Diagram, rule: &AngularRule) -> Vec<f64> {
    (0..rule.len()).into_par_iter().map(|i| diagram.value(rule.theta[i], rule.phi[i])).collect()
}

/// `𝓚_n(γ)`: n-th moment of the canonical estimator with this diagram.
///
/// Variance diagrams weight `φⁿ` by `g_{2n}`, volatility diagrams `ψⁿ` by `g_n`.
pub fn k_moment(bank: &KernelBank, diagram: &dyn Diagram, n: u32, gamma: f64) -> Result<f64> {
    let vals = on_rule(diagram, bank.rule());
    k_moment_on_rule(bank, diagram.kind(), &vals, n, gamma)
}

/// [`k_moment`] for diagram values already sampled on the rule.
pub fn k_moment_on_rule(bank: &KernelBank, kind: EstimatorKind, vals: &[f64], n: u32, gamma: f64) -> Result<f64> {
    if !(n == 1 || n == 2) {
        return Err(Error::domain("moment order must be 1 or 2"));
    }
    let order = match kind {
        EstimatorKind::Variance => 2 * n,
        EstimatorKind::Volatility => n,
    };
    let pow: Vec<f64> = vals.iter().map(|v| v.powi(n as i32)).collect();
    bank.weighted(order, gamma, &pow)
}

/// Mean and spread of a canonical estimator at one drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
    /// `Var/E²`, the variance after rescaling to unit mean.
    pub normalized_variance: f64,
}

impl Moments {
    fn from_raw(mean: f64, second: f64) -> Self {
        let variance = second - mean * mean;
        Moments { mean, second, variance, normalized_variance: variance / (mean * mean) }
    }
}

pub fn moments(bank: &KernelBank, diagram: &dyn Diagram, gamma: f64) -> Result<Moments> {
    let vals = on_rule(diagram, bank.rule());
    moments_on_rule(bank, diagram.kind(), &vals, gamma)
}

pub fn moments_on_rule(bank: &KernelBank, kind: EstimatorKind, vals: &[f64], gamma: f64) -> Result<Moments> {
    let m1 = k_moment_on_rule(bank, kind, vals, 1, gamma)?;
    let m2 = k_moment_on_rule(bank, kind, vals, 2, gamma)?;
    Ok(Moments::from_raw(m1, m2))
}

/// Divides a diagram by `𝓚₁(γ)` so the estimator is unbiased at `γ`.
pub fn renormalize(diagram: &DiagramTable, gamma: f64, bank: &KernelBank) -> Result<DiagramTable> {
    let k1 = k_moment(bank, diagram, 1, gamma)?;
    if !(k1 > 0.0) {
        return Err(Error::domain(format!("first moment {k1} is not positive")));
    }
    diagram.scaled(1.0 / k1, format!("{}/K1({gamma})", diagram.label))
}

/// An estimate from one bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub kind: EstimatorKind,
    /// Variance (or volatility) in log-price units per unit time.
    pub point: f64,
    /// Diagram value at the bar's angles.
    pub diagram_value: f64,
    /// Radius of the open-relative triple divided by `σ₀ = √T`.
    pub radius: f64,
}

impl EstimateResult {
    /// Canonical factor `d̂ = D̂/σ²` or `ŝ = σ̂/σ` for a known volatility.
    pub fn canonical(&self, sigma: f64) -> f64 {
        self.point / sigma.powi(self.kind.degree())
    }
}

/// `R̄²φ(Θ, Φ)` or `R̄ψ(Θ, Φ)` for a normalized triple; 0 at the origin.
pub fn canonical_estimate(t: &NormalizedTriple, diagram: &dyn Diagram) -> f64 {
    let s = to_spherical(t);
    if s.degenerate {
        return 0.0;
    }
    s.r.powi(diagram.kind().degree()) * diagram.value(s.theta, s.phi)
}

/// Applies a diagram to a bar: `R²φ(Θ, Φ)/σ₀²` or `Rψ(Θ, Φ)/σ₀`.
///
/// `sigma0` is the scale of the driving process over the bar, `√T` for the Wiener model.
pub fn apply_diagram(bar: &OhlcBar, diagram: &dyn Diagram, sigma0: f64) -> Result<EstimateResult> {
    bar.validate()?;
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::domain(format!("scale sigma0 = {sigma0} must be positive")));
    }
    let (h, l, c) = bar.relative();
    let s = to_spherical(&NormalizedTriple::new_unchecked(h / sigma0, l / sigma0, c / sigma0));
    let kind = diagram.kind();
    if s.degenerate {
        return Ok(EstimateResult { kind, point: 0.0, diagram_value: 0.0, radius: 0.0 });
    }
    let dv = diagram.value(s.theta, s.phi);
    Ok(EstimateResult { kind, point: s.r.powi(kind.degree()) * dv, diagram_value: dv, radius: s.r })
}

/// [`apply_diagram`] with the Wiener scale `σ₀ = √T`.
pub fn apply_wiener(bar: &OhlcBar, diagram: &dyn Diagram) -> Result<EstimateResult> {
    apply_diagram(bar, diagram, bar.horizon.sqrt())
}

/// Density of a canonical diagram estimator at a fixed drift, by angular quadrature.
pub struct EstimatorPdf<'a> {
    bank: &'a KernelBank,
    kind: EstimatorKind,
    gamma: f64,
    vals: Vec<f64>,
    dirs: Vec<(f64, f64, f64)>,
}

impl<'a> EstimatorPdf<'a> {
    pub fn new(bank: &'a KernelBank, diagram: &dyn Diagram, gamma: f64) -> Result<Self> {
        let rule = bank.rule();
        let vals = on_rule(diagram, rule);
        if let Some(v) = vals.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::domain(format!("diagram must be positive, found {v}")));
        }
        let dirs = (0..rule.len()).map(|i| direction(rule.theta[i], rule.phi[i])).collect();
        Ok(EstimatorPdf { bank, kind: diagram.kind(), gamma, vals, dirs })
    }

    pub fn density(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(Error::domain("estimator value must be nonnegative"));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let rule = self.bank.rule();
        let ctl = self.bank.config().series;
        let terms: Result<Vec<f64>> = (0..rule.len())
            .map(|i| {
                let v = self.vals[i];
                let (rho, jac) = match self.kind {
                    EstimatorKind::Variance => ((u / v).sqrt(), 0.5 * u.sqrt() / (v * v.sqrt())),
                    EstimatorKind::Volatility => (u / v, u * u / (v * v * v)),
                };
                let (h, l, c) = self.dirs[i];
                let r = r_series(rho * h, rho * l, rho * c, &ctl)?;
                Ok(rule.weight[i] * jac * close_pdf(rho * c, self.gamma) * r.value)
            })
            .collect();
        Ok(pairwise_sum(&terms?))
    }

    /// Densities on a grid, evaluated in parallel.
    pub fn densities(&self, us: &[f64]) -> Result<Vec<f64>> {
        us.par_iter().map(|&u| self.density(u)).collect()
    }

    /// CDF at the points of a uniform grid on `[0, u_max]` with `2k` intervals,
    /// by composite Simpson on each interval pair and midpoints in between.
    pub fn cdf_grid(&self, u_max: f64, intervals: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = intervals.max(2);
        let h = u_max / n as f64;
        // Simpson per interval needs its midpoint.
        let pts: Vec<f64> = (0..=2 * n).map(|k| 0.5 * h * k as f64).collect();
        let f = self.densities(&pts)?;
        let mut us = Vec::with_capacity(n + 1);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        us.push(0.0);
        cdf.push(0.0);
        for k in 0..n {
            acc += h / 6.0 * (f[2 * k] + 4.0 * f[2 * k + 1] + f[2 * k + 2]);
            us.push(h * (k + 1) as f64);
            cdf.push(acc);
        }
        Ok((us, cdf))
    }
}

/// Density of the canonical variance estimator with diagram `φ` at `u`.
pub fn estimator_pdf_variance(u: f64, diagram: &dyn Diagram, gamma: f64, bank: &KernelBank) -> Result<f64> {
    if diagram.kind() != EstimatorKind::Variance {
        return Err(Error::domain("expected a variance diagram"));
    }
    EstimatorPdf::new(bank, diagram, gamma)?.density(u)
}

/// Density of the canonical volatility estimator with diagram `ψ` at `u`.
pub fn estimator_pdf_volatility(u: f64, diagram: &dyn Diagram, gamma: f64, bank: &KernelBank) -> Result<f64> {
    if diagram.kind() != EstimatorKind::Volatility {
        return Err(Error::domain("expected a volatility diagram"));
    }
    EstimatorPdf::new(bank, diagram, gamma)?.density(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::SqrtDiagram;
    use crate::kernels::QuadratureConfig;
    use crate::ohlc::from_spherical;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn bank() -> &'static KernelBank {
        static BANK: OnceLock<KernelBank> = OnceLock::new();
        BANK.get_or_init(|| KernelBank::new(QuadratureConfig { n_phi: 32, n_theta: 32, ..Default::default() }).unwrap())
    }

    fn random_bars(n: usize, seed: u64) -> Vec<OhlcBar> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let h: f64 = rng.random_range(0.01..3.0);
                let l: f64 = -rng.random_range(0.01..3.0);
                let c = l + (h - l) * rng.random_range(0.0..1.0);
                let o: f64 = rng.random_range(-5.0..5.0);
                OhlcBar::new(o, o + h, o + l, o + c, rng.random_range(0.1..4.0)).unwrap()
            })
            .collect()
    }

    #[test]
    fn classic_examples() {
        let b = OhlcBar::new(0.0, 2.0, -1.0, 1.0, 1.0).unwrap();
        assert_eq!(rs_variance(&b), 4.0);
        let z = OhlcBar::new(0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!((rs_variance(&z), gk_variance(&z), parkinson_variance(&z)), (0.0, 0.0, 0.0));
        let b = OhlcBar::new(0.0, 1.0, -1.0, 0.0, 1.0).unwrap();
        assert!((gk_variance(&b) - 2.006).abs() < 1e-12);
        // 4/(4 ln 2) = log₂e, frozen.
        #[allow(clippy::approx_constant)]
        let park = 1.442_695_040_888_963_4;
        assert!((parkinson_variance(&b) - park).abs() < 1e-12);
        assert_eq!(rs_volatility(&b), rs_variance(&b).sqrt());
    }

    #[test]
    fn diagram_route_matches_closed_forms() {
        let rs_table = classic_diagram(ClassicDiagram::RogersSatchell);
        let gk_table = classic_diagram(ClassicDiagram::GarmanKlass);
        for bar in random_bars(50, 7) {
            let a = apply_wiener(&bar, &rs_table).unwrap().point;
            let b = apply_wiener(&bar, &ClassicDiagram::RogersSatchell).unwrap().point;
            let scale = bar.scaled_triple().radius().powi(2);
            assert!((a - rs_variance(&bar)).abs() < 1e-8 * scale, "{a} vs {}", rs_variance(&bar));
            assert!((b - rs_variance(&bar)).abs() < 1e-12 * scale);
            let g = apply_wiener(&bar, &gk_table).unwrap().point;
            assert!((g - gk_variance(&bar)).abs() < 1e-8 * scale);
            let p = apply_wiener(&bar, &ClassicDiagram::Parkinson).unwrap().point;
            assert!((p - parkinson_variance(&bar)).abs() < 1e-12 * scale);
            let v = apply_wiener(&bar, &SqrtDiagram(ClassicDiagram::RogersSatchell)).unwrap().point;
            assert!((v - rs_volatility(&bar)).abs() < 1e-12 * (1.0 + v));
        }
        let b = OhlcBar::new(0.0, 1.0, -1.0, 0.0, 1.0).unwrap();
        let wide = apply_diagram(&b, &ClassicDiagram::RogersSatchell, 2.0).unwrap();
        assert!((wide.point - 0.5).abs() < 1e-12);
        assert!(apply_diagram(&b, &ClassicDiagram::RogersSatchell, 0.0).is_err());
        let z = OhlcBar::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(apply_wiener(&z, &rs_table).unwrap().point, 0.0);
    }

    #[test]
    fn classic_moments_at_zero_drift() {
        let rs = moments(bank(), &ClassicDiagram::RogersSatchell, 0.0).unwrap();
        assert!((rs.mean - 1.0).abs() < 1e-6, "{rs:?}");
        assert!((rs.variance - 0.331).abs() < 0.005, "{rs:?}");
        let gk = moments(bank(), &ClassicDiagram::GarmanKlass, 0.0).unwrap();
        assert!((gk.mean - 1.0).abs() < 0.005, "{gk:?}");
        assert!((gk.variance - 0.27).abs() < 0.01, "{gk:?}");
        for g in [0.5, 1.0, 2.0] {
            let m = k_moment(bank(), &ClassicDiagram::RogersSatchell, 1, g).unwrap();
            assert!((m - 1.0).abs() < 1e-5, "γ={g}: {m}");
        }
        let gk1 = k_moment(bank(), &ClassicDiagram::GarmanKlass, 1, 1.0).unwrap();
        assert!((gk1 - 1.0).abs() > 0.01, "{gk1}");
    }

    #[test]
    fn efficient_diagram_attains_bound() {
        let b = bank();
        for g0 in [0.0, 0.5] {
            let d = efficient_variance_diagram(g0, b).unwrap();
            let m = moments(b, &d, g0).unwrap();
            let v = lower_bound_variance(g0, b).unwrap();
            assert!((m.mean - 1.0).abs() < 1e-6, "{m:?}");
            assert!((m.variance - v).abs() < 1e-5, "{} vs {v}", m.variance);
        }
        let exact = efficient_on_rule(EstimatorKind::Volatility, 0.0, b).unwrap();
        let m = moments_on_rule(b, EstimatorKind::Volatility, &exact, 0.0).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-12);
        assert!((m.variance - lower_bound_volatility(0.0, b).unwrap()).abs() < 1e-12);
        let v0 = lower_bound_variance(0.0, b).unwrap();
        assert!((v0 - 0.2583).abs() < 0.003);
        let w0 = lower_bound_volatility(0.0, b).unwrap();
        assert!((w0 - 0.06201).abs() < 0.002);
        assert!(w0 < v0);
    }

    #[test]
    fn efficient_diagram_reflection_symmetry() {
        let a = efficient_diagram_sized(EstimatorKind::Variance, 0.7, bank(), 16).unwrap();
        let b = efficient_diagram_sized(EstimatorKind::Variance, -0.7, bank(), 16).unwrap();
        let (n, m) = a.shape();
        for i in 0..n {
            for j in 0..m {
                let x = a.values()[i * m + j];
                let y = b.values()[(n - 1 - i) * m + (m - 1 - j)];
                assert!((x - y).abs() < 1e-8 * x, "{x} vs {y}");
            }
        }
        assert!(a.min_value() > 0.0);
    }

    #[test]
    fn renormalize_is_idempotent() {
        let b = bank();
        let gk = classic_diagram(ClassicDiagram::GarmanKlass);
        let once = renormalize(&gk, 1.0, b).unwrap();
        let twice = renormalize(&once, 1.0, b).unwrap();
        assert!((k_moment(b, &once, 1, 1.0).unwrap() - 1.0).abs() < 1e-12);
        for (x, y) in once.values().iter().zip(twice.values()) {
            assert!((x - y).abs() < 1e-12 * x.abs());
        }
        let zero = gk.scaled(0.0, "zero").unwrap();
        assert!(renormalize(&zero, 0.0, b).is_err());
    }

    #[test]
    fn variance_pdf_mass_and_mean() {
        let pdf = EstimatorPdf::new(bank(), &ClassicDiagram::RogersSatchell, 0.0).unwrap();
        let (us, cdf) = pdf.cdf_grid(14.0, 700).unwrap();
        assert!((cdf.last().unwrap() - 1.0).abs() < 1e-3, "{}", cdf.last().unwrap());
        // Mean = ∫(1 − F) du.
        let h = us[1] - us[0];
        let mean: f64 = cdf.windows(2).map(|w| h * (1.0 - 0.5 * (w[0] + w[1]))).sum();
        assert!((mean - 1.0).abs() < 1e-3, "{mean}");
        assert!(estimator_pdf_variance(1.0, &SqrtDiagram(ClassicDiagram::RogersSatchell), 0.0, bank()).is_err());
    }

    #[test]
    fn volatility_moments_at_zero_drift() {
        let b = bank();
        let gk = moments(b, &SqrtDiagram(ClassicDiagram::GarmanKlass), 0.0).unwrap();
        let rs = moments(b, &SqrtDiagram(ClassicDiagram::RogersSatchell), 0.0).unwrap();
        assert!((1.0 - gk.mean - 0.0309).abs() < 0.002, "{gk:?}");
        assert!((1.0 - rs.mean - 0.0386).abs() < 0.002, "{rs:?}");
        assert!((gk.normalized_variance - 0.06379).abs() < 0.002, "{gk:?}");
        assert!((rs.normalized_variance - 0.08186).abs() < 0.002, "{rs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn homogeneity(h in 0.01..3.0f64, l in -3.0..-0.01f64, u in 0.0..1.0f64, lambda in 0.01..50.0f64) {
            let bar = OhlcBar::new(0.0, h, l, l + u * (h - l), 1.0).unwrap();
            let scaled = bar.scaled(lambda);
            let l2 = lambda * lambda;
            prop_assert!((rs_variance(&scaled) - l2 * rs_variance(&bar)).abs() <= 1e-12 * l2 * (1.0 + rs_variance(&bar)));
            prop_assert!((gk_variance(&scaled) - l2 * gk_variance(&bar)).abs() <= 1e-12 * l2 * (1.0 + gk_variance(&bar).abs()));
            let a = apply_wiener(&bar, &SqrtDiagram(ClassicDiagram::GarmanKlass)).unwrap().point;
            let b = apply_wiener(&scaled, &SqrtDiagram(ClassicDiagram::GarmanKlass)).unwrap().point;
            prop_assert!((b - lambda * a).abs() <= 1e-12 * lambda * (1.0 + a));
        }

        #[test]
        fn rs_nonnegative_on_support(r in 0.01..5.0f64, fp in 0.0..1.0f64, ft in 0.0..1.0f64) {
            let phi = -std::f64::consts::FRAC_PI_2 * fp;
            let (lo, hi) = crate::ohlc::angular_bounds(phi).unwrap();
            let s = crate::ohlc::SphericalTriple::new(r, lo + ft * (hi - lo), phi).unwrap();
            let t = from_spherical(&s).unwrap();
            let bar = OhlcBar { open: 0.0, high: t.h, low: t.l, close: t.c.clamp(t.l, t.h), horizon: 1.0 };
            prop_assert!(rs_variance(&bar) >= -1e-15);
        }
    }
}
