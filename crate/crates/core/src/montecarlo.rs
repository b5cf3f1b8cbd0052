//! Discrete drifted Wiener paths, their OHLC triples, and sample moments of
//! canonical estimators.
//!
//! Path `k` draws its innovations from ChaCha8 seeded with `seed` on stream `k`,
//! so a path depends only on `(seed, k)` and results do not depend on the
//! number of worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ohlc::{check_gamma, NormalizedTriple};
use crate::quad::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Gaussian,
    /// Student-t with `ν > 2` degrees of freedom, rescaled to unit variance.
    StudentT(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub steps: usize,
    pub paths: usize,
    pub gamma: f64,
    pub seed: u64,
    pub innovation: Innovation,
}

impl SimConfig {
    pub fn new(steps: usize, paths: usize, gamma: f64, seed: u64) -> Result<Self> {
        let cfg = SimConfig { steps, paths, gamma, seed, innovation: Innovation::Gaussian };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::domain("a path needs at least 2 steps"));
        }
        if self.paths < 1 {
            return Err(Error::domain("at least one path is required"));
        }
        check_gamma(self.gamma)?;
        if let Innovation::StudentT(nu) = self.innovation {
            if !(nu > 2.0) {
                return Err(Error::domain(format!("Student-t innovations need ν > 2 for a finite variance, got {nu}")));
            }
        }
        Ok(())
    }
}

/// Triple of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    pub triple: NormalizedTriple,
    pub path_id: u64,
}

fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Fills `walk[n] = ω(n + 1)`, the scaled sum of the first `n + 1` innovations.
fn fill_walk(walk: &mut [f64], innovation: Innovation, seed: u64, path_id: u64) {
    let mut rng = path_rng(seed, path_id);
    let scale = 1.0 / (walk.len() as f64).sqrt();
    let mut acc = 0.0;
    match innovation {
        Innovation::Gaussian => {
            for w in walk.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                acc += scale * e;
                *w = acc;
            }
        }
        Innovation::StudentT(nu) => {
            let t = StudentT::new(nu).expect("ν validated");
            let unit = ((nu - 2.0) / nu).sqrt();
            for w in walk.iter_mut() {
                acc += scale * unit * t.sample(&mut rng);
                *w = acc;
            }
        }
    }
}

/// Triple of `v(n) = γn/N + ω(n)` sampled every `stride` steps; `v(0) = 0` is included.
fn extremes(walk: &[f64], gamma: f64, stride: usize) -> NormalizedTriple {
    let n = walk.len();
    let drift = gamma / n as f64;
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    let mut k = stride;
    while k <= n {
        let v = drift * k as f64 + walk[k - 1];
        hi = hi.max(v);
        lo = lo.min(v);
        k += stride;
    }
    // Same expression as the loop so that the close never leaves [lo, hi].
    let close = drift * n as f64 + walk[n - 1];
    NormalizedTriple::new_unchecked(hi, lo, close)
}

/// Triple of a path built from explicit innovations `ε₁..ε_N`.
pub fn summarize_innovations(gamma: f64, innovations: &[f64]) -> Result<NormalizedTriple> {
    check_gamma(gamma)?;
    if innovations.len() < 2 {
        return Err(Error::domain("a path needs at least 2 steps"));
    }
    let scale = 1.0 / (innovations.len() as f64).sqrt();
    let mut acc = 0.0;
    let walk: Vec<f64> = innovations
        .iter()
        .map(|e| {
            acc += scale * e;
            acc
        })
        .collect();
    Ok(extremes(&walk, gamma, 1))
}

pub fn simulate_path(cfg: &SimConfig, path_id: u64) -> Result<PathSummary> {
    cfg.validate()?;
    let mut walk = vec![0.0; cfg.steps];
    fill_walk(&mut walk, cfg.innovation, cfg.seed, path_id);
    Ok(PathSummary { triple: extremes(&walk, cfg.gamma, 1), path_id })
}

/// Triples of paths `0..M`, in path order.
pub fn simulate_triples(cfg: &SimConfig) -> Result<Vec<NormalizedTriple>> {
    cfg.validate()?;
    Ok((0..cfg.paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; cfg.steps],
            |walk, id| {
                fill_walk(walk, cfg.innovation, cfg.seed, id);
                extremes(walk, cfg.gamma, 1)
            },
        )
        .collect())
}

/// Triples for several resolutions and drifts from one set of finest-level paths.
///
/// The `N`-step walk is the finest walk observed every `N_max/N` steps, so each
/// resolution is exactly distributed and all resolutions and drifts share innovations.
#[derive(Debug, Clone)]
pub struct NestedSample {
    pub steps: Vec<usize>,
    pub gammas: Vec<f64>,
    /// `triples[s][g][path]` for `steps[s]` and `gammas[g]`.
    pub triples: Vec<Vec<Vec<NormalizedTriple>>>,
}

impl NestedSample {
    pub fn get(&self, steps: usize, gamma: f64) -> Option<&[NormalizedTriple]> {
        let s = self.steps.iter().position(|&n| n == steps)?;
        let g = self.gammas.iter().position(|&x| x == gamma)?;
        Some(&self.triples[s][g])
    }
}

pub fn simulate_nested(
    steps: &[usize],
    gammas: &[f64],
    paths: usize,
    seed: u64,
    innovation: Innovation,
) -> Result<NestedSample> {
    let finest = *steps.iter().max().ok_or_else(|| Error::domain("no resolutions given"))?;
    for &n in steps {
        if n < 2 || finest % n != 0 {
            return Err(Error::domain(format!("resolution {n} must be at least 2 and divide {finest}")));
        }
    }
    for &g in gammas {
        SimConfig { steps: finest, paths, gamma: g, seed, innovation }.validate()?;
    }
    let per_path: Vec<Vec<NormalizedTriple>> = (0..paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; finest],
            |walk, id| {
                fill_walk(walk, innovation, seed, id);
                let mut out = Vec::with_capacity(steps.len() * gammas.len());
                for &n in steps {
                    for &g in gammas {
                        out.push(extremes(walk, g, finest / n));
                    }
                }
                out
            },
        )
        .collect();
    let ng = gammas.len();
    let triples = (0..steps.len())
        .map(|s| (0..ng).map(|g| per_path.iter().map(|p| p[s * ng + g]).collect()).collect())
        .collect();
    Ok(NestedSample { steps: steps.to_vec(), gammas: gammas.to_vec(), triples })
}

/// Sample mean and variance with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Standard error of the sample variance, from the fourth central moment.
    pub variance_std_error: f64,
}

impl McMoments {
    /// `Var/E²` of the estimator rescaled to unit mean.
    pub fn normalized_variance(&self) -> f64 {
        self.variance / (self.mean * self.mean)
    }
}

/// Moments of a sample, reduced pairwise in sample order.
pub fn sample_moments(values: &[f64]) -> Result<McMoments> {
    let m = values.len();
    if m < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("sample value {v} is not finite")));
    }
    let mf = m as f64;
    let mean = pairwise_sum(values) / mf;
    let d2: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let d4: Vec<f64> = d2.iter().map(|v| v * v).collect();
    let m2 = pairwise_sum(&d2) / mf;
    let m4 = pairwise_sum(&d4) / mf;
    let variance = m2 * mf / (mf - 1.0);
    Ok(McMoments {
        count: m,
        mean,
        variance,
        std_error: (variance / mf).sqrt(),
        variance_std_error: ((m4 - m2 * m2).max(0.0) / mf).sqrt(),
    })
}

/// Moments of a canonical estimator over `M` simulated paths.
pub fn mc_estimator_moments(cfg: &SimConfig, estimator: impl Fn(&NormalizedTriple) -> f64 + Sync) -> Result<McMoments> {
    let triples = simulate_triples(cfg)?;
    let values: Vec<f64> = triples.par_iter().map(&estimator).collect();
    sample_moments(&values)
}

/// One row of a discretization study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub steps: usize,
    pub estimator: String,
    pub gamma: f64,
    pub moments: McMoments,
}

pub type NamedEstimator<'a> = (&'a str, &'a (dyn Fn(&NormalizedTriple) -> f64 + Sync));

/// Moments of each estimator at each `(N, γ)`, from one nested simulation.
pub fn convergence_study(
    gammas: &[f64],
    steps: &[usize],
    paths: usize,
    seed: u64,
    estimators: &[NamedEstimator<'_>],
) -> Result<Vec<StudyRow>> {
    let sample = simulate_nested(steps, gammas, paths, seed, Innovation::Gaussian)?;
    let mut rows = Vec::new();
    for (si, &n) in sample.steps.iter().enumerate() {
        for (gi, &g) in sample.gammas.iter().enumerate() {
            let triples = &sample.triples[si][gi];
            for (name, f) in estimators {
                let values: Vec<f64> = triples.par_iter().map(*f).collect();
                rows.push(StudyRow { steps: n, estimator: name.to_string(), gamma: g, moments: sample_moments(&values)? });
            }
        }
    }
    Ok(rows)
}

/// CSV `N,estimator,gamma,mean,variance,std_error`.
pub fn write_study_csv(rows: &[StudyRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::domain(format!("writing study: {e}"));
    w.write_record(["N", "estimator", "gamma", "mean", "variance", "std_error"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.steps.to_string(),
            r.estimator.clone(),
            r.gamma.to_string(),
            format!("{:.16e}", r.moments.mean),
            format!("{:.16e}", r.moments.variance),
            format!("{:.16e}", r.moments.std_error),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::domain(format!("writing study: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{ClassicDiagram, Diagram};
    use crate::estimators::canonical_estimate;
    use proptest::prelude::*;

    #[test]
    fn flat_innovations_give_flat_path() {
        let t = summarize_innovations(0.0, &[0.0; 10]).unwrap();
        assert_eq!((t.h, t.l, t.c), (0.0, 0.0, 0.0));
        let t = summarize_innovations(1.0, &[0.0; 4]).unwrap();
        assert_eq!((t.h, t.l, t.c), (1.0, 0.0, 1.0));
        // Walk 0, 1, −1, 0 with unit scale √4 = 2 gives 0.5, −0.5.
        let t = summarize_innovations(0.0, &[1.0, -2.0, 1.0, 0.0]).unwrap();
        assert_eq!((t.h, t.l, t.c), (0.5, -0.5, 0.0));
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let cfg = SimConfig::new(64, 200, 0.3, 11).unwrap();
        let a = simulate_triples(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_triples(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(simulate_path(&cfg, 17).unwrap().triple, a[17]);
        let other = SimConfig { seed: 12, ..cfg };
        assert_ne!(simulate_triples(&other).unwrap()[0], a[0]);
    }

    #[test]
    fn close_moments() {
        for g in [0.0, 0.8] {
            let cfg = SimConfig::new(16, 40_000, g, 5).unwrap();
            let m = mc_estimator_moments(&cfg, |t| t.c).unwrap();
            assert!((m.mean - g).abs() < 3.0 * m.std_error, "{m:?}");
            assert!((m.variance - 1.0).abs() < 3.0 * m.variance_std_error, "{m:?}");
        }
    }

    #[test]
    fn nested_levels_are_subsamples() {
        let s = simulate_nested(&[4, 16, 64], &[0.0, -0.5], 50, 3, Innovation::Gaussian).unwrap();
        let direct = simulate_triples(&SimConfig::new(64, 50, -0.5, 3).unwrap()).unwrap();
        assert_eq!(s.get(64, -0.5).unwrap(), &direct[..]);
        for p in 0..50 {
            let (coarse, fine) = (s.get(4, 0.0).unwrap()[p], s.get(64, 0.0).unwrap()[p]);
            assert_eq!(coarse.c, fine.c);
            assert!(coarse.h <= fine.h && coarse.l >= fine.l);
        }
        assert!(simulate_nested(&[3, 64], &[0.0], 5, 1, Innovation::Gaussian).is_err());
    }

    #[test]
    fn student_t_has_unit_variance() {
        let cfg = SimConfig { innovation: Innovation::StudentT(5.0), ..SimConfig::new(32, 40_000, 0.0, 9).unwrap() };
        let m = mc_estimator_moments(&cfg, |t| t.c).unwrap();
        assert!((m.variance - 1.0).abs() < 3.0 * m.variance_std_error, "{m:?}");
        let bad = SimConfig { innovation: Innovation::StudentT(2.0), ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn study_rows_and_bias_direction() {
        let rs = |t: &NormalizedTriple| canonical_estimate(t, &ClassicDiagram::RogersSatchell);
        let gk = |t: &NormalizedTriple| canonical_estimate(t, &ClassicDiagram::GarmanKlass);
        let est: [NamedEstimator; 2] = [("rs", &rs), ("gk", &gk)];
        let rows = convergence_study(&[0.0], &[10, 1000], 4000, 21, &est).unwrap();
        assert_eq!(rows.len(), 4);
        // Discrete extremes shrink the range, so coarse paths underestimate.
        assert!(rows[0].moments.mean < rows[2].moments.mean);
        let again = convergence_study(&[0.0], &[10, 1000], 4000, 21, &est).unwrap();
        assert_eq!(rows, again);
        let mut buf = Vec::new();
        write_study_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N,estimator,gamma,mean,variance,std_error\n10,rs,0,"));
        assert_eq!(ClassicDiagram::RogersSatchell.kind(), crate::diagram::EstimatorKind::Variance);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn triples_on_support(seed in 0u64..1000, g in -3.0..3.0f64, n in 2usize..200) {
            let cfg = SimConfig::new(n, 4, g, seed).unwrap();
            for t in simulate_triples(&cfg).unwrap() {
                prop_assert!(t.l <= 0.0 && 0.0 <= t.h && t.l <= t.c && t.c <= t.h);
            }
        }
    }
}
