//! Subcommand arguments and their implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use homvol::diagram::{EstimatorKind, SqrtDiagram};
use homvol::estimators::{
    apply_wiener, efficient_volatility_diagram, efficient_variance_diagram, gk_variance, lower_bound_variance,
    lower_bound_volatility, moments_on_rule, parkinson_variance, rs_variance, EstimatorPdf,
};
use homvol::mle::{ml_scale, ml_on_rule, ml_volatility, normalized_ml, MlNormalizer};
use homvol::montecarlo::{convergence_study, write_study_csv, Innovation, NamedEstimator};
use homvol::quasi::{quasi_moments, QuasiSpec};
use homvol::{ClassicDiagram, NormalizedTriple, SeriesControl};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{create, csv_writer, finish, num, read_bars};
use crate::options::{parse_count, Choice, EstimatorFlags, GammaGrid, QuadOpts};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// CSV with header open,high,low,close[,horizon].
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub est: EstimatorFlags,
    /// Drift at which the ML estimates are normalized.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma0: f64,
    #[command(flatten)]
    pub quad: QuadOpts,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn estimate(a: &EstimateArgs) -> CliResult<Vec<PathBuf>> {
    let bars = read_bars(&a.input)?;
    let mut est = a.est.clone();
    if est.is_empty() {
        est.rs = true;
    }
    let ctl = SeriesControl::default();
    let need_bank = !est.eff.is_empty() || est.mle;
    let bank = if need_bank { Some(a.quad.bank()?) } else { None };
    let eff: Vec<_> = est
        .eff
        .iter()
        .map(|&g| {
            let b = bank.as_ref().expect("bank built for --eff");
            Ok((g, efficient_variance_diagram(g, b)?, efficient_volatility_diagram(g, b)?))
        })
        .collect::<CliResult<_>>()?;
    let norm = match (&bank, est.mle) {
        (Some(b), true) => Some(MlNormalizer::from_quadrature(a.gamma0, b, &ctl)?),
        _ => None,
    };

    let mut header = vec!["row".to_string()];
    for c in est.choices() {
        if let Choice::Classic(_) = c {
            header.push(format!("{}_variance", c.name()));
            header.push(format!("{}_volatility", c.name()));
            if c == Choice::Classic(ClassicDiagram::GarmanKlass) {
                header.push("gk_negative".into());
            }
        }
    }
    for (g, _, _) in &eff {
        header.push(format!("eff{g}_variance"));
        header.push(format!("eff{g}_volatility"));
    }
    if est.mle {
        header.extend(["mle_mu", "mle_volatility", "mle_variance", "mle_norm_volatility", "mle_norm_variance"].map(String::from));
    }

    let mut w = csv_writer(&a.out)?;
    w.write_record(&header)?;
    for (k, bar) in bars.iter().enumerate() {
        let mut rec = vec![(k + 1).to_string()];
        for c in est.choices() {
            if let Choice::Classic(d) = c {
                let v = match d {
                    ClassicDiagram::RogersSatchell => rs_variance(bar),
                    ClassicDiagram::GarmanKlass => gk_variance(bar),
                    ClassicDiagram::Parkinson => parkinson_variance(bar),
                };
                rec.push(num(v));
                rec.push(num(v.max(0.0).sqrt()));
                if d == ClassicDiagram::GarmanKlass {
                    rec.push(u8::from(v < 0.0).to_string());
                }
            }
        }
        for (_, var, vol) in &eff {
            rec.push(num(apply_wiener(bar, var)?.point));
            rec.push(num(apply_wiener(bar, vol)?.point));
        }
        if let Some(n) = &norm {
            match ml_volatility(bar, &ctl) {
                Ok(r) => {
                    let nv = normalized_ml(bar, n, &ctl)?.point;
                    rec.extend([num(r.mu_hat), num(r.sigma_hat), num(r.d_hat), num(nv), num(r.d_hat / n.variance.mean)]);
                }
                // A flat bar has no likelihood maximum; the fields stay empty.
                Err(homvol::Error::Domain(_)) => rec.extend([num((bar.close - bar.open) / bar.horizon), String::new(), String::new(), String::new(), String::new()]),
                Err(e) => return Err(CliError::from(e).context(format!("row {}", k + 1))),
            }
        }
        w.write_record(&rec)?;
    }
    finish(w)?;
    Ok(vec![a.out.clone()])
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Curve {
    /// Lower bound V(γ) of canonical variance estimators.
    #[value(name = "bound_V")]
    BoundV,
    /// Lower bound W(γ) of canonical volatility estimators.
    #[value(name = "bound_W")]
    BoundW,
    Mean,
    Variance,
    /// Variance of the estimator rescaled to unit mean at each γ.
    #[value(name = "renorm_variance")]
    RenormVariance,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CurvesArgs {
    #[arg(value_enum)]
    pub curve: Curve,
    #[command(flatten)]
    pub est: EstimatorFlags,
    /// Volatility estimators instead of variance estimators.
    #[arg(long)]
    pub volatility: bool,
    #[command(flatten)]
    pub grid: GammaGrid,
    #[command(flatten)]
    pub quad: QuadOpts,
    #[arg(long)]
    pub out: PathBuf,
}

fn kind_of(volatility: bool) -> EstimatorKind {
    if volatility {
        EstimatorKind::Volatility
    } else {
        EstimatorKind::Variance
    }
}

pub fn curves(a: &CurvesArgs) -> CliResult<Vec<PathBuf>> {
    let gammas = a.grid.values()?;
    let bank = a.quad.bank()?;
    let at = |g: f64| move |e: CliError| e.context(format!("gamma = {g}"));
    let mut w = csv_writer(&a.out)?;
    match a.curve {
        Curve::BoundV | Curve::BoundW => {
            let v = a.curve == Curve::BoundV;
            w.write_record(["gamma", if v { "V" } else { "W" }])?;
            for &g in &gammas {
                let b = if v { lower_bound_variance(g, &bank) } else { lower_bound_volatility(g, &bank) };
                let b = b.map_err(CliError::from).map_err(at(g))?;
                w.write_record([num(g), num(b)])?;
            }
        }
        curve => {
            if a.est.is_empty() {
                return Err(CliError::Input("select at least one estimator".into()));
            }
            let kind = kind_of(a.volatility);
            let mut names = Vec::new();
            let mut nodes = Vec::new();
            for c in a.est.choices() {
                names.push(c.name());
                nodes.push(c.on_rule(kind, &bank)?);
            }
            if a.est.mle {
                let s = ml_on_rule(&bank, &SeriesControl::default())?;
                names.push("mle".into());
                nodes.push(if a.volatility { s } else { s.iter().map(|v| v * v).collect() });
            }
            let mut header = vec!["gamma".to_string()];
            header.extend(names);
            w.write_record(&header)?;
            for &g in &gammas {
                let mut rec = vec![num(g)];
                for vals in &nodes {
                    let m = moments_on_rule(&bank, kind, vals, g).map_err(CliError::from).map_err(at(g))?;
                    rec.push(num(match curve {
                        Curve::Mean => m.mean,
                        Curve::Variance => m.variance,
                        _ => m.normalized_variance,
                    }));
                }
                w.write_record(&rec)?;
            }
        }
    }
    finish(w)?;
    Ok(vec![a.out.clone()])
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DiagramArgs {
    #[command(flatten)]
    pub est: EstimatorFlags,
    /// The volatility diagram ψ instead of the variance diagram φ.
    #[arg(long)]
    pub volatility: bool,
    /// Grid nodes per axis; 256 for classic diagrams and 128 for efficient ones by default.
    #[arg(long)]
    pub size: Option<usize>,
    #[command(flatten)]
    pub quad: QuadOpts,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn diagram(a: &DiagramArgs) -> CliResult<Vec<PathBuf>> {
    let choice = a.est.single()?;
    let bank = a.quad.bank()?;
    let table = choice.table(kind_of(a.volatility), &bank, a.size)?;
    let mut f = create(&a.out)?;
    table.write_csv(&mut f)?;
    f.flush()?;
    Ok(vec![a.out.clone()])
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PdfArgs {
    /// Density of the variance or of the volatility estimator.
    #[arg(long, value_enum, default_value = "variance")]
    pub kind: PdfKind,
    #[command(flatten)]
    pub est: EstimatorFlags,
    #[arg(long = "gamma", default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Upper end of the grid; 6 for variance and 3 for volatility by default.
    #[arg(long = "u-max")]
    pub u_max: Option<f64>,
    #[arg(long = "u-step", default_value_t = 0.01)]
    pub u_step: f64,
    #[command(flatten)]
    pub quad: QuadOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PdfKind {
    Variance,
    Volatility,
}

pub fn pdf(a: &PdfArgs) -> CliResult<Vec<PathBuf>> {
    let choice = a.est.single()?;
    let bank = a.quad.bank()?;
    let volatility = a.kind == PdfKind::Volatility;
    let u_max = a.u_max.unwrap_or(if volatility { 3.0 } else { 6.0 });
    if !(a.u_step > 0.0 && u_max > 0.0) {
        return Err(CliError::Input("u-max and u-step must be positive".into()));
    }
    let n = (u_max / a.u_step + 1e-9).floor() as usize;
    let us: Vec<f64> = (0..=n).map(|k| k as f64 * a.u_step).collect();
    let kind = kind_of(volatility);
    let dens = match choice {
        Choice::Classic(c) if volatility => EstimatorPdf::new(&bank, &SqrtDiagram(c), a.gamma)?.densities(&us)?,
        Choice::Classic(c) => EstimatorPdf::new(&bank, &c, a.gamma)?.densities(&us)?,
        Choice::Efficient(_) => {
            let t = choice.table(kind, &bank, None)?;
            EstimatorPdf::new(&bank, &t, a.gamma)?.densities(&us)?
        }
    };
    let mass: f64 = dens.windows(2).map(|p| 0.5 * a.u_step * (p[0] + p[1])).sum();
    if (mass - 1.0).abs() > 1e-3 {
        log::warn!("density mass on the grid is {mass}; widen the grid with --u-max");
    }
    let mut w = csv_writer(&a.out)?;
    w.write_record(["u", "density"])?;
    for (u, d) in us.iter().zip(&dens) {
        w.write_record([num(*u), num(*d)])?;
    }
    finish(w)?;
    Ok(vec![a.out.clone()])
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct QuasiArgs {
    /// Order: the estimator is unbiased at 2K+1 drifts.
    #[arg(long = "K", default_value_t = 1)]
    pub order: i64,
    /// Band width: nodes at iΓ/K.
    #[arg(long = "Gamma", default_value_t = 1.0)]
    pub band_width: f64,
    #[command(flatten)]
    pub grid: GammaGrid,
    #[command(flatten)]
    pub quad: QuadOpts,
    /// Weights CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Curve CSV; `<out>.curve.csv` by default.
    #[arg(long = "curve-out")]
    pub curve_out: Option<PathBuf>,
}

pub fn curve_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".curve.csv");
    PathBuf::from(s)
}

pub fn quasi(a: &QuasiArgs) -> CliResult<Vec<PathBuf>> {
    let bank = a.quad.bank()?;
    let spec = QuasiSpec::solve(a.order, a.band_width, &bank)?;
    let mut f = create(&a.out)?;
    spec.write_csv(&mut f)?;
    f.flush()?;
    let curve = a.curve_out.clone().unwrap_or_else(|| curve_path(&a.out));
    let mut w = csv_writer(&curve)?;
    w.write_record(["gamma", "mean", "variance", "renorm_variance"])?;
    for g in a.grid.values()? {
        let m = quasi_moments(&spec, g, &bank).map_err(|e| CliError::from(e).context(format!("gamma = {g}")))?;
        w.write_record([num(g), num(m.mean), num(m.variance), num(m.normalized_variance)])?;
    }
    finish(w)?;
    Ok(vec![a.out.clone(), curve])
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Steps per path; a comma-separated list runs a nested convergence study.
    #[arg(long = "N", value_delimiter = ',', value_parser = parse_count, default_value = "100000")]
    pub steps: Vec<usize>,
    /// Number of paths.
    #[arg(long = "M", value_parser = parse_count, default_value = "100000")]
    pub paths: usize,
    #[arg(long = "gamma", value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub est: EstimatorFlags,
    /// Volatility estimators instead of variance estimators.
    #[arg(long)]
    pub volatility: bool,
    /// Student-t innovations with this many degrees of freedom.
    #[arg(long = "student-t")]
    pub student_t: Option<f64>,
    #[command(flatten)]
    pub quad: QuadOpts,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    let mut est = a.est.clone();
    if est.is_empty() {
        est.rs = true;
    }
    let kind = kind_of(a.volatility);
    let suffix = if a.volatility { "_vol" } else { "" };
    let tables = if est.eff.is_empty() {
        Vec::new()
    } else {
        let bank = a.quad.bank()?;
        est.eff.iter().map(|&g| Choice::Efficient(g).table(kind, &bank, None)).collect::<CliResult<Vec<_>>>()?
    };
    type Boxed<'a> = Box<dyn Fn(&NormalizedTriple) -> f64 + Sync + 'a>;
    let mut named: Vec<(String, Boxed)> = Vec::new();
    for c in est.choices() {
        if let Choice::Classic(d) = c {
            let f: Boxed = if a.volatility {
                Box::new(move |t| homvol::estimators::canonical_estimate(t, &SqrtDiagram(d)))
            } else {
                Box::new(move |t| homvol::estimators::canonical_estimate(t, &d))
            };
            named.push((format!("{}{suffix}", c.name()), f));
        }
    }
    for (g, t) in est.eff.iter().zip(&tables) {
        named.push((format!("eff{g}{suffix}"), Box::new(move |x| homvol::estimators::canonical_estimate(x, t))));
    }
    if est.mle {
        let ctl = SeriesControl::default();
        named.push(("mle_vol".into(), Box::new(move |t| ml_scale(t, &ctl).map_or(f64::NAN, |f| f.scale))));
        named.push((
            "mle_var".into(),
            Box::new(move |t| ml_scale(t, &ctl).map_or(f64::NAN, |f| f.scale * f.scale)),
        ));
    }
    let refs: Vec<NamedEstimator> = named.iter().map(|(n, f)| (n.as_str(), f.as_ref() as &(dyn Fn(&NormalizedTriple) -> f64 + Sync))).collect();
    let innovation = a.student_t.map_or(Innovation::Gaussian, Innovation::StudentT);
    let rows = if innovation == Innovation::Gaussian {
        convergence_study(&a.gamma, &a.steps, a.paths, a.seed, &refs)?
    } else {
        student_study(a, innovation, &refs)?
    };
    let f = create(&a.out)?;
    write_study_csv(&rows, f)?;
    Ok(vec![a.out.clone()])
}

fn student_study(
    a: &SimulateArgs,
    innovation: Innovation,
    est: &[NamedEstimator<'_>],
) -> CliResult<Vec<homvol::montecarlo::StudyRow>> {
    use homvol::montecarlo::{sample_moments, simulate_nested, StudyRow};
    let s = simulate_nested(&a.steps, &a.gamma, a.paths, a.seed, innovation)?;
    let mut rows = Vec::new();
    for (si, &n) in s.steps.iter().enumerate() {
        for (gi, &g) in s.gammas.iter().enumerate() {
            for (name, f) in est {
                let vals: Vec<f64> = s.triples[si][gi].iter().map(f).collect();
                rows.push(StudyRow { steps: n, estimator: name.to_string(), gamma: g, moments: sample_moments(&vals)? });
            }
        }
    }
    Ok(rows)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MleArgs {
    /// CSV with header open,high,low,close[,horizon].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn mle(a: &MleArgs) -> CliResult<Vec<PathBuf>> {
    let bars = read_bars(&a.input)?;
    let ctl = SeriesControl::default();
    let mut w = csv_writer(&a.out)?;
    w.write_record(["row", "mu_hat", "sigma_hat", "d_hat", "loglik", "error"])?;
    let mut ok = 0;
    for (k, bar) in bars.iter().enumerate() {
        let row = (k + 1).to_string();
        match ml_volatility(bar, &ctl) {
            Ok(r) => {
                ok += 1;
                if !r.unimodal {
                    log::warn!("row {row}: the likelihood has several local maxima; the largest was taken");
                }
                w.write_record([row, num(r.mu_hat), num(r.sigma_hat), num(r.d_hat), num(r.loglik), String::new()])?;
            }
            Err(e) => {
                let code = match e {
                    homvol::Error::Domain(_) => "degenerate_range",
                    _ => "no_convergence",
                };
                log::warn!("row {row}: {e}");
                let mu = num((bar.close - bar.open) / bar.horizon);
                w.write_record([row, mu, String::new(), String::new(), String::new(), code.to_string()])?;
            }
        }
    }
    finish(w)?;
    if ok == 0 && !bars.is_empty() {
        return Err(CliError::Input("no row has a likelihood maximum".into()));
    }
    Ok(vec![a.out.clone()])
}
