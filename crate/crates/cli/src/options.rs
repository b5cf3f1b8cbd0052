//! Argument groups shared by several subcommands.

use clap::Args;
use homvol::diagram::{ClassicDiagram, Diagram, DiagramTable, EstimatorKind, SqrtDiagram};
use homvol::estimators::{efficient_diagram_sized, efficient_on_rule, on_rule};
use homvol::kernels::{KernelBank, QuadratureConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Parses a count written as an integer or in float notation such as `1e5`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v >= 1.0 && v.fract() == 0.0 && v <= 1e15) {
        return Err(format!("'{s}' is not a positive integer"));
    }
    Ok(v as usize)
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct QuadOpts {
    /// Relative tolerance of the radial integrals.
    #[arg(long = "tol-radial", default_value_t = 1e-9)]
    pub tol_radial: f64,
    /// Relative tolerance of generic angular integrals.
    #[arg(long = "tol-angular", default_value_t = 1e-7)]
    pub tol_angular: f64,
    /// Gauss-Legendre nodes per angular axis.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
}

impl QuadOpts {
    pub fn bank(&self) -> CliResult<KernelBank> {
        let cfg = QuadratureConfig {
            radial_tol: self.tol_radial,
            angular_tol: self.tol_angular,
            n_phi: self.grid,
            n_theta: self.grid,
            ..Default::default()
        };
        Ok(KernelBank::new(cfg)?)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstimatorFlags {
    /// Rogers-Satchell.
    #[arg(long)]
    pub rs: bool,
    /// Garman-Klass.
    #[arg(long)]
    pub gk: bool,
    /// Parkinson.
    #[arg(long)]
    pub parkinson: bool,
    /// Most-efficient estimator tuned to this drift; repeatable.
    #[arg(long = "eff", value_name = "GAMMA0", allow_negative_numbers = true)]
    pub eff: Vec<f64>,
    /// Maximum likelihood.
    #[arg(long)]
    pub mle: bool,
}

/// A diagram-based estimator picked on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Classic(ClassicDiagram),
    Efficient(f64),
}

impl Choice {
    pub fn name(&self) -> String {
        match self {
            Choice::Classic(ClassicDiagram::RogersSatchell) => "rs".into(),
            Choice::Classic(ClassicDiagram::GarmanKlass) => "gk".into(),
            Choice::Classic(ClassicDiagram::Parkinson) => "parkinson".into(),
            Choice::Efficient(g) => format!("eff{g}"),
        }
    }

    /// Values at the nodes of the bank's rule; efficient diagrams use exact kernel ratios.
    pub fn on_rule(&self, kind: EstimatorKind, bank: &KernelBank) -> CliResult<Vec<f64>> {
        Ok(match (self, kind) {
            (Choice::Classic(c), EstimatorKind::Variance) => on_rule(c, bank.rule()),
            (Choice::Classic(c), EstimatorKind::Volatility) => on_rule(&SqrtDiagram(*c), bank.rule()),
            (Choice::Efficient(g), k) => efficient_on_rule(k, *g, bank)?,
        })
    }

    /// Tabulated diagram; `size` defaults per estimator.
    pub fn table(&self, kind: EstimatorKind, bank: &KernelBank, size: Option<usize>) -> CliResult<DiagramTable> {
        match *self {
            Choice::Classic(c) => {
                let n = size.unwrap_or(homvol::diagram::CLASSIC_TABLE_SIZE);
                let label = self.name();
                let t = match kind {
                    EstimatorKind::Variance => DiagramTable::tabulate(kind, None, label, n, n, |t, p| Ok(c.value(t, p))),
                    EstimatorKind::Volatility => {
                        DiagramTable::tabulate(kind, None, label, n, n, |t, p| Ok(SqrtDiagram(c).value(t, p)))
                    }
                };
                Ok(t?)
            }
            Choice::Efficient(g) => {
                let n = size.unwrap_or(homvol::diagram::DEFAULT_TABLE_SIZE);
                Ok(efficient_diagram_sized(kind, g, bank, n)?)
            }
        }
    }
}

impl EstimatorFlags {
    /// Diagram-based choices in a fixed order: rs, gk, parkinson, then each `--eff`.
    pub fn choices(&self) -> Vec<Choice> {
        let mut out = Vec::new();
        if self.rs {
            out.push(Choice::Classic(ClassicDiagram::RogersSatchell));
        }
        if self.gk {
            out.push(Choice::Classic(ClassicDiagram::GarmanKlass));
        }
        if self.parkinson {
            out.push(Choice::Classic(ClassicDiagram::Parkinson));
        }
        out.extend(self.eff.iter().map(|&g| Choice::Efficient(g)));
        out
    }

    pub fn is_empty(&self) -> bool {
        self.choices().is_empty() && !self.mle
    }

    /// Exactly one diagram-based estimator, for commands that emit a single diagram.
    pub fn single(&self) -> CliResult<Choice> {
        match self.choices().as_slice() {
            [c] if !self.mle => Ok(*c),
            _ => Err(CliError::Input("select exactly one of --rs, --gk, --parkinson, --eff <GAMMA0>".into())),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GammaGrid {
    /// Explicit drift values; overrides the range.
    #[arg(long = "gamma", value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Vec<f64>,
    #[arg(long = "gamma-min", default_value_t = -2.0, allow_negative_numbers = true)]
    pub gamma_min: f64,
    #[arg(long = "gamma-max", default_value_t = 2.0, allow_negative_numbers = true)]
    pub gamma_max: f64,
    #[arg(long = "gamma-step", default_value_t = 0.05)]
    pub gamma_step: f64,
}

impl GammaGrid {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        if !self.gamma.is_empty() {
            return Ok(self.gamma.clone());
        }
        if !(self.gamma_step > 0.0) || !(self.gamma_max >= self.gamma_min) {
            return Err(CliError::Input("drift range needs gamma-min ≤ gamma-max and a positive step".into()));
        }
        let n = ((self.gamma_max - self.gamma_min) / self.gamma_step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so that grid points print as typed.
        Ok((0..=n).map(|k| ((self.gamma_min + k as f64 * self.gamma_step) * 1e12).round() / 1e12).collect())
    }
}
