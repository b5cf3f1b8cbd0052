//! Homogeneous OHLC volatility and variance estimators for drifted Wiener
//! log-prices.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod diagram;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod mle;
pub mod montecarlo;
pub mod ohlc;
pub mod quad;
pub mod quasi;

pub use error::{Error, Result};
pub use ohlc::{
    angular_bounds, from_spherical, normalize_bar, to_spherical, Drift, NormalizedTriple, OhlcBar,
    SphericalTriple,
};
pub use density::SeriesControl;
pub use diagram::{ClassicDiagram, Diagram, DiagramTable, EstimatorKind, SqrtDiagram};
pub use estimators::{apply_diagram, apply_wiener, EstimateResult, Moments};
pub use kernels::{KernelBank, QuadratureConfig};
pub use mle::{MlNormalizer, MlResult};
pub use montecarlo::{Innovation, McMoments, SimConfig};
pub use quasi::QuasiSpec;
