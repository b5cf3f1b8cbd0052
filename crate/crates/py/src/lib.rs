//! Python bindings: bars, classic estimators, kernel banks with efficiency
//! bounds and moments, most-efficient diagrams, quasi-unbiased estimators,
//! maximum likelihood and path simulation.

use homvol::diagram::{ClassicDiagram, DiagramTable, EstimatorKind, SqrtDiagram};
use homvol::estimators::{
    apply_wiener, efficient_on_rule, efficient_volatility_diagram, efficient_variance_diagram, gk_variance,
    lower_bound_variance, lower_bound_volatility, moments_on_rule, on_rule, parkinson_variance, rs_variance, Moments,
};
use homvol::mle::{ml_on_rule, ml_volatility};
use homvol::montecarlo::{simulate_triples, SimConfig};
use homvol::quasi::{quasi_expectation, quasi_moments, QuasiSpec};
use homvol::{Diagram, KernelBank, OhlcBar, QuadratureConfig, SeriesControl};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: homvol::Error) -> PyErr {
    match e {
        homvol::Error::Domain(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn kind(volatility: bool) -> EstimatorKind {
    if volatility {
        EstimatorKind::Volatility
    } else {
        EstimatorKind::Variance
    }
}

fn moments_dict<'py>(py: Python<'py>, m: &Moments) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", m.mean)?;
    d.set_item("second", m.second)?;
    d.set_item("variance", m.variance)?;
    d.set_item("normalized_variance", m.normalized_variance)?;
    Ok(d)
}

/// One open/high/low/close bar in log-price units over `horizon`.
#[pyclass(name = "OhlcBar", frozen)]
struct PyBar {
    inner: OhlcBar,
}

#[pymethods]
impl PyBar {
    #[new]
    #[pyo3(signature = (open, high, low, close, horizon = 1.0))]
    fn new(open: f64, high: f64, low: f64, close: f64, horizon: f64) -> PyResult<Self> {
        Ok(PyBar { inner: OhlcBar::new(open, high, low, close, horizon).map_err(to_py)? })
    }

    #[getter]
    fn open(&self) -> f64 {
        self.inner.open
    }
    #[getter]
    fn high(&self) -> f64 {
        self.inner.high
    }
    #[getter]
    fn low(&self) -> f64 {
        self.inner.low
    }
    #[getter]
    fn close(&self) -> f64 {
        self.inner.close
    }
    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    fn rs_variance(&self) -> f64 {
        rs_variance(&self.inner)
    }

    fn gk_variance(&self) -> f64 {
        gk_variance(&self.inner)
    }

    fn parkinson_variance(&self) -> f64 {
        parkinson_variance(&self.inner)
    }

    /// Maximum-likelihood drift and volatility as a dict.
    fn ml<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = ml_volatility(&self.inner, &SeriesControl::default()).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("mu_hat", r.mu_hat)?;
        d.set_item("sigma_hat", r.sigma_hat)?;
        d.set_item("d_hat", r.d_hat)?;
        d.set_item("loglik", r.loglik)?;
        d.set_item("unimodal", r.unimodal)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let b = &self.inner;
        format!("OhlcBar(open={}, high={}, low={}, close={}, horizon={})", b.open, b.high, b.low, b.close, b.horizon)
    }
}

/// A tabulated estimator diagram.
#[pyclass(name = "Diagram", frozen)]
struct PyDiagram {
    inner: DiagramTable,
}

#[pymethods]
impl PyDiagram {
    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn volatility(&self) -> bool {
        self.inner.kind == EstimatorKind::Volatility
    }

    fn value(&self, theta: f64, phi: f64) -> f64 {
        self.inner.value(theta, phi)
    }

    /// Variance (or volatility) per unit time estimated from one bar.
    fn apply(&self, bar: &PyBar) -> PyResult<f64> {
        Ok(apply_wiener(&bar.inner, &self.inner).map_err(to_py)?.point)
    }
}

/// Kernel fields on a fixed angular rule, cached per drift.
#[pyclass(name = "KernelBank", frozen)]
struct PyBank {
    inner: KernelBank,
}

impl PyBank {
    fn values(&self, estimator: &str, gamma0: f64, volatility: bool) -> PyResult<Vec<f64>> {
        let b = &self.inner;
        let classic = |c: ClassicDiagram| {
            if volatility {
                on_rule(&SqrtDiagram(c), b.rule())
            } else {
                on_rule(&c, b.rule())
            }
        };
        Ok(match estimator {
            "rs" => classic(ClassicDiagram::RogersSatchell),
            "gk" => classic(ClassicDiagram::GarmanKlass),
            "parkinson" => classic(ClassicDiagram::Parkinson),
            "efficient" => efficient_on_rule(kind(volatility), gamma0, b).map_err(to_py)?,
            "mle" => {
                let s = ml_on_rule(b, &SeriesControl::default()).map_err(to_py)?;
                if volatility {
                    s
                } else {
                    s.iter().map(|v| v * v).collect()
                }
            }
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown estimator '{other}'; use rs, gk, parkinson, efficient or mle"
                )))
            }
        })
    }
}

#[pymethods]
impl PyBank {
    #[new]
    #[pyo3(signature = (grid = 64, tol_radial = 1e-9, tol_angular = 1e-7))]
    fn new(grid: usize, tol_radial: f64, tol_angular: f64) -> PyResult<Self> {
        let cfg = QuadratureConfig {
            radial_tol: tol_radial,
            angular_tol: tol_angular,
            n_phi: grid,
            n_theta: grid,
            ..Default::default()
        };
        Ok(PyBank { inner: KernelBank::new(cfg).map_err(to_py)? })
    }

    /// Smallest variance of an unbiased canonical variance estimator at `gamma`.
    fn lower_bound_variance(&self, py: Python<'_>, gamma: f64) -> PyResult<f64> {
        py.detach(|| lower_bound_variance(gamma, &self.inner)).map_err(to_py)
    }

    fn lower_bound_volatility(&self, py: Python<'_>, gamma: f64) -> PyResult<f64> {
        py.detach(|| lower_bound_volatility(gamma, &self.inner)).map_err(to_py)
    }

    /// Moments of a canonical estimator at drift `gamma`.
    ///
    /// `estimator` is one of rs, gk, parkinson, efficient (tuned to `gamma0`) or mle.
    #[pyo3(signature = (estimator, gamma, gamma0 = 0.0, volatility = false))]
    fn moments<'py>(
        &self,
        py: Python<'py>,
        estimator: &str,
        gamma: f64,
        gamma0: f64,
        volatility: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let vals = self.values(estimator, gamma0, volatility)?;
        let m = py.detach(|| moments_on_rule(&self.inner, kind(volatility), &vals, gamma)).map_err(to_py)?;
        moments_dict(py, &m)
    }

    /// Tabulated most-efficient diagram at `gamma0`.
    #[pyo3(signature = (gamma0, volatility = false))]
    fn efficient_diagram(&self, py: Python<'_>, gamma0: f64, volatility: bool) -> PyResult<PyDiagram> {
        let t = py.detach(|| {
            if volatility {
                efficient_volatility_diagram(gamma0, &self.inner)
            } else {
                efficient_variance_diagram(gamma0, &self.inner)
            }
        });
        Ok(PyDiagram { inner: t.map_err(to_py)? })
    }

    /// Quasi-unbiased variance estimator of `order` K and `band_width` Γ.
    fn quasi(slf: Bound<'_, Self>, order: i64, band_width: f64) -> PyResult<PyQuasi> {
        let spec = QuasiSpec::solve(order, band_width, &slf.get().inner).map_err(to_py)?;
        Ok(PyQuasi { spec, bank: slf.unbind() })
    }
}

/// Weights of a quasi-unbiased estimator, tied to the bank that solved them.
#[pyclass(name = "QuasiEstimator", frozen)]
struct PyQuasi {
    spec: QuasiSpec,
    bank: Py<PyBank>,
}

#[pymethods]
impl PyQuasi {
    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.spec.nodes.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.spec.weights.clone()
    }

    #[getter]
    fn condition(&self) -> f64 {
        self.spec.condition
    }

    fn expectation(&self, gamma: f64) -> PyResult<f64> {
        quasi_expectation(&self.spec, gamma, &self.bank.get().inner).map_err(to_py)
    }

    fn moments<'py>(&self, py: Python<'py>, gamma: f64) -> PyResult<Bound<'py, PyDict>> {
        let m = quasi_moments(&self.spec, gamma, &self.bank.get().inner).map_err(to_py)?;
        moments_dict(py, &m)
    }
}

/// Normalized `(high, low, close)` of `paths` simulated `steps`-step walks with drift `gamma`.
#[pyfunction]
#[pyo3(signature = (steps, paths, gamma = 0.0, seed = 42))]
fn simulate(py: Python<'_>, steps: usize, paths: usize, gamma: f64, seed: u64) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = SimConfig::new(steps, paths, gamma, seed).map_err(to_py)?;
    let t = py.detach(|| simulate_triples(&cfg)).map_err(to_py)?;
    Ok(t.iter().map(|t| (t.h, t.l, t.c)).collect())
}

#[pymodule]
#[pyo3(name = "homvol")]
fn homvol_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBar>()?;
    m.add_class::<PyDiagram>()?;
    m.add_class::<PyBank>()?;
    m.add_class::<PyQuasi>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
