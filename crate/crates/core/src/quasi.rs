//! Quasi-unbiased composed variance estimators: weighted sums of most-efficient
//! diagrams that are exactly unbiased at `2K + 1` drift nodes.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::diagram::{DiagramTable, EstimatorKind, DEFAULT_TABLE_SIZE};
use crate::error::{Error, Result};
use crate::estimators::{efficient_diagram_sized, moments_on_rule, Moments};
use crate::kernels::KernelBank;

/// Largest 1-norm condition number accepted by the weight solve.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest residual of the unbiasedness system accepted by the weight solve.
pub const MAX_RESIDUAL: f64 = 1e-10;

/// `γᵢ = iΓ/K` for `i = −K..K`; the single node 0 when `K = 0`.
pub fn build_nodes(order: i64, band_width: f64) -> Result<Vec<f64>> {
    if order < 0 {
        return Err(Error::domain(format!("order {order} must be nonnegative")));
    }
    if order == 0 {
        return Ok(vec![0.0]);
    }
    if !(band_width > 0.0 && band_width.is_finite()) {
        return Err(Error::domain(format!("band width {band_width} must be positive")));
    }
    let k = order as f64;
    Ok((-order..=order).map(|i| i as f64 * band_width / k).collect())
}

/// `ε[i, j] = 𝓔(γⱼ, γᵢ)/𝓔(γᵢ)`: mean at drift `γⱼ` of the estimator tuned to `γᵢ`.
pub fn epsilon_matrix(nodes: &[f64], bank: &KernelBank) -> Result<DMatrix<f64>> {
    let n = nodes.len();
    let mut eps = DMatrix::zeros(n, n);
    for (i, &gi) in nodes.iter().enumerate() {
        let ei = bank.cal_e(gi)?;
        for (j, &gj) in nodes.iter().enumerate() {
            eps[(i, j)] = if i == j { 1.0 } else { bank.cal_e_cross(gj, gi)? / ei };
        }
    }
    Ok(eps)
}

/// Weights with their solve diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedWeights {
    /// `h_{−K}..h_K`, symmetric by construction.
    pub weights: Vec<f64>,
    /// `maxⱼ |Σᵢ ε[i, j] hᵢ − 1|` over the full system.
    pub residual: f64,
    /// 1-norm condition number of the folded system.
    pub condition: f64,
}

/// Solves `Σᵢ ε[i, j] hᵢ = 1` for all `j` under `hᵢ = h₋ᵢ`.
///
/// The folded system keeps the equations at `γⱼ ≥ 0` with unknowns `h₀..h_K`.
pub fn solve_weights(eps: &DMatrix<f64>) -> Result<SolvedWeights> {
    let n = eps.nrows();
    if n != eps.ncols() || n.is_multiple_of(2) {
        return Err(Error::domain("epsilon matrix must be square with an odd size"));
    }
    let k = n / 2;
    let a = DMatrix::from_fn(k + 1, k + 1, |j, m| {
        if m == 0 {
            eps[(k, k + j)]
        } else {
            eps[(k + m, k + j)] + eps[(k - m, k + j)]
        }
    });
    let inv = a.clone().try_inverse().ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let condition = norm1(&a) * norm1(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let folded = a.lu().solve(&nalgebra::DVector::from_element(k + 1, 1.0)).ok_or(Error::IllConditioned { condition })?;
    let weights: Vec<f64> = (0..n).map(|i| folded[i.abs_diff(k)]).collect();
    let residual = (0..n)
        .map(|j| ((0..n).map(|i| eps[(i, j)] * weights[i]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    if !(residual <= MAX_RESIDUAL) {
        log::warn!("quasi-unbiased system residual {residual:e} at condition {condition:e}");
        return Err(Error::IllConditioned { condition });
    }
    Ok(SolvedWeights { weights, residual, condition })
}

/// Order, band width, nodes and solved weights of a quasi-unbiased estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiSpec {
    pub order: usize,
    pub band_width: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

impl QuasiSpec {
    pub fn solve(order: i64, band_width: f64, bank: &KernelBank) -> Result<Self> {
        let nodes = build_nodes(order, band_width)?;
        let eps = epsilon_matrix(&nodes, bank)?;
        let s = solve_weights(&eps).map_err(|e| match e {
            Error::IllConditioned { condition } => {
                log::error!("order {order}, band width {band_width}: try a smaller order or a wider band");
                Error::IllConditioned { condition }
            }
            other => other,
        })?;
        Ok(QuasiSpec {
            order: order as usize,
            band_width: if order == 0 { 0.0 } else { band_width },
            nodes,
            weights: s.weights,
            residual: s.residual,
            condition: s.condition,
        })
    }

    /// Composed diagram `Σ hᵢ φᵢ` at the nodes of the bank's angular rule,
    /// evaluated from the kernel fields without tabulation.
    pub fn on_rule(&self, bank: &KernelBank) -> Result<Vec<f64>> {
        let mut out = vec![0.0; bank.rule().len()];
        for (&g, &h) in self.nodes.iter().zip(&self.weights) {
            let f = bank.field(g)?;
            let e = bank.cal_e(g)?;
            for (o, (a, b)) in out.iter_mut().zip(f.g2.iter().zip(&f.g4)) {
                if *b > 0.0 {
                    *o += h * a / (e * b);
                }
            }
        }
        Ok(out)
    }

    /// `i,gamma_i,h_i` rows behind `#` comments recording the solve.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# order K = {}", self.order)?;
        writeln!(out, "# band width Gamma = {}", self.band_width)?;
        writeln!(out, "# solver residual = {:e}", self.residual)?;
        writeln!(out, "# condition number = {:e}", self.condition)?;
        writeln!(out, "i,gamma_i,h_i")?;
        let k = self.order as i64;
        for (idx, (g, h)) in self.nodes.iter().zip(&self.weights).enumerate() {
            writeln!(out, "{},{:.16e},{:.16e}", idx as i64 - k, g, h)?;
        }
        Ok(())
    }
}

/// Pointwise `Σ hᵢ φᵢ` of the most-efficient variance diagrams at the nodes.
pub fn composed_diagram(spec: &QuasiSpec, bank: &KernelBank) -> Result<DiagramTable> {
    composed_diagram_sized(spec, bank, DEFAULT_TABLE_SIZE)
}

pub fn composed_diagram_sized(spec: &QuasiSpec, bank: &KernelBank, size: usize) -> Result<DiagramTable> {
    // Tables at −γ are reflections of those at γ.
    let positive: Vec<f64> = spec.nodes.iter().copied().filter(|g| *g >= 0.0).collect();
    let tables: Result<Vec<DiagramTable>> = positive
        .par_iter()
        .map(|&g| efficient_diagram_sized(EstimatorKind::Variance, g, bank, size))
        .collect();
    let tables = tables?;
    let mut parts = Vec::with_capacity(spec.nodes.len());
    let mut mirrored = Vec::new();
    for &g in &spec.nodes {
        if g < 0.0 {
            let idx = positive.iter().position(|p| *p == -g).expect("nodes are symmetric");
            mirrored.push(tables[idx].reflected(format!("eff-var({g})"))?);
        }
    }
    let mut neg = mirrored.iter();
    for (&g, &h) in spec.nodes.iter().zip(&spec.weights) {
        let t = if g < 0.0 {
            neg.next().expect("one mirror per negative node")
        } else {
            &tables[positive.iter().position(|p| *p == g).expect("node tabulated")]
        };
        parts.push((h, t));
    }
    let label = format!("quasi(K={}, Gamma={})", spec.order, spec.band_width);
    DiagramTable::combine(&parts, None, label)
}

/// `E[d̂ | γ] = Σ hᵢ 𝓔(γ, γᵢ)/𝓔(γᵢ)`.
pub fn quasi_expectation(spec: &QuasiSpec, gamma: f64, bank: &KernelBank) -> Result<f64> {
    let mut acc = 0.0;
    for (&g, &h) in spec.nodes.iter().zip(&spec.weights) {
        acc += h * bank.cal_e_cross(gamma, g)? / bank.cal_e(g)?;
    }
    Ok(acc)
}

/// Mean and variance of the composed canonical estimator at drift `γ`.
pub fn quasi_moments(spec: &QuasiSpec, gamma: f64, bank: &KernelBank) -> Result<Moments> {
    let vals = spec.on_rule(bank)?;
    moments_on_rule(bank, EstimatorKind::Variance, &vals, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{efficient_variance_diagram, lower_bound_variance};
    use crate::kernels::QuadratureConfig;
    use std::sync::OnceLock;

    fn bank() -> &'static KernelBank {
        static BANK: OnceLock<KernelBank> = OnceLock::new();
        BANK.get_or_init(|| KernelBank::new(QuadratureConfig { n_phi: 32, n_theta: 32, ..Default::default() }).unwrap())
    }

    #[test]
    fn node_placement() {
        assert_eq!(build_nodes(1, 1.0).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(build_nodes(2, 1.0).unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(build_nodes(0, 7.0).unwrap(), vec![0.0]);
        assert_eq!(build_nodes(0, -1.0).unwrap(), vec![0.0]);
        assert!(build_nodes(-1, 1.0).is_err());
        assert!(build_nodes(1, 0.0).is_err());
    }

    #[test]
    fn epsilon_structure() {
        let eps = epsilon_matrix(&build_nodes(1, 1.0).unwrap(), bank()).unwrap();
        assert_eq!(eps.shape(), (3, 3));
        for i in 0..3 {
            assert_eq!(eps[(i, i)], 1.0);
            for j in 0..3 {
                assert!(eps[(i, j)] > 0.0);
                assert!((eps[(i, j)] - eps[(2 - i, 2 - j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_order_weights_match_closed_form() {
        for gb in [0.5, 1.0] {
            let eps = epsilon_matrix(&build_nodes(1, gb).unwrap(), bank()).unwrap();
            // Index offset: node i ∈ {−1, 0, 1} sits at i + 1.
            let e = |i: i32, j: i32| eps[((i + 1) as usize, (j + 1) as usize)];
            let den = 2.0 * e(0, 1) * e(1, 0) - e(0, 0) * (e(-1, 1) + e(1, 1));
            let h0 = (2.0 * e(1, 0) - e(-1, 1) - e(1, 1)) / den;
            let h1 = (e(0, 0) - e(0, 1)) / (e(0, 0) * (e(-1, 1) + e(1, 1)) - 2.0 * e(0, 1) * e(1, 0));
            let s = solve_weights(&eps).unwrap();
            assert!((s.weights[1] - h0).abs() < 1e-10, "{} vs {h0}", s.weights[1]);
            assert!((s.weights[0] - h1).abs() < 1e-10);
            assert_eq!(s.weights[0], s.weights[2]);
            assert!(s.residual <= 1e-10);
        }
    }

    #[test]
    fn zero_order_is_the_efficient_estimator() {
        let spec = QuasiSpec::solve(0, 1.0, bank()).unwrap();
        assert_eq!(spec.weights, vec![1.0]);
        let a = composed_diagram_sized(&spec, bank(), 16).unwrap();
        let b = efficient_diagram_sized(EstimatorKind::Variance, 0.0, bank(), 16).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn first_order_expectation_curve() {
        let spec = QuasiSpec::solve(1, 1.0, bank()).unwrap();
        for g in [-1.0, 0.0, 1.0] {
            assert!((quasi_expectation(&spec, g, bank()).unwrap() - 1.0).abs() < 1e-6);
        }
        for k in 0..=12 {
            let g = 0.1 * k as f64;
            let e = quasi_expectation(&spec, g, bank()).unwrap();
            assert!((0.98..=1.02).contains(&e), "γ={g}: {e}");
            assert!((e - quasi_expectation(&spec, -g, bank()).unwrap()).abs() < 1e-8);
        }
        let m = quasi_moments(&spec, 0.0, bank()).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-8);
        assert!(m.variance < 0.331);
        assert!(m.normalized_variance >= lower_bound_variance(0.0, bank()).unwrap());
    }

    #[test]
    fn narrow_band_is_flat() {
        let spec = QuasiSpec::solve(1, 0.5, bank()).unwrap();
        for k in 0..=12 {
            let g = 0.05 * k as f64;
            let e = quasi_expectation(&spec, g, bank()).unwrap();
            assert!((0.995..=1.005).contains(&e), "γ={g}: {e}");
        }
    }

    #[test]
    fn table_route_matches_rule_route() {
        let spec = QuasiSpec::solve(1, 1.0, bank()).unwrap();
        let table = composed_diagram(&spec, bank()).unwrap();
        let direct = crate::estimators::moments(bank(), &table, 0.5).unwrap();
        let exact = quasi_moments(&spec, 0.5, bank()).unwrap();
        assert!((direct.mean - exact.mean).abs() < 1e-6, "{direct:?} vs {exact:?}");
        let e1 = efficient_variance_diagram(1.0, bank()).unwrap();
        let r = e1.reflected("m").unwrap();
        let (t, p) = (0.1, -0.3);
        let (t2, p2) = crate::kernels::reflect_angles(t, p);
        use crate::diagram::Diagram;
        assert!((e1.value(t, p) - r.value(t2, p2)).abs() < 1e-12);
    }

    #[test]
    fn variance_after_renormalization_respects_bound() {
        let spec = QuasiSpec::solve(2, 1.5, bank()).unwrap();
        assert!(spec.residual <= 1e-10);
        for g in [0.0, 0.4, 1.1, 2.0] {
            let m = quasi_moments(&spec, g, bank()).unwrap();
            let v = lower_bound_variance(g, bank()).unwrap();
            assert!(m.normalized_variance >= v - 1e-9, "γ={g}: {} < {v}", m.normalized_variance);
        }
    }

    #[test]
    fn close_nodes_are_rejected() {
        let eps = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(solve_weights(&eps), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn csv_export() {
        let spec = QuasiSpec::solve(1, 0.5, bank()).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "i,gamma_i,h_i");
        assert_eq!(rows.len(), 4);
        assert!(rows[1].starts_with("-1,-5.0"));
    }
}
