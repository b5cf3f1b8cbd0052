//! Numerical integration primitives: Gauss–Legendre rules, a vector-valued
//! adaptive Gauss–Kronrod (7/15) integrator, and the `ρ = tan(πs/2)` map for
//! integrals over `[0, ∞)`.

use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pnm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
    (pn, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(x, w)` pairs on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        pairwise_sum(&self.mapped(a, b).map(|(x, w)| w * f(x)).collect::<Vec<_>>())
    }
}

// Kronrod 15-point abscissae and weights with the embedded 7-point Gauss weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub est_error: [f64; N],
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 400 }
    }
}

struct Interval<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    worst: f64,
}

impl<const N: usize> PartialEq for Interval<N> {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst
    }
}
impl<const N: usize> Eq for Interval<N> {}
impl<const N: usize> PartialOrd for Interval<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Interval<N> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.worst.total_cmp(&other.worst)
    }
}

fn gk15<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], [f64; N]) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for k in 0..N {
        kron[k] *= half;
        gauss[k] *= half;
        err[k] = (kron[k] - gauss[k]).abs();
    }
    (kron, err)
}

/// Globally adaptive G7–K15 integration of a vector-valued function on `[a, b]`.
///
/// Converges when every component satisfies `err ≤ max(abs_tol, rel_tol·|value|)`.
pub fn integrate_adaptive<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
) -> Result<QuadResult<N>> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let push = |heap: &mut BinaryHeap<Interval<N>>, a: f64, b: f64, f: &mut dyn FnMut(f64) -> [f64; N]| {
        let (value, error) = gk15(&mut |x| f(x), a, b);
        let worst = error.iter().cloned().fold(0.0, f64::max);
        heap.push(Interval { a, b, value, error, worst });
    };
    push(&mut heap, a, b, &mut f);
    evaluations += 15;
    loop {
        let mut total = [0.0; N];
        let mut total_err = [0.0; N];
        for iv in heap.iter() {
            for k in 0..N {
                total[k] += iv.value[k];
                total_err[k] += iv.error[k];
            }
        }
        let converged = (0..N).all(|k| total_err[k] <= opts.abs_tol.max(opts.rel_tol * total[k].abs()));
        if converged {
            return Ok(QuadResult { value: total, est_error: total_err, evaluations });
        }
        if heap.len() >= opts.max_intervals {
            let k = (0..N)
                .max_by(|&i, &j| total_err[i].total_cmp(&total_err[j]))
                .unwrap_or(0);
            return Err(Error::QuadratureNotConverged { value: total[k], est_error: total_err[k] });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval cannot be split further in floating point.
            let k = (0..N)
                .max_by(|&i, &j| total_err[i].total_cmp(&total_err[j]))
                .unwrap_or(0);
            return Err(Error::QuadratureNotConverged { value: total[k], est_error: total_err[k] });
        }
        push(&mut heap, worst.a, mid, &mut f);
        push(&mut heap, mid, worst.b, &mut f);
        evaluations += 30;
    }
}

/// Integral over `[0, ∞)` through `ρ = tan(πs/2)`, `s ∈ [0, 1)`.
pub fn integrate_half_line<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    opts: &AdaptiveOptions,
) -> Result<QuadResult<N>> {
    integrate_adaptive(
        |s| {
            let arg = FRAC_PI_2 * s;
            let rho = arg.tan();
            let c = arg.cos();
            let jac = FRAC_PI_2 / (c * c);
            let mut v = f(rho);
            if !jac.is_finite() {
                return [0.0; N];
            }
            for x in v.iter_mut() {
                *x *= jac;
            }
            v
        },
        0.0,
        1.0,
        opts,
    )
}

/// Scalar convenience wrapper over [`integrate_adaptive`].
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, opts: &AdaptiveOptions) -> Result<(f64, f64)> {
    let mut f = f;
    let r = integrate_adaptive(|x| [f(x)], a, b, opts)?;
    Ok((r.value[0], r.est_error[0]))
}

/// Scalar integral over `[0, ∞)`.
pub fn integrate_to_infinity(f: impl FnMut(f64) -> f64, opts: &AdaptiveOptions) -> Result<(f64, f64)> {
    let mut f = f;
    let r = integrate_half_line(|x| [f(x)], opts)?;
    Ok((r.value[0], r.est_error[0]))
}

/// Pairwise (cascade) summation; fixed association order for bit-stable results.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
