//! Quadrature rules: Gauss-Legendre, Clenshaw-Curtis on [0, 1], adaptive
//! Gauss-Kronrod, generalized Gauss-Laguerre and exp-sinh on (0, inf).

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Clenshaw-Curtis rule on [0, 1] with `degree + 1` Chebyshev-Lobatto nodes
/// in increasing order.
#[derive(Debug, Clone)]
pub struct ClenshawCurtis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ClenshawCurtis {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1);
        let n = degree;
        let nodes = (0..=n).map(|j| 0.5 * (1.0 - (PI * j as f64 / n as f64).cos())).collect();
        let mut weights = vec![0.0; n + 1];
        let nf = n as f64;
        for (k, w) in weights.iter_mut().enumerate() {
            let theta = PI * k as f64 / nf;
            let mut v = 1.0;
            if n.is_multiple_of(2) {
                if k == 0 || k == n {
                    *w = 1.0 / (nf * nf - 1.0);
                    continue;
                }
                for j in 1..n / 2 {
                    v -= 2.0 * (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
                }
                v -= (nf * theta).cos() / (nf * nf - 1.0);
            } else {
                if k == 0 || k == n {
                    *w = 1.0 / (nf * nf);
                    continue;
                }
                for j in 1..=(n - 1) / 2 {
                    v -= 2.0 * (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
                }
            }
            *w = 2.0 * v / nf;
        }
        // weights above are for [-1, 1]; halve for [0, 1]
        for w in &mut weights {
            *w *= 0.5;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS7_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += KRONROD_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod (7/15) with bisection. Returns the integral and an
/// error estimate.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> (f64, f64) {
        let (v, e) = gauss_kronrod_15(f, a, b);
        if e <= tol || depth == 0 || (b - a) < 1e-14 {
            return (v, e);
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = recurse(f, a, m, 0.5 * tol, depth - 1);
        let (v2, e2) = recurse(f, m, b, 0.5 * tol, depth - 1);
        (v1 + v2, e1 + e2)
    }
    if a == b {
        return (0.0, 0.0);
    }
    recurse(&f, a, b, tol, 40)
}

/// Generalized Gauss-Laguerre rule for `int_0^inf t^alpha e^{-t} g(t) dt`.
#[derive(Debug, Clone)]
pub struct LaguerreRule {
    alpha: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LaguerreRule {
    /// Golub-Welsch on the Jacobi matrix of the generalized Laguerre weight.
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 || alpha <= -1.0 {
            return Err(Error::Domain(format!(
                "Laguerre rule needs n >= 1 and alpha > -1 (got n = {n}, alpha = {alpha})"
            )));
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let kf = k as f64;
            jacobi[(k, k)] = 2.0 * kf + alpha + 1.0;
            if k + 1 < n {
                let off = ((kf + 1.0) * (kf + 1.0 + alpha)).sqrt();
                jacobi[(k, k + 1)] = off;
                jacobi[(k + 1, k)] = off;
            }
        }
        let eig = SymmetricEigen::new(jacobi);
        let log_mass = ln_gamma(alpha + 1.0);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], (log_mass + 2.0 * v0.abs().ln()).exp())
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self { alpha, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_0^inf t^alpha e^{-t} g(t) dt`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * g(t)).sum()
    }
}

/// Exp-sinh rule for `int_0^inf f(t) dt`, used as an independent check on
/// the Laguerre rules.
#[derive(Debug, Clone)]
pub struct ExpSinhRule {
    step: f64,
    half_width: f64,
}

impl Default for ExpSinhRule {
    fn default() -> Self {
        Self { step: 1.0 / 64.0, half_width: 4.5 }
    }
}

impl ExpSinhRule {
    pub fn new(step: f64, half_width: f64) -> Self {
        Self { step, half_width }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let n = (self.half_width / self.step).ceil() as i64;
        let mut total = 0.0;
        for k in -n..=n {
            let u = k as f64 * self.step;
            let t = (0.5 * PI * u.sinh()).exp();
            if !t.is_finite() || t == 0.0 {
                continue;
            }
            let dt = 0.5 * PI * u.cosh() * t;
            let v = f(t);
            if v.is_finite() {
                total += v * dt;
            }
        }
        total * self.step
    }
}
