//! Chebyshev collocation of the transfer operators on [0, 1]: matrices,
//! the invariant density, the subdominant eigenvalue, and an independent
//! Ulam discretization for comparison.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::CounterRng;
use crate::error::{Error, Result};
use crate::quadrature::{ClenshawCurtis, GaussLegendre};
use crate::special::digamma;
use crate::transfer::{BranchSum, Callable, Stencil, TailPolicy, UnitFunction};

/// Default node map exponent: nodes are `x = s^3` for Chebyshev-Lobatto
/// points `s` on [0, 1].
pub const DEFAULT_NODE_POWER: u32 = 3;

/// Collocation grid on [0, 1]. Interpolation is polynomial in the reference
/// variable `s = x^{1/k}` at Chebyshev-Lobatto points, so `k = 1` is the
/// plain affine grid and `k > 1` clusters nodes at 0, where the invariant
/// densities for small `p` have singularities accumulating from the left.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    degree: usize,
    power: u32,
    reference: Vec<f64>,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    quad: Vec<f64>,
    diff: [DMatrix<f64>; 3],
}

impl CollocationGrid {
    pub fn new(degree: usize) -> Result<Self> {
        Self::with_power(degree, DEFAULT_NODE_POWER)
    }

    pub fn affine(degree: usize) -> Result<Self> {
        Self::with_power(degree, 1)
    }

    pub fn with_power(degree: usize, power: u32) -> Result<Self> {
        if degree < 4 {
            return Err(Error::Domain(format!("collocation degree must be >= 4, got {degree}")));
        }
        if power == 0 || power > 8 {
            return Err(Error::Domain(format!("node map exponent must be in 1..=8, got {power}")));
        }
        let cc = ClenshawCurtis::new(degree);
        let reference = cc.nodes().to_vec();
        let k = power as i32;
        let nodes: Vec<f64> = reference.iter().map(|s| s.powi(k)).collect();
        let bary: Vec<f64> = (0..=degree)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == degree {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let n = degree + 1;
        let mut d1 = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (bary[j] / bary[i]) / (reference[i] - reference[j]);
                    d1[(i, j)] = v;
                    diag -= v;
                }
            }
            d1[(i, i)] = diag;
        }
        let d2 = &d1 * &d1;
        let d3 = &d2 * &d1;
        let mut grid = Self { degree, power, reference, nodes, bary, quad: cc.weights().to_vec(), diff: [d1, d2, d3] };
        if power > 1 {
            // exact integrals of the cardinal functions against dx = k s^{k-1} ds
            let rule = GaussLegendre::new(degree / 2 + power as usize + 2);
            let mut quad = vec![0.0; n];
            for (s, w) in rule.mapped(0.0, 1.0) {
                let jac = w * k as f64 * s.powi(k - 1);
                for (q, c) in quad.iter_mut().zip(grid.cardinal_reference(s)) {
                    *q += jac * c;
                }
            }
            grid.quad = quad;
        }
        Ok(grid)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in `x`, increasing, with both endpoints.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Chebyshev-Lobatto points in the reference variable.
    pub fn reference_nodes(&self) -> &[f64] {
        &self.reference
    }

    pub fn barycentric_weights(&self) -> &[f64] {
        &self.bary
    }

    pub fn integration_weights(&self) -> &[f64] {
        &self.quad
    }

    /// Differentiation matrix of order 1, 2 or 3 in the reference variable.
    pub fn differentiation(&self, order: usize) -> &DMatrix<f64> {
        &self.diff[order - 1]
    }

    pub fn to_reference(&self, x: f64) -> f64 {
        match self.power {
            1 => x,
            2 => x.sqrt(),
            3 => x.cbrt(),
            k => x.powf(1.0 / k as f64),
        }
    }

    /// Coefficients `a_q` with `d^r f/dx^r = sum_q a_q d^q g/ds^q` at `x`,
    /// where `f(x) = g(s)`. Not finite at `x = 0` when the map is not affine.
    pub fn chain_coefficients(&self, x: f64, order: usize) -> [f64; 4] {
        if order == 0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let inv = 1.0 / self.power as f64;
        let s = self.to_reference(x);
        let (s1, s2, s3) = if self.power == 1 {
            (1.0, 0.0, 0.0)
        } else {
            let s1 = inv * s / x;
            let s2 = s1 * (inv - 1.0) / x;
            let s3 = s2 * (inv - 2.0) / x;
            (s1, s2, s3)
        };
        match order {
            1 => [0.0, s1, 0.0, 0.0],
            2 => [0.0, s2, s1 * s1, 0.0],
            3 => [0.0, s3, 3.0 * s1 * s2, s1 * s1 * s1],
            _ => panic!("derivatives above order 3 are not tracked"),
        }
    }

    /// Values of the cardinal functions at `y`.
    pub fn cardinal(&self, y: f64) -> Vec<f64> {
        if let Some(k) = self.nodes.iter().position(|&t| t == y) {
            let mut out = vec![0.0; self.len()];
            out[k] = 1.0;
            return out;
        }
        self.cardinal_reference(self.to_reference(y))
    }

    fn cardinal_reference(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        if let Some(k) = self.reference.iter().position(|&t| t == s) {
            out[k] = 1.0;
            return out;
        }
        let mut total = 0.0;
        for (o, (&t, &w)) in out.iter_mut().zip(self.reference.iter().zip(&self.bary)) {
            *o = w / (s - t);
            total += *o;
        }
        for o in &mut out {
            *o /= total;
        }
        out
    }

    fn interpolate_reference(&self, values: &[f64], s: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&t, &w), &v) in self.reference.iter().zip(&self.bary).zip(values) {
            if t == s {
                return v;
            }
            let c = w / (s - t);
            num += c * v;
            den += c;
        }
        num / den
    }

    /// Barycentric interpolation of nodal values at `y`.
    pub fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        if let Some(k) = self.nodes.iter().position(|&t| t == y) {
            return values[k];
        }
        self.interpolate_reference(values, self.to_reference(y))
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.quad.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// A function on [0, 1] held by its values on a collocation grid.
#[derive(Debug, Clone)]
pub struct ChebInterpolant {
    grid: Arc<CollocationGrid>,
    values: Vec<f64>,
    derivs: [Vec<f64>; 3],
}

impl ChebInterpolant {
    pub fn new(grid: Arc<CollocationGrid>, values: Vec<f64>) -> Self {
        let v = DVector::from_column_slice(&values);
        let derivs = [1, 2, 3].map(|k| (grid.differentiation(k) * &v).as_slice().to_vec());
        Self { grid, values, derivs }
    }

    pub fn sample<F: UnitFunction + ?Sized>(grid: Arc<CollocationGrid>, f: &F) -> Self {
        let values = grid.nodes().iter().map(|&x| f.eval(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<CollocationGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

impl UnitFunction for ChebInterpolant {
    fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    fn derivative(&self, x: f64, order: usize) -> f64 {
        if order == 0 {
            return self.eval(x);
        }
        let coef = self.grid.chain_coefficients(x, order);
        if coef.iter().any(|c| !c.is_finite()) {
            return crate::transfer::finite_difference(|t| self.eval(t), x, order);
        }
        let s = self.grid.to_reference(x);
        (1..=order)
            .filter(|&q| coef[q] != 0.0)
            .map(|q| coef[q] * self.grid.interpolate_reference(&self.derivs[q - 1], s))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorTag {
    Lp,
    A,
    B,
    J,
    Lhat,
}

/// Matrix acting on nodal values.
///
/// `mass_row[j]` is the integral of the operator applied to the `j`-th
/// cardinal function, taken with a rule of twice the degree; a same-grid
/// rule aliases because the `n = 1` branches are not contracting at the
/// endpoints.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub tag: OperatorTag,
    pub p: f64,
    pub policy: TailPolicy,
    pub grid: Arc<CollocationGrid>,
    pub mass_row: Option<DVector<f64>>,
}

impl OperatorMatrix {
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(values)).as_slice().to_vec()
    }

    /// `max_j |mass_row_j - w_j|`.
    pub fn markov_defect(&self) -> Option<f64> {
        let row = self.mass_row.as_ref()?;
        let w = self.grid.integration_weights();
        Some(row.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// `max_j |(w^T M)_j - w_j|` with the collocation rule itself.
    pub fn aliased_markov_defect(&self) -> f64 {
        let w = DVector::from_column_slice(self.grid.integration_weights());
        let left = self.matrix.tr_mul(&w);
        left.iter().zip(w.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Rows of a branch sum evaluated at `points`, acting on values at the
/// nodes of `grid`.
pub fn branch_rows(
    sum: BranchSum,
    points: &[f64],
    grid: &CollocationGrid,
    policy: &TailPolicy,
) -> Result<DMatrix<f64>> {
    policy.validate()?;
    let n = grid.len();
    let rows: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|&x| {
            let stencil = Stencil::new(sum, x, policy);
            let estimate = stencil.error_estimate(&Callable(|_| 1.0));
            if estimate > policy.tol {
                return Err(Error::Truncation { estimate, tol: policy.tol });
            }
            let mut parts = vec![vec![0.0; n]; 4];
            for tap in &stencil.taps {
                let card = grid.cardinal(tap.y);
                let coef = grid.chain_coefficients(tap.y, tap.order);
                for (q, &a) in coef.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    if !a.is_finite() {
                        return Err(Error::Domain(format!("derivative requested at the singular point {}", tap.y)));
                    }
                    for (s, c) in parts[q].iter_mut().zip(&card) {
                        *s += tap.weight * a * c;
                    }
                }
            }
            let mut row = parts[0].clone();
            for (order, part) in parts.iter().enumerate().skip(1) {
                if part.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let d = grid.differentiation(order);
                for (j, r) in row.iter_mut().enumerate() {
                    *r += (0..n).map(|k| part[k] * d[(k, j)]).sum::<f64>();
                }
            }
            Ok(row)
        })
        .collect();
    let mut matrix = DMatrix::zeros(points.len(), n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(matrix)
}

/// Integrals of a branch sum applied to each cardinal function.
pub fn mass_row(sum: BranchSum, grid: &CollocationGrid, policy: &TailPolicy) -> Result<DVector<f64>> {
    let fine = CollocationGrid::with_power(2 * grid.degree(), grid.power())?;
    let rows = branch_rows(sum, fine.nodes(), grid, policy)?;
    Ok(rows.tr_mul(&DVector::from_column_slice(fine.integration_weights())))
}

/// Matrix of a branch sum: row `i` is the stencil at node `i` acting on the
/// interpolant of the nodal values.
pub fn build_branch_matrix(
    sum: BranchSum,
    grid: Arc<CollocationGrid>,
    policy: &TailPolicy,
    tag: OperatorTag,
    p: f64,
) -> Result<OperatorMatrix> {
    let matrix = branch_rows(sum, grid.nodes(), &grid, policy)?;
    let mass = mass_row(sum, &grid, policy)?;
    Ok(OperatorMatrix { matrix, tag, p, policy: *policy, grid, mass_row: Some(mass) })
}

/// Collocation matrix of `L_p`.
pub fn build_matrix(p: f64, grid: Arc<CollocationGrid>, policy: &TailPolicy) -> Result<OperatorMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} is not a probability")));
    }
    build_branch_matrix(BranchSum::full(p), grid, policy, OperatorTag::Lp, p)
}

/// Leading eigenpair and diagnostics.
#[derive(Debug, Clone)]
pub struct DensityResult {
    pub lambda1: f64,
    pub density: ChebInterpolant,
    /// `|lambda_2|`, when computed.
    pub lambda2: Option<f64>,
    pub residual: f64,
    pub degree: usize,
    pub iterations: usize,
}

impl DensityResult {
    pub fn eval(&self, x: f64) -> f64 {
        self.density.eval(x)
    }
}

const MAX_ITERATIONS: usize = 100_000;
const STEP_TOL: f64 = 1e-13;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Power iteration normalized by the discrete integral.
pub fn leading_pair(m: &OperatorMatrix) -> Result<DensityResult> {
    if !matches!(m.tag, OperatorTag::Lp | OperatorTag::Lhat) {
        return Err(Error::InvalidMatrix("leading pair needs an Lp or Lhat matrix"));
    }
    let grid = &m.grid;
    let mut v = vec![1.0; grid.len()];
    let mut change = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let mut next = m.apply(&v);
        let mass = grid.integrate(&next);
        if !(mass.is_finite() && mass != 0.0) {
            return Err(Error::Consistency(format!("iterate lost its mass ({mass})")));
        }
        for x in &mut next {
            *x /= mass;
        }
        change = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change < STEP_TOL * sup_norm(&v).max(1.0) {
            let image = m.apply(&v);
            let lambda1 = grid.integrate(&image);
            let residual = image.iter().zip(&v).map(|(a, b)| (a - lambda1 * b).abs()).fold(0.0, f64::max);
            if let Some(bad) = v.iter().find(|&&x| x < -1e-10) {
                return Err(Error::Consistency(format!("density takes the negative value {bad} at a node")));
            }
            return Ok(DensityResult {
                lambda1,
                density: ChebInterpolant::new(grid.clone(), v),
                lambda2: None,
                residual,
                degree: grid.degree(),
                iterations: it,
            });
        }
    }
    Err(Error::GapTooSmall { iterations: MAX_ITERATIONS, change })
}

/// `M - lambda_1 h w^T`.
pub fn deflate(m: &OperatorMatrix, lead: &DensityResult) -> DMatrix<f64> {
    let h = DVector::from_column_slice(lead.density.values());
    let w = DVector::from_column_slice(m.grid.integration_weights());
    &m.matrix - lead.lambda1 * &h * w.transpose()
}

/// Largest eigenvalue modulus of a linear map, found by power iteration
/// with a two-term recurrence fit so that complex pairs are handled.
pub fn dominant_modulus<A>(apply: A, start: Vec<f64>) -> Result<(f64, usize)>
where
    A: FnMut(&[f64]) -> Vec<f64>,
{
    dominant_modulus_capped(apply, start, GAP_ITERATIONS)
}

const GAP_ITERATIONS: usize = 20_000;

pub fn dominant_modulus_capped<A>(mut apply: A, start: Vec<f64>, cap: usize) -> Result<(f64, usize)>
where
    A: FnMut(&[f64]) -> Vec<f64>,
{
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x0 = start;
    let mut prev = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=cap {
        let n0 = dot(&x0, &x0).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            return Ok((0.0, it));
        }
        x0.iter_mut().for_each(|v| *v /= n0);
        let x1 = apply(&x0);
        let x2 = apply(&x1);
        let (g11, g10, g00) = (dot(&x1, &x1), dot(&x1, &x0), dot(&x0, &x0));
        let (r1, r0) = (dot(&x2, &x1), dot(&x2, &x0));
        let det = g11 * g00 - g10 * g10;
        let est = if det > 1e-8 * g11 * g00 {
            let alpha = (r1 * g00 - r0 * g10) / det;
            let beta = (g11 * r0 - g10 * r1) / det;
            let disc = Complex::new(alpha * alpha + 4.0 * beta, 0.0).sqrt();
            let a = Complex::new(alpha, 0.0);
            ((a + disc) / 2.0).norm().max(((a - disc) / 2.0).norm())
        } else if g11 > 0.0 {
            (dot(&x2, &x2) / g11).sqrt()
        } else {
            0.0
        };
        change = (est - prev).abs();
        if change < 1e-13 * est.max(1e-300) {
            return Ok((est, it));
        }
        prev = est;
        x0 = x2;
    }
    Err(Error::GapTooSmall { iterations: cap, change })
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = CounterRng::new(0x5eed);
    (0..n).map(|_| rng.next_f64() - 0.5).collect()
}

/// `|lambda_2|` from the deflated matrix.
///
/// For `p < 1` the spectrum of the discretization clusters below `1 - p`
/// and power iteration may stall; after the iteration cap the dense
/// spectrum of the deflated matrix is used instead.
pub fn spectral_gap(m: &OperatorMatrix, lead: &DensityResult) -> Result<f64> {
    let k = deflate(m, lead);
    match dominant_modulus(|x| (&k * DVector::from_column_slice(x)).as_slice().to_vec(), start_vector(m.grid.len())) {
        Ok((modulus, _)) => Ok(modulus),
        Err(Error::GapTooSmall { .. }) => Ok(k.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)),
        Err(e) => Err(e),
    }
}

/// All eigenvalues, largest modulus first.
pub fn full_spectrum(m: &OperatorMatrix) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.matrix.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev
}

/// Invariant density of `L_p` with `|lambda_2|` and residuals.
pub fn density(p: f64, degree: usize, policy: &TailPolicy) -> Result<DensityResult> {
    if p == 0.0 {
        return Err(Error::SigmaFinite);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p = {p} is not a probability")));
    }
    let grid = Arc::new(CollocationGrid::new(degree)?);
    let m = build_matrix(p, grid, policy)?;
    let mut lead = leading_pair(&m)?;
    lead.lambda2 = Some(spectral_gap(&m, &lead)?);
    Ok(lead)
}

/// Ulam discretization of `L_p` on `cells` equal intervals.
///
/// Row `i` holds the Lebesgue proportions of cell `i` mapped into each
/// cell; the Renyi rows are the Gauss rows of the mirrored cell. Branches
/// lying entirely inside a cell are summed in closed form with digamma.
pub struct UlamMatrix {
    cells: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl UlamMatrix {
    pub fn gauss(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Domain("Ulam needs at least 2 cells".into()));
        }
        let m = cells as f64;
        let rows = (0..cells)
            .into_par_iter()
            .map(|i| {
                let c = i as f64 / m;
                let d = (i + 1) as f64 / m;
                let mut row = vec![0.0; cells];
                let mut touched: Vec<usize> = Vec::new();
                let mut add = |row: &mut Vec<f64>, j: usize, v: f64| {
                    if row[j] == 0.0 {
                        touched.push(j);
                    }
                    row[j] += v;
                };
                // branch n covers (1/(n+1), 1/n]
                let n_hi = if c > 0.0 { (1.0 / c).floor() as u64 } else { u64::MAX };
                let n_lo = ((1.0 / d).floor() as u64).max(1);
                let mut partial = |row: &mut Vec<f64>, n: u64| {
                    let nf = n as f64;
                    let lo = c.max(1.0 / (nf + 1.0));
                    let hi = d.min(1.0 / nf);
                    if hi <= lo {
                        return;
                    }
                    // x = 1/(n+y): y ranges over [1/hi - n, 1/lo - n]
                    let y0 = (1.0 / hi - nf).max(0.0);
                    let y1 = (1.0 / lo - nf).min(1.0);
                    let j0 = ((y0 * m).floor() as usize).min(cells - 1);
                    let j1 = ((y1 * m).ceil() as usize).min(cells);
                    for j in j0..j1 {
                        let a = (j as f64 / m).max(y0);
                        let b = ((j + 1) as f64 / m).min(y1);
                        if b > a {
                            add(row, j, 1.0 / (nf + a) - 1.0 / (nf + b));
                        }
                    }
                };
                if n_hi == u64::MAX || n_hi - n_lo > 4 {
                    // partial branches at both ends, complete ones in between
                    let first_full = n_lo + 1;
                    partial(&mut row, n_lo);
                    let last_full = if c > 0.0 {
                        partial(&mut row, n_hi);
                        n_hi - 1
                    } else {
                        u64::MAX
                    };
                    if last_full >= first_full {
                        let f0 = first_full as f64;
                        for j in 0..cells {
                            let a = j as f64 / m;
                            let b = (j + 1) as f64 / m;
                            let v = if last_full == u64::MAX {
                                digamma(f0 + b) - digamma(f0 + a)
                            } else {
                                let l1 = last_full as f64 + 1.0;
                                (digamma(f0 + b) - digamma(f0 + a)) - (digamma(l1 + b) - digamma(l1 + a))
                            };
                            add(&mut row, j, v);
                        }
                    }
                } else {
                    for n in n_lo..=n_hi {
                        partial(&mut row, n);
                    }
                }
                touched.sort_unstable();
                touched.into_iter().map(|j| (j, row[j] * m)).collect::<Vec<_>>()
            })
            .collect();
        Ok(Self { cells, rows })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Left action `x -> x P_p` on cell densities, with
    /// `P_p = p P_G + (1-p) P_R` and `P_R` the mirrored `P_G`.
    pub fn left_apply(&self, p: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells];
        for (i, &xi) in x.iter().enumerate() {
            let g = p * xi;
            let r = (1.0 - p) * x[self.cells - 1 - i];
            for &(j, v) in &self.rows[i] {
                out[j] += (g + r) * v;
            }
        }
        out
    }
}

/// `|lambda_2|` of the Ulam matrix, iterating on zero-sum vectors.
pub fn ulam_subdominant(p: f64, cells: usize) -> Result<f64> {
    let u = UlamMatrix::gauss(cells)?;
    let project = |v: &mut Vec<f64>| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let mut start = start_vector(cells);
    project(&mut start);
    let (modulus, _) = dominant_modulus(
        |x| {
            let mut y = u.left_apply(p, x);
            project(&mut y);
            y
        },
        start,
    )?;
    Ok(modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn gauss_density(x: f64) -> f64 {
        1.0 / ((1.0 + x) * LN_2)
    }

    #[test]
    fn grid_invariants() {
        let g = CollocationGrid::new(16).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[16], 1.0);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!((g.integration_weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(CollocationGrid::new(3).is_err());
    }

    #[test]
    fn interpolant_derivatives_exact_for_cubic() {
        let g = Arc::new(CollocationGrid::affine(8).unwrap());
        let f = ChebInterpolant::sample(g, &Callable(|x: f64| x * x * x - 2.0 * x));
        assert!((f.derivative(0.3, 1) - (3.0 * 0.09 - 2.0)).abs() < 1e-12);
        assert!((f.derivative(0.3, 2) - 1.8).abs() < 1e-10);
        assert!((f.derivative(0.7, 3) - 6.0).abs() < 1e-8);
    }

    #[test]
    fn mapped_interpolant_derivatives() {
        let g = Arc::new(CollocationGrid::new(40).unwrap());
        let f = ChebInterpolant::sample(g.clone(), &Callable(gauss_density));
        for x in [0.01f64, 0.3, 0.9] {
            let d1 = -1.0 / ((1.0 + x).powi(2) * LN_2);
            let d3 = -6.0 / ((1.0 + x).powi(4) * LN_2);
            assert!((f.derivative(x, 1) - d1).abs() < 1e-9, "{x}");
            assert!((f.derivative(x, 3) - d3).abs() < 1e-5, "{x}");
        }
        let ones = vec![1.0; g.len()];
        assert!((g.integrate(&ones) - 1.0).abs() < 1e-14);
        let sq: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        assert!((g.integrate(&sq) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matrix_examples() {
        let pol = TailPolicy::default();
        let g = Arc::new(CollocationGrid::new(32).unwrap());
        let m = build_matrix(1.0, g.clone(), &pol).unwrap();
        let h: Vec<f64> = g.nodes().iter().map(|&x| gauss_density(x)).collect();
        let image = m.apply(&h);
        assert!(image.iter().zip(&h).all(|(a, b)| (a - b).abs() < 1e-8));
        let ones = m.apply(&vec![1.0; g.len()]);
        assert!((ones[0] - PI * PI / 6.0).abs() < 1e-10);
        assert!(m.markov_defect().unwrap() < 1e-12);
    }

    #[test]
    fn gauss_density_and_gap() {
        let r = density(1.0, 32, &TailPolicy::default()).unwrap();
        assert!((r.lambda1 - 1.0).abs() < 1e-9);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((r.eval(x) - gauss_density(x)).abs() < 1e-8);
        }
        let gap = r.lambda2.unwrap();
        assert!((gap - 0.303_663_002_9).abs() < 1e-6, "{gap}");
    }

    #[test]
    fn gap_matches_full_spectrum() {
        let pol = TailPolicy::default();
        let m = build_matrix(0.9, Arc::new(CollocationGrid::new(24).unwrap()), &pol).unwrap();
        let lead = leading_pair(&m).unwrap();
        let gap = spectral_gap(&m, &lead).unwrap();
        let ev = full_spectrum(&m);
        assert!((ev[0].re - 1.0).abs() < 1e-9);
        assert!((ev[1].norm() - gap).abs() < 1e-9, "{} {gap}", ev[1]);
        // below p = 1/2 the subdominant moduli cluster at 1 - p
        let m = build_matrix(0.3, Arc::new(CollocationGrid::new(24).unwrap()), &pol).unwrap();
        let lead = leading_pair(&m).unwrap();
        let gap = spectral_gap(&m, &lead).unwrap();
        assert!((gap - 0.7).abs() < 1e-3 && (full_spectrum(&m)[1].norm() - gap).abs() < 1e-3);
        let k = deflate(&m, &lead);
        let hv = DVector::from_column_slice(lead.density.values());
        assert!((k * hv).amax() < 1e-10);
    }

    #[test]
    fn renyi_refused() {
        assert_eq!(density(0.0, 16, &TailPolicy::default()).unwrap_err(), Error::SigmaFinite);
    }

    #[test]
    fn ulam_rows_stochastic() {
        let u = UlamMatrix::gauss(500).unwrap();
        for i in 0..500 {
            let s: f64 = u.row(i).iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-10, "row {i} sums to {s}");
        }
    }
}
