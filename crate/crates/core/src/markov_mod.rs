//! Sub-Markov splits `L_p = A_p + B_p`, the resolvent `J = (I - B)^{-1}`
//! and the modified operator `A J`, whose fixed points lift to fixed points
//! of `L_p` through `J`.
//!
//! Two splits are supported. [`SplitKind::Banach`] puts both `n = 1`
//! branches into `B`; [`SplitKind::Hardy`] puts only the Renyi `n = 1`
//! branch there, for which
//!
//! ```text
//! B^m f(x) = (1-p)^m / (1+mx)^2 f(x / (1+mx)).
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{
    build_branch_matrix, density, leading_pair, mass_row, ChebInterpolant, CollocationGrid, OperatorMatrix, OperatorTag,
};
use crate::error::{Error, Result};
use crate::transfer::{apply_branch_sum, BranchSum, TailPolicy, UnitFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitKind {
    Banach,
    Hardy,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Banach => "banach",
            SplitKind::Hardy => "hardy",
        }
    }

    /// Branches kept in `A`.
    pub fn a_sum(self, p: f64) -> BranchSum {
        match self {
            SplitKind::Banach => BranchSum { gauss: p, renyi: 1.0 - p, gauss_from: 2, renyi_from: 2 },
            SplitKind::Hardy => BranchSum { gauss: p, renyi: 1.0 - p, gauss_from: 1, renyi_from: 2 },
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("p = {p} is not a probability")))
    }
}

/// `B_p f(x)`.
pub fn apply_b<F: UnitFunction + ?Sized>(split: SplitKind, p: f64, f: &F, x: f64) -> f64 {
    let w = 1.0 / ((1.0 + x) * (1.0 + x));
    let renyi = (1.0 - p) * w * f.eval(x / (1.0 + x));
    match split {
        SplitKind::Hardy => renyi,
        SplitKind::Banach => p * w * f.eval(1.0 / (1.0 + x)) + renyi,
    }
}

/// `A_p f(x)`.
pub fn apply_a<F: UnitFunction + ?Sized>(split: SplitKind, p: f64, f: &F, x: f64, policy: &TailPolicy) -> Result<f64> {
    check_p(p)?;
    apply_branch_sum(split.a_sum(p), f, x, policy)
}

struct Composed<'a, F: ?Sized> {
    split: SplitKind,
    p: f64,
    depth: usize,
    f: &'a F,
}

impl<F: UnitFunction + ?Sized> UnitFunction for Composed<'_, F> {
    fn eval(&self, x: f64) -> f64 {
        if self.depth == 0 {
            self.f.eval(x)
        } else {
            apply_b(self.split, self.p, &Composed { depth: self.depth - 1, ..*self }, x)
        }
    }
}

/// `m`-fold `B` by repeated application.
pub fn b_power_iterated<F: UnitFunction + ?Sized>(split: SplitKind, p: f64, m: usize, f: &F, x: f64) -> f64 {
    Composed { split, p, depth: m, f }.eval(x)
}

/// `B^m f(x)`: closed form for the Hardy split, iteration for the Banach split.
pub fn b_power<F: UnitFunction + ?Sized>(split: SplitKind, p: f64, m: usize, f: &F, x: f64) -> Result<f64> {
    check_p(p)?;
    if m == 0 {
        return Err(Error::Domain("power must be >= 1".into()));
    }
    Ok(match split {
        SplitKind::Hardy => {
            let d = 1.0 + m as f64 * x;
            (1.0 - p).powi(m as i32) / (d * d) * f.eval(x / d)
        }
        SplitKind::Banach => b_power_iterated(split, p, m, f, x),
    })
}

/// Sup of the four coefficient products of `B^2` for the Banach split.
pub fn b2_coefficient_sum(p: f64) -> f64 {
    let q = 1.0 - p;
    p * p / 4.0 + p * q / 4.0 + p * q + q * q
}

/// `1 - 3p/4`, the contraction constant of `B^2` for the Banach split.
pub fn b2_bound(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1], got {p}")));
    }
    let bound = 1.0 - 0.75 * p;
    let sum = b2_coefficient_sum(p);
    if (sum - bound).abs() > 1e-14 {
        return Err(Error::Consistency(format!("B^2 coefficients sum to {sum}, expected {bound}")));
    }
    Ok(bound)
}

/// Hardy-split bound `(1-p)^m sqrt(m+1)` on `||B^m||`.
pub fn hardy_b_power_bound(p: f64, m: usize) -> f64 {
    (1.0 - p).powi(m as i32) * ((m + 1) as f64).sqrt()
}

/// Collocation matrix of `B`.
pub fn build_b_matrix(
    split: SplitKind,
    p: f64,
    grid: Arc<CollocationGrid>,
    policy: &TailPolicy,
) -> Result<OperatorMatrix> {
    check_p(p)?;
    let n = grid.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, &x) in grid.nodes().iter().enumerate() {
        let w = 1.0 / ((1.0 + x) * (1.0 + x));
        let mut terms = vec![((1.0 - p) * w, x / (1.0 + x))];
        if split == SplitKind::Banach {
            terms.push((p * w, 1.0 / (1.0 + x)));
        }
        for (c, y) in terms {
            if c == 0.0 {
                continue;
            }
            for (j, l) in grid.cardinal(y).into_iter().enumerate() {
                matrix[(i, j)] += c * l;
            }
        }
    }
    Ok(OperatorMatrix { matrix, tag: OperatorTag::B, p, policy: *policy, grid, mass_row: None })
}

/// Collocation matrix of `B^m` from the Hardy closed form.
pub fn build_hardy_b_power(
    p: f64,
    m: usize,
    grid: Arc<CollocationGrid>,
    policy: &TailPolicy,
) -> Result<OperatorMatrix> {
    check_p(p)?;
    let n = grid.len();
    let scale = (1.0 - p).powi(m as i32);
    let mut matrix = DMatrix::zeros(n, n);
    for (i, &x) in grid.nodes().iter().enumerate() {
        let d = 1.0 + m as f64 * x;
        for (j, l) in grid.cardinal(x / d).into_iter().enumerate() {
            matrix[(i, j)] = scale / (d * d) * l;
        }
    }
    Ok(OperatorMatrix { matrix, tag: OperatorTag::B, p, policy: *policy, grid, mass_row: None })
}

/// Sup norm of a positive operator from its matrix, `max_i (M 1)_i`.
pub fn positive_sup_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.sum()).fold(0.0, f64::max)
}

/// Neumann partial sums `sum_{m<M} B^m` compared with `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannDiagnostic {
    pub terms: usize,
    /// `max |sum_{m<M} B^m - J|`.
    pub difference: f64,
    /// Per-step decay of the partial-sum error, measured between `M/4`
    /// and `M/2` terms.
    pub decay_ratio: f64,
    /// Theoretical rate the decay is compared against.
    pub reference_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Resolvent {
    pub split: SplitKind,
    pub j: OperatorMatrix,
    pub b: OperatorMatrix,
    /// `max(|J(I-B) - I|, |(I-B)J - I|)`.
    pub residual: f64,
    pub condition: f64,
    pub neumann: NeumannDiagnostic,
}

const HARDY_MIN_P: f64 = 0.01;

fn neumann_terms(split: SplitKind, p: f64) -> usize {
    let mut m = 1;
    loop {
        let small = match split {
            SplitKind::Banach => (1.0 - 0.75 * p).powf(m as f64 / 2.0),
            SplitKind::Hardy => hardy_b_power_bound(p, m),
        };
        if small < 1e-12 || m >= 100_000 {
            return m;
        }
        m += 1;
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| f64::max(a, v.abs()))
}

/// `J = (I - B)^{-1}` by LU with partial pivoting, with Neumann sums as a
/// diagnostic.
pub fn resolvent_j(split: SplitKind, p: f64, grid: Arc<CollocationGrid>, policy: &TailPolicy) -> Result<Resolvent> {
    check_p(p)?;
    if split == SplitKind::Hardy && p < HARDY_MIN_P {
        let condition = 1.0 / p.max(f64::MIN_POSITIVE);
        return Err(Error::Conditioning { condition });
    }
    let b = build_b_matrix(split, p, grid.clone(), policy)?;
    let n = grid.len();
    let ident = DMatrix::<f64>::identity(n, n);
    let i_minus_b = &ident - &b.matrix;
    let lu = i_minus_b.clone().lu();
    let j = lu.solve(&ident).ok_or(Error::InvalidMatrix("I - B is singular"))?;
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let condition = norm1(&i_minus_b) * norm1(&j);
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::Conditioning { condition });
    }
    let residual = max_abs(&(&j * &i_minus_b - &ident)).max(max_abs(&(&i_minus_b * &j - &ident)));

    let terms = neumann_terms(split, p);
    let mut partial = DMatrix::<f64>::identity(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    let (q1, q2) = (terms / 4, terms / 2);
    let (mut e1, mut e2) = (f64::NAN, f64::NAN);
    for m in 1..terms {
        power = &power * &b.matrix;
        partial += &power;
        if m + 1 == q1 {
            e1 = max_abs(&(&partial - &j));
        }
        if m + 1 == q2 {
            e2 = max_abs(&(&partial - &j));
        }
    }
    let decay_ratio = if q2 > q1 && e1 > 0.0 { (e2 / e1).powf(1.0 / (q2 - q1) as f64) } else { 0.0 };
    let reference_ratio = match split {
        SplitKind::Banach => (1.0 - 0.75 * p).sqrt(),
        SplitKind::Hardy => (1.0 - p) * std::f64::consts::SQRT_2,
    };
    let neumann = NeumannDiagnostic { terms, difference: max_abs(&(&partial - &j)), decay_ratio, reference_ratio };
    let j = OperatorMatrix { matrix: j, tag: OperatorTag::J, p, policy: *policy, grid, mass_row: None };
    Ok(Resolvent { split, j, b, residual, condition, neumann })
}

#[derive(Debug, Clone)]
pub struct ModifiedOperator {
    pub lhat: OperatorMatrix,
    pub a: OperatorMatrix,
    pub resolvent: Resolvent,
}

impl ModifiedOperator {
    pub fn markov_residual(&self) -> f64 {
        self.lhat.markov_defect().unwrap_or(f64::INFINITY)
    }
}

/// `A J` on the grid. Its mass row is the refined mass row of `A` times `J`.
pub fn modified_operator(
    split: SplitKind,
    p: f64,
    grid: Arc<CollocationGrid>,
    policy: &TailPolicy,
) -> Result<ModifiedOperator> {
    let resolvent = resolvent_j(split, p, grid.clone(), policy)?;
    let a = build_branch_matrix(split.a_sum(p), grid.clone(), policy, OperatorTag::A, p)?;
    let matrix = &a.matrix * &resolvent.j.matrix;
    let mass = mass_row(split.a_sum(p), &grid, policy)?;
    let lifted_mass: DVector<f64> = resolvent.j.matrix.tr_mul(&mass);
    let lhat = OperatorMatrix { matrix, tag: OperatorTag::Lhat, p, policy: *policy, grid, mass_row: Some(lifted_mass) };
    Ok(ModifiedOperator { lhat, a, resolvent })
}

/// `h = J h_hat` normalized to unit integral.
pub fn lift_density(resolvent: &Resolvent, hat: &ChebInterpolant) -> Result<ChebInterpolant> {
    let grid = resolvent.j.grid.clone();
    let mut h = resolvent.j.apply(hat.values());
    let mass = grid.integrate(&h);
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Consistency(format!("lifted density has mass {mass}")));
    }
    h.iter_mut().for_each(|v| *v /= mass);
    if let Some(bad) = h.iter().find(|&&v| v < -1e-9) {
        return Err(Error::Consistency(format!("lifted density takes the value {bad} at a node")));
    }
    Ok(ChebInterpolant::new(grid, h))
}

/// Summary of the modification pipeline for one split and `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationReport {
    pub split: SplitKind,
    pub p: f64,
    pub degree: usize,
    pub b2_bound: Option<f64>,
    pub resolvent_residual: f64,
    pub condition: f64,
    pub markov_residual: f64,
    pub lambda1_hat: f64,
    /// Sup distance on 1001 points between the lifted and direct densities.
    pub lift_discrepancy: f64,
    /// `max_i |(L_p h)(x_i) - h(x_i)|` for the lifted `h`.
    pub lift_fixed_point_residual: f64,
    pub neumann: NeumannDiagnostic,
}

pub fn run_modification(split: SplitKind, p: f64, degree: usize, policy: &TailPolicy) -> Result<ModificationReport> {
    let grid = Arc::new(CollocationGrid::new(degree)?);
    let modified = modified_operator(split, p, grid.clone(), policy)?;
    let hat = leading_pair(&modified.lhat)?;
    let lifted = lift_density(&modified.resolvent, &hat.density)?;
    let direct = density(p, degree, policy)?;
    let lift_discrepancy =
        (0..=1000).map(|i| i as f64 / 1000.0).map(|x| (lifted.eval(x) - direct.eval(x)).abs()).fold(0.0, f64::max);
    let lp = crate::discretization::build_matrix(p, grid, policy)?;
    let image = lp.apply(lifted.values());
    let lift_fixed_point_residual = image.iter().zip(lifted.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ModificationReport {
        split,
        p,
        degree,
        b2_bound: if split == SplitKind::Banach { Some(b2_bound(p)?) } else { None },
        resolvent_residual: modified.resolvent.residual,
        condition: modified.resolvent.condition,
        markov_residual: modified.markov_residual(),
        lambda1_hat: hat.lambda1,
        lift_discrepancy,
        lift_fixed_point_residual,
        neumann: modified.resolvent.neumann.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{apply_lp, Callable};
    use std::f64::consts::PI;

    #[test]
    fn split_examples() {
        let one = Callable(|_| 1.0);
        let pol = TailPolicy::default();
        for p in [0.2, 0.5, 0.9] {
            assert!((apply_b(SplitKind::Hardy, p, &one, 0.0) - (1.0 - p)).abs() < 1e-15);
            let a = apply_a(SplitKind::Hardy, p, &one, 0.0, &pol).unwrap();
            assert!((a - (PI * PI / 6.0 - (1.0 - p))).abs() < 1e-12);
            assert!((apply_b(SplitKind::Banach, p, &one, 1.0) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn parts_add_to_full_operator() {
        let pol = TailPolicy::default();
        let mut rng = crate::dynamics::CounterRng::new(3);
        for _ in 0..100 {
            let (p, x, c) = (rng.next_f64(), rng.next_f64(), rng.next_f64());
            let f = Callable(move |t: f64| (c * t).exp() + t * t);
            let lp = apply_lp(p, &f, x, &pol).unwrap();
            for split in [SplitKind::Banach, SplitKind::Hardy] {
                let sum = apply_a(split, p, &f, x, &pol).unwrap() + apply_b(split, p, &f, x);
                assert!((sum - lp).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hardy_power_closed_form() {
        let one = Callable(|_| 1.0);
        assert!((b_power(SplitKind::Hardy, 0.0, 2, &one, 1.0).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        let f = Callable(|t: f64| (2.0 * t).cos() + t);
        for m in 1..=10 {
            for x in [0.0, 0.37, 1.0] {
                let closed = b_power(SplitKind::Hardy, 0.3, m, &f, x).unwrap();
                let iter = b_power_iterated(SplitKind::Hardy, 0.3, m, &f, x);
                assert!((closed - iter).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn banach_square_contracts() {
        assert_eq!(b2_bound(1.0).unwrap(), 0.25);
        assert_eq!(b2_bound(0.5).unwrap(), 0.625);
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert!((b2_coefficient_sum(p) - (1.0 - 0.75 * p)).abs() < 1e-14);
        }
        let one = Callable(|_| 1.0);
        for p in [0.1, 0.5, 1.0] {
            let sup = (0..=100)
                .map(|i| b_power(SplitKind::Banach, p, 2, &one, i as f64 / 100.0).unwrap())
                .fold(0.0, f64::max);
            assert!(sup <= b2_bound(p).unwrap() + 1e-15);
        }
    }

    #[test]
    fn resolvent_identity_and_neumann() {
        let pol = TailPolicy::default();
        let grid = Arc::new(CollocationGrid::new(24).unwrap());
        for split in [SplitKind::Banach, SplitKind::Hardy] {
            let r = resolvent_j(split, 0.5, grid.clone(), &pol).unwrap();
            assert!(r.residual < 1e-10);
            assert!(r.neumann.difference < 1e-10, "{:?}", r.neumann);
            assert!(r.neumann.decay_ratio <= r.neumann.reference_ratio + 1e-3, "{:?}", r.neumann);
        }
        assert!(matches!(resolvent_j(SplitKind::Hardy, 0.005, grid, &pol), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn hardy_power_norms() {
        let pol = TailPolicy::default();
        let grid = Arc::new(CollocationGrid::new(24).unwrap());
        let b = build_b_matrix(SplitKind::Hardy, 0.4, grid.clone(), &pol).unwrap();
        let mut power = b.matrix.clone();
        for m in 1..=10 {
            let closed = build_hardy_b_power(0.4, m, grid.clone(), &pol).unwrap();
            assert!(positive_sup_norm(&closed.matrix) <= hardy_b_power_bound(0.4, m) + 1e-15);
            assert!((positive_sup_norm(&power) - positive_sup_norm(&closed.matrix)).abs() < 1e-12);
            power = &power * &b.matrix;
        }
    }

    #[test]
    fn degenerate_hardy_split_is_gauss() {
        let pol = TailPolicy::default();
        let grid = Arc::new(CollocationGrid::new(16).unwrap());
        let m = modified_operator(SplitKind::Hardy, 1.0, grid.clone(), &pol).unwrap();
        let lg = crate::discretization::build_matrix(1.0, grid, &pol).unwrap();
        assert!(max_abs(&(&m.lhat.matrix - &lg.matrix)) < 1e-15);
    }
}
