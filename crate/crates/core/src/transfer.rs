//! Pointwise evaluation of the transfer operators
//!
//! ```text
//! L_p f(x) = sum_{n>=1} [ p f(1/(n+x)) + (1-p) f(1 - 1/(n+x)) ] / (n+x)^2
//! ```
//!
//! and its Gauss (`p = 1`) and Renyi (`p = 0`) parts, together with
//! Markov and invariance residuals.
//!
//! The series is summed explicitly for `n <= N` and the remainder
//! `sum_{n>N} g(n)` is replaced by its Euler-Maclaurin expansion about
//! `a = N + 1`:
//!
//! ```text
//! int_a^inf g + g(a)/2 - g'(a)/12 + g'''(a)/720
//! ```
//!
//! With `u = 1/(t+x)` the integral is `int_0^u f` (Gauss side) or
//! `int_{1-u}^1 f` (Renyi side), and the derivatives of
//! `g(t) = u^2 F(u)` are expressed through `F, F', F'', F'''` at `u`.
//! Every evaluation is therefore a fixed linear combination of values and
//! derivatives of `f`, which is what [`Stencil`] records; the same stencil
//! drives both pointwise application and matrix assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_integrate, ClenshawCurtis, GaussLegendre};
use crate::special::{digamma, hurwitz_zeta};

/// A bounded real function on [0, 1].
pub trait UnitFunction: Sync {
    fn eval(&self, x: f64) -> f64;

    /// `order`-th derivative. The default uses finite differences on a
    /// stencil kept inside [0, 1].
    fn derivative(&self, x: f64, order: usize) -> f64 {
        if order == 0 {
            return self.eval(x);
        }
        finite_difference(|t| self.eval(t), x, order)
    }
}

/// Wraps a closure as a [`UnitFunction`].
#[derive(Clone, Copy)]
pub struct Callable<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> UnitFunction for Callable<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl<T: UnitFunction + ?Sized> UnitFunction for &T {
    fn eval(&self, x: f64) -> f64 {
        (**self).eval(x)
    }

    fn derivative(&self, x: f64, order: usize) -> f64 {
        (**self).derivative(x, order)
    }
}

const FD_STEPS: [f64; 4] = [0.0, 2e-5, 2e-4, 2e-3];

/// Finite-difference derivative with `order + 3` points spaced by a fixed
/// step, shifted to stay inside [0, 1].
pub fn finite_difference<F: Fn(f64) -> f64>(f: F, x: f64, order: usize) -> f64 {
    assert!((1..=3).contains(&order), "finite differences support orders 1..=3");
    let h = FD_STEPS[order];
    let npts = order + 3;
    let half = (npts - 1) as f64 / 2.0;
    let mut lo = x - half * h;
    let hi = x + half * h;
    if lo < 0.0 {
        lo = 0.0;
    } else if hi > 1.0 {
        lo = 1.0 - 2.0 * half * h;
    }
    let pts: Vec<f64> = (0..npts).map(|k| lo + k as f64 * h).collect();
    let w = fornberg_weights(x, &pts, order);
    pts.iter().zip(&w).map(|(&t, &c)| c * f(t)).sum()
}

/// Fornberg's recursion: weights for the `m`-th derivative at `z` from
/// values at `xs`.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Truncation of the branch series and the order of the Euler-Maclaurin
/// correction (0: integral and half term, 1: adds the `g'` term, 2: adds
/// the `g'''` term).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPolicy {
    pub n: usize,
    pub order: u8,
    pub tol: f64,
}

impl Default for TailPolicy {
    fn default() -> Self {
        Self { n: 64, order: 2, tol: 1e-10 }
    }
}

impl TailPolicy {
    pub fn new(n: usize, order: u8, tol: f64) -> Result<Self> {
        let policy = Self { n, order, tol };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("tail policy needs N >= 2, got {}", self.n)));
        }
        if self.order > 2 {
            return Err(Error::Domain(format!("tail order must be 0, 1 or 2, got {}", self.order)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Domain(format!("tail tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Which branches enter a sum: Gauss branches `n >= gauss_from` with
/// coefficient `gauss`, Renyi branches `n >= renyi_from` with coefficient
/// `renyi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSum {
    pub gauss: f64,
    pub renyi: f64,
    pub gauss_from: u64,
    pub renyi_from: u64,
}

impl BranchSum {
    pub fn full(p: f64) -> Self {
        Self { gauss: p, renyi: 1.0 - p, gauss_from: 1, renyi_from: 1 }
    }
}

/// One term `weight * f^{(order)}(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub y: f64,
    pub order: usize,
    pub weight: f64,
}

/// A linear functional `f -> sum weight * f^{(order)}(y)` approximating a
/// branch sum at one point, plus taps whose absolute sum estimates the
/// neglected Euler-Maclaurin term.
#[derive(Debug, Clone, Default)]
pub struct Stencil {
    pub taps: Vec<Tap>,
    pub estimate: Vec<Tap>,
}

const TAIL_GAUSS_POINTS: usize = 12;
/// Points for `int_0^u f`, integrated in `t = v^{1/3}` so that functions
/// interpolated in `x^{1/3}` near 0 stay resolved.
const TAIL_ORIGIN_POINTS: usize = 40;

impl Stencil {
    pub fn new(sum: BranchSum, x: f64, policy: &TailPolicy) -> Self {
        let mut stencil = Stencil::default();
        let near_one = GaussLegendre::new(TAIL_GAUSS_POINTS);
        let near_zero = GaussLegendre::new(TAIL_ORIGIN_POINTS);
        for (coef, from, renyi) in [(sum.gauss, sum.gauss_from, false), (sum.renyi, sum.renyi_from, true)] {
            if coef == 0.0 {
                continue;
            }
            let rule = if renyi { &near_one } else { &near_zero };
            stencil.push_tail(coef, x, policy, renyi, rule);
            for n in (from..=policy.n as u64).rev() {
                let u = 1.0 / (n as f64 + x);
                let y = if renyi { 1.0 - u } else { u };
                stencil.taps.push(Tap { y, order: 0, weight: coef * u * u });
            }
        }
        stencil
    }

    fn push_tail(&mut self, coef: f64, x: f64, policy: &TailPolicy, renyi: bool, rule: &GaussLegendre) {
        let u = 1.0 / (policy.n as f64 + 1.0 + x);
        // F(u) = f(u) (Gauss) or f(1 - u) (Renyi); F^{(k)} = (+-1)^k f^{(k)}
        let at = if renyi { 1.0 - u } else { u };
        let sign = |k: usize| if renyi && k % 2 == 1 { -1.0 } else { 1.0 };
        if renyi {
            for (y, w) in rule.mapped(1.0 - u, 1.0) {
                self.taps.push(Tap { y, order: 0, weight: coef * w });
            }
        } else {
            for (t, w) in rule.mapped(0.0, u.cbrt()) {
                self.taps.push(Tap { y: t * t * t, order: 0, weight: coef * w * 3.0 * t * t });
            }
        }
        let push = |taps: &mut Vec<Tap>, k: usize, c: f64| {
            taps.push(Tap { y: at, order: k, weight: coef * sign(k) * c });
        };
        let u2 = u * u;
        // g(a)/2
        push(&mut self.taps, 0, 0.5 * u2);
        // -g'(a)/12 with g' = -(2u^3 F + u^4 F')
        if policy.order >= 1 {
            push(&mut self.taps, 0, 2.0 * u2 * u / 12.0);
            push(&mut self.taps, 1, u2 * u2 / 12.0);
        }
        // g'''(a)/720 with g''' = -(24u^5 F + 36u^6 F' + 12u^7 F'' + u^8 F''')
        if policy.order >= 2 {
            let u5 = u2 * u2 * u;
            push(&mut self.taps, 0, -24.0 * u5 / 720.0);
            push(&mut self.taps, 1, -36.0 * u5 * u / 720.0);
            push(&mut self.taps, 2, -12.0 * u5 * u2 / 720.0);
            push(&mut self.taps, 3, -u5 * u2 * u / 720.0);
        }
        // leading part of the first omitted term: |B_{2j}| u^{2j+1} (|F| + |F'|)
        let j = policy.order as i32 + 1;
        let bern = crate::special::BERNOULLI_EVEN[j as usize - 1].abs();
        let mag = bern * u.powi(2 * j + 1);
        push(&mut self.estimate, 0, mag);
        push(&mut self.estimate, 1, mag);
    }

    pub fn apply<F: UnitFunction + ?Sized>(&self, f: &F) -> f64 {
        self.taps.iter().map(|t| t.weight * f.derivative(t.y, t.order)).sum()
    }

    pub fn error_estimate<F: UnitFunction + ?Sized>(&self, f: &F) -> f64 {
        self.estimate.iter().map(|t| (t.weight * f.derivative(t.y, t.order)).abs()).sum()
    }
}

fn check_point(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} is not in [0, 1]")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("p = {p} is not a probability")))
    }
}

/// Evaluates a branch sum at `x`, failing if the tail estimate exceeds the
/// policy tolerance.
pub fn apply_branch_sum<F: UnitFunction + ?Sized>(sum: BranchSum, f: &F, x: f64, policy: &TailPolicy) -> Result<f64> {
    policy.validate()?;
    check_point(x)?;
    let stencil = Stencil::new(sum, x, policy);
    let estimate = stencil.error_estimate(f);
    if estimate > policy.tol {
        return Err(Error::Truncation { estimate, tol: policy.tol });
    }
    Ok(stencil.apply(f))
}

/// `L_p f(x)`.
pub fn apply_lp<F: UnitFunction + ?Sized>(p: f64, f: &F, x: f64, policy: &TailPolicy) -> Result<f64> {
    check_p(p)?;
    apply_branch_sum(BranchSum::full(p), f, x, policy)
}

/// Gauss transfer operator `L_G f(x)`.
pub fn apply_lg<F: UnitFunction + ?Sized>(f: &F, x: f64, policy: &TailPolicy) -> Result<f64> {
    apply_lp(1.0, f, x, policy)
}

/// Renyi transfer operator `L_R f(x)`.
pub fn apply_lr<F: UnitFunction + ?Sized>(f: &F, x: f64, policy: &TailPolicy) -> Result<f64> {
    apply_lp(0.0, f, x, policy)
}

/// Result of summing `L^m f` over explicitly enumerated branch words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IteratedValue {
    pub value: f64,
    /// Upper bound on the total weight of the words that were dropped.
    pub neglected_mass: f64,
    pub words: u64,
}

const MAX_WORDS: f64 = 2e8;

/// `L_p^m f(x) = sum_w a_w(x) f(b_w(x))` over all words of length `m` with
/// every `n_i <= n_trunc`, built from exact branch matrices.
pub fn apply_iterated<F: UnitFunction + ?Sized>(
    p: f64,
    f: &F,
    x: f64,
    m: usize,
    n_trunc: u64,
) -> Result<IteratedValue> {
    use crate::branch_algebra::{branch_matrix, BranchIndex, MoebiusMatrix};
    check_p(p)?;
    check_point(x)?;
    if m == 0 {
        return Err(Error::Domain("iteration count m must be >= 1".into()));
    }
    if n_trunc == 0 {
        return Err(Error::Domain("n_trunc must be >= 1".into()));
    }
    let count = (2.0 * n_trunc as f64).powi(m as i32);
    if count > MAX_WORDS {
        return Err(Error::EnumerationTooLarge { words: count, limit: MAX_WORDS });
    }
    let mut letters = Vec::new();
    for n in 1..=n_trunc {
        for idx in [BranchIndex::gauss(n), BranchIndex::renyi(n)] {
            let prob = idx.probability(p);
            if prob > 0.0 {
                letters.push((branch_matrix(idx)?, prob));
            }
        }
    }

    fn walk<F: UnitFunction + ?Sized>(
        prefix: &MoebiusMatrix,
        prob: f64,
        depth: usize,
        letters: &[(MoebiusMatrix, f64)],
        f: &F,
        x: f64,
        acc: &mut (f64, u64),
    ) {
        if depth == 0 {
            acc.0 += prob * prefix.abs_derivative(x) * f.eval(prefix.eval(x));
            acc.1 += 1;
            return;
        }
        for (mat, q) in letters {
            walk(&(prefix * mat), prob * q, depth - 1, letters, f, x, acc);
        }
    }

    let mut acc = (0.0, 0u64);
    walk(&MoebiusMatrix::identity(), 1.0, m, &letters, f, x, &mut acc);

    // each a_w(x) <= P(w) prod 1/n_i^2, so the dropped weight is at most
    // zeta(2)^m - H_N(2)^m
    let full = std::f64::consts::PI.powi(2) / 6.0;
    let tail = hurwitz_zeta(2.0, n_trunc as f64 + 1.0);
    let kept = full - tail;
    let neglected_mass = tail * (0..m).map(|k| full.powi((m - 1 - k) as i32) * kept.powi(k as i32)).sum::<f64>();
    Ok(IteratedValue { value: acc.0, neglected_mass, words: acc.1 })
}

/// `|int L_p f - int f|` with a Clenshaw-Curtis rule of `quad_nodes` nodes.
pub fn markov_residual<F: UnitFunction + ?Sized>(p: f64, f: &F, quad_nodes: usize, policy: &TailPolicy) -> Result<f64> {
    check_p(p)?;
    if quad_nodes < 2 {
        return Err(Error::Domain("need at least 2 quadrature nodes".into()));
    }
    let rule = ClenshawCurtis::new(quad_nodes - 1);
    let mut image = 0.0;
    let mut base = 0.0;
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        image += w * apply_lp(p, f, x, policy)?;
        base += w * f.eval(x);
    }
    Ok((image - base).abs())
}

/// Pieces of the invariance check `mu(A) = p mu(T_0^{-1} A) + (1-p) mu(T_1^{-1} A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub measure: f64,
    pub gauss_preimage: f64,
    pub renyi_preimage: f64,
    pub residual: f64,
    /// Estimated size of the neglected remainder of the tail expansions.
    pub tail_bound: f64,
}

const INVARIANCE_BRANCHES: u64 = 2000;

/// `sum_{n>N} (1/(n+a)^k - 1/(n+b)^k)`.
fn power_tail_difference(k: u32, big_n: u64, a: f64, b: f64) -> f64 {
    let start = big_n as f64 + 1.0;
    if k == 1 {
        digamma(start + b) - digamma(start + a)
    } else {
        hurwitz_zeta(k as f64, start + a) - hurwitz_zeta(k as f64, start + b)
    }
}

/// `sum_{n>N} [(1/(n+a) - c)^K - (1/(n+b) - c)^K]`, expanded binomially.
fn shifted_tail_difference(big_k: u32, c: f64, big_n: u64, a: f64, b: f64) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 1..=big_k {
        binom = binom * (big_k - j + 1) as f64 / j as f64;
        total += binom * (-c).powi((big_k - j) as i32) * power_tail_difference(j, big_n, a, b);
    }
    total
}

/// Invariance residual on the interval `[a, b]`.
///
/// Preimages are `T_0^{-1}[a,b] = U_n [1/(b+n), 1/(a+n)]` and
/// `T_1^{-1}[a,b] = U_n [1-1/(a+n), 1-1/(b+n)]`. The first branches are
/// integrated adaptively. The remaining pieces lie within `1/(N+1)` of an
/// endpoint, where `h` is replaced by its quadratic Taylor polynomial at
/// `c = 1/(N+1)` (resp. `1 - c`) and the sums are closed with
/// digamma/Hurwitz zeta values.
pub fn invariance_residual<F: UnitFunction + ?Sized>(h: &F, p: f64, a: f64, b: f64) -> Result<InvarianceReport> {
    check_p(p)?;
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    if a < 0.0 || b > 1.0 {
        return Err(Error::Domain(format!("interval [{a}, {b}] is not inside [0, 1]")));
    }
    let tol = 1e-14;
    let integrate = |lo: f64, hi: f64| adaptive_integrate(|t| h.eval(t), lo, hi, tol).0;
    let measure = integrate(a, b);
    let big_n = INVARIANCE_BRANCHES;
    let c = 1.0 / (big_n as f64 + 1.0);

    let side = |renyi: bool| -> (f64, f64) {
        let mut explicit = 0.0;
        for n in (1..=big_n).rev() {
            let hi_u = 1.0 / (a + n as f64);
            let lo_u = 1.0 / (b + n as f64);
            explicit += if renyi { integrate(1.0 - hi_u, 1.0 - lo_u) } else { integrate(lo_u, hi_u) };
        }
        // with v = 1 - w on the Renyi side, h(1 - w) has odd derivatives negated
        let at = if renyi { 1.0 - c } else { c };
        let s = if renyi { -1.0 } else { 1.0 };
        let (h0, h1, h2, h3) = (h.eval(at), h.derivative(at, 1), h.derivative(at, 2), h.derivative(at, 3));
        let piece = |k: u32| shifted_tail_difference(k, c, big_n, a, b) / k as f64;
        let tail = h0 * piece(1) + s * h1 * piece(2) + h2 * piece(3) / 2.0;
        let bound = 2.0 * h3.abs() * piece(4).abs() / 6.0;
        (explicit + tail, bound)
    };

    let (gauss_preimage, gauss_bound) = if p > 0.0 { side(false) } else { (0.0, 0.0) };
    let (renyi_preimage, renyi_bound) = if p < 1.0 { side(true) } else { (0.0, 0.0) };
    let residual = (measure - p * gauss_preimage - (1.0 - p) * renyi_preimage).abs();
    Ok(InvarianceReport {
        measure,
        gauss_preimage,
        renyi_preimage,
        residual,
        tail_bound: p * gauss_bound + (1.0 - p) * renyi_bound,
    })
}
