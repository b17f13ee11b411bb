//! Bounds on the essential spectral radius of `L_p` acting on `C^k`,
//! the sums `V_p^{(t)}`, empirical `Q_m^{(k)}` values and Stirling numbers
//! of the second kind.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch_algebra::{branch_matrix, BranchIndex, MoebiusMatrix};
use crate::error::{Error, Result};
use crate::special::hurwitz_zeta;

/// Riemann zeta by a partial sum and Euler-Maclaurin tail
/// `N^{1-s}/(s-1) - N^{-s}/2 + s N^{-s-1}/12`, with `N` grown until the
/// next correction drops below `tol`.
pub fn zeta(s: f64, tol: f64) -> Result<f64> {
    if s.is_nan() || s <= 1.0 {
        return Err(Error::Domain(format!("zeta needs s > 1, got {s}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let next_term = |n: f64| s * (s + 1.0) * (s + 2.0) / 720.0 * n.powf(-s - 3.0);
    let mut n = 8.0f64;
    while next_term(n) > tol * 0.1 && n < 1e7 {
        n *= 2.0;
    }
    let big_n = n as u64;
    let partial: f64 = (1..big_n).rev().map(|k| (k as f64).powf(-s)).sum();
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s / 12.0 * n.powf(-s - 1.0) - next_term(n);
    Ok(partial + tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: f64,
    pub k: u32,
    pub zeta_value: f64,
    pub bound: f64,
    pub quasi_compact: bool,
}

/// `zeta(2k+2) - min(p, 1-p)`, an upper bound on `r_ess(L_p | C^k)`.
pub fn ess_radius_bound(p: f64, k: u32) -> Result<BoundReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1), got {p}")));
    }
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    let zeta_value = zeta(2.0 * k as f64 + 2.0, 1e-15)?;
    let bound = zeta_value - p.min(1.0 - p);
    Ok(BoundReport { p, k, zeta_value, bound, quasi_compact: bound < 1.0 })
}

/// Smallest `k >= 1` for which [`ess_radius_bound`] is below one.
pub fn min_quasicompact_k(p: f64) -> Result<u32> {
    for k in 1..=64 {
        if ess_radius_bound(p, k)?.quasi_compact {
            return Ok(k);
        }
    }
    Err(Error::Range(format!("no k <= 64 makes the bound < 1 for p = {p}")))
}

/// `V_p^{(t)}(n) = max(p,1-p)/n^t + min(p,1-p)/(n+1)^t`.
pub fn v_p(t: u32, n: u64, p: f64) -> f64 {
    let (hi, lo) = (p.max(1.0 - p), p.min(1.0 - p));
    let n = n as f64;
    hi * n.powi(-(t as i32)) + lo * (n + 1.0).powi(-(t as i32))
}

/// `sum_{n<=N} V_p^{(t)}(n)` and an upper bound on the rest from
/// `sum_{n>M} n^{-t} <= M^{1-t}/(t-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VSum {
    pub partial: f64,
    pub tail_bound: f64,
}

pub fn v_sum(t: u32, p: f64, big_n: u64) -> Result<VSum> {
    if t < 2 {
        return Err(Error::Domain(format!("t must be >= 2, got {t}")));
    }
    if big_n == 0 {
        return Err(Error::Domain("N must be >= 1".into()));
    }
    let partial = (1..=big_n).rev().map(|n| v_p(t, n, p)).sum();
    let (hi, lo) = (p.max(1.0 - p), p.min(1.0 - p));
    let tf = t as f64;
    let n = big_n as f64;
    let tail_bound = (hi * n.powf(1.0 - tf) + lo * (n + 1.0).powf(1.0 - tf)) / (tf - 1.0);
    Ok(VSum { partial, tail_bound })
}

/// Empirical `Q_m^{(k)}` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QReport {
    pub p: f64,
    pub k: u32,
    pub m: u32,
    pub n_trunc: u64,
    pub value: f64,
    pub argmax: f64,
    /// Bound on the weight of words with some `n_i > N` plus pruned words.
    pub dropped_mass: f64,
    pub words: u64,
}

pub const Q_GRID_POINTS: usize = 101;
const Q_PRUNE: f64 = 1e-16;
const Q_MAX_WORDS: f64 = 5e8;

struct Walker<'a> {
    letters: &'a [(MoebiusMatrix, f64, u64)],
    grid: &'a [f64],
    exponent: i32,
    zeta_t: f64,
}

#[derive(Default)]
struct Partial {
    sums: Vec<f64>,
    pruned: f64,
    words: u64,
}

impl Walker<'_> {
    fn walk(&self, prefix: &MoebiusMatrix, prob: f64, depth: u32, acc: &mut Partial) {
        let (_, _, c, d) = prefix.as_f64();
        if depth == 0 {
            for (s, &x) in acc.sums.iter_mut().zip(self.grid) {
                // word_weight * |b'|^k = P |b'|^{k+1}
                *s += prob * (c * x + d).powi(-self.exponent);
            }
            acc.words += 1;
            return;
        }
        let subtree = prob * d.powi(-self.exponent) * self.zeta_t.powi(depth as i32);
        if subtree < Q_PRUNE {
            acc.pruned += subtree;
            return;
        }
        for (mat, q, _) in self.letters {
            self.walk(&(prefix * mat), prob * q, depth - 1, acc);
        }
    }
}

/// `sup_x sum_w P(w) |b_w'(x)|^{k+1}` over words of length `m` with all
/// `n_i <= N`, sampled on a 101-point grid.
pub fn empirical_q(p: f64, k: u32, m: u32, n_trunc: u64) -> Result<QReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} is not a probability")));
    }
    if m == 0 || m > 4 {
        return Err(Error::Domain(format!("m must be in 1..=4, got {m}")));
    }
    if n_trunc == 0 {
        return Err(Error::Domain("N must be >= 1".into()));
    }
    let count = (2.0 * n_trunc as f64).powi(m as i32);
    if count > Q_MAX_WORDS {
        return Err(Error::EnumerationTooLarge { words: count, limit: Q_MAX_WORDS });
    }
    let t = 2 * k + 2;
    let mut letters = Vec::new();
    for n in 1..=n_trunc {
        for idx in [BranchIndex::gauss(n), BranchIndex::renyi(n)] {
            let q = idx.probability(p);
            if q > 0.0 {
                letters.push((branch_matrix(idx)?, q, n));
            }
        }
    }
    let grid: Vec<f64> = (0..Q_GRID_POINTS).map(|i| i as f64 / (Q_GRID_POINTS - 1) as f64).collect();
    let walker = Walker { letters: &letters, grid: &grid, exponent: t as i32, zeta_t: hurwitz_zeta(t as f64, 1.0) };

    let partials: Vec<Partial> = letters
        .par_iter()
        .map(|(mat, q, _)| {
            let mut acc = Partial { sums: vec![0.0; grid.len()], ..Default::default() };
            walker.walk(mat, *q, m - 1, &mut acc);
            acc
        })
        .collect();
    let mut sums = vec![0.0; grid.len()];
    let mut pruned = 0.0;
    let mut words = 0;
    for part in &partials {
        for (s, v) in sums.iter_mut().zip(&part.sums) {
            *s += v;
        }
        pruned += part.pruned;
        words += part.words;
    }
    let (imax, &value) = sums.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("grid is nonempty");
    let full = walker.zeta_t;
    let tail = hurwitz_zeta(t as f64, n_trunc as f64 + 1.0);
    let kept = full - tail;
    let truncated = tail * (0..m).map(|j| full.powi((m - 1 - j) as i32) * kept.powi(j as i32)).sum::<f64>();
    Ok(QReport { p, k, m, n_trunc, value, argmax: grid[imax], dropped_mass: truncated + pruned, words })
}

/// Right-hand side of the chain bound `(sum_n V_p^{(2k+2)}(n))^{m-1} zeta(2k+2)`.
pub fn q_chain_bound(p: f64, k: u32, m: u32) -> f64 {
    let t = 2.0 * k as f64 + 2.0;
    let z = hurwitz_zeta(t, 1.0);
    (z - p.min(1.0 - p)).powi(m as i32 - 1) * z
}

fn binomial(n: u32, k: u32) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `S_{m,j} = (1/j!) sum_i (-1)^i C(j,i) (j-i)^m`, checked against the
/// recurrence.
pub fn stirling2(m: u32, j: u32) -> Result<BigUint> {
    if j > m {
        return Err(Error::Domain(format!("Stirling S({m},{j}) needs j <= m")));
    }
    let mut sum = BigInt::zero();
    for i in 0..=j {
        let term = BigInt::from(binomial(j, i)) * BigInt::from(j - i).pow(m);
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let fact: BigInt = (1..=j).map(BigInt::from).product();
    let value = (sum / fact).abs().to_biguint().expect("nonnegative");
    if m <= 40 {
        let check = stirling2_recurrence(m, j);
        if check != value {
            return Err(Error::Consistency(format!("S({m},{j}): {value} vs recurrence {check}")));
        }
    }
    Ok(value)
}

/// `S_{m,j} = j S_{m-1,j} + S_{m-1,j-1}` with `S_{0,0} = 1`.
pub fn stirling2_recurrence(m: u32, j: u32) -> BigUint {
    if j > m {
        return BigUint::zero();
    }
    let mut row = vec![BigUint::zero(); j as usize + 1];
    row[0] = BigUint::one();
    for _ in 0..m {
        for i in (1..=j as usize).rev() {
            row[i] = &row[i] * BigUint::from(i) + &row[i - 1];
        }
        row[0] = BigUint::zero();
    }
    row[j as usize].clone()
}

/// Whether `S_{m,j} <= C(m,j) j^{m-j} / 2`.
pub fn stirling_half_bound_holds(m: u32, j: u32) -> Result<bool> {
    let s = stirling2(m, j)?;
    let rhs = binomial(m, j) * BigUint::from(j).pow(m - j);
    Ok(s * 2u32 <= rhs)
}

/// Lossy conversion used for reporting.
pub fn big_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}
