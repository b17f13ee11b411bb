//! Inverse branches as integer Moebius matrices.
//!
//! `b_{n,0}(x) = 1/(n+x)` has matrix `[[0,1],[1,n]]` and
//! `b_{n,1}(x) = 1 - 1/(n+x)` has matrix `[[1,n-1],[1,n]]`. A word
//! `(n_1,w_1) ... (n_m,w_m)` denotes `b_{n_1,w_1} o ... o b_{n_m,w_m}`, so the
//! leftmost index is applied last and the word matrix is the left-to-right
//! product. Entries are arbitrary precision.

use std::fmt;
use std::ops::Mul;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dynamics::MapChoice;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchIndex {
    pub n: u64,
    pub map: MapChoice,
}

impl BranchIndex {
    pub fn new(n: u64, map: MapChoice) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidIndex(n));
        }
        Ok(Self { n, map })
    }

    pub fn gauss(n: u64) -> Self {
        Self { n, map: MapChoice::Gauss }
    }

    pub fn renyi(n: u64) -> Self {
        Self { n, map: MapChoice::Renyi }
    }

    /// Coin probability of the map choice.
    pub fn probability(&self, p: f64) -> f64 {
        match self.map {
            MapChoice::Gauss => p,
            MapChoice::Renyi => 1.0 - p,
        }
    }
}

/// `[[A, B], [C, D]]` acting as `x -> (Ax + B)/(Cx + D)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MoebiusMatrix {
    pub a: BigUint,
    pub b: BigUint,
    pub c: BigUint,
    pub d: BigUint,
}

impl fmt::Display for MoebiusMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl MoebiusMatrix {
    pub fn from_u64(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a: a.into(), b: b.into(), c: c.into(), d: d.into() }
    }

    pub fn identity() -> Self {
        Self::from_u64(1, 0, 0, 1)
    }

    /// `|AD - BC|`.
    pub fn abs_det(&self) -> BigUint {
        let ad = &self.a * &self.d;
        let bc = &self.b * &self.c;
        if ad >= bc {
            ad - bc
        } else {
            bc - ad
        }
    }

    pub fn is_unimodular(&self) -> bool {
        self.abs_det().is_one()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, c, d) = self.as_f64();
        (a * x + b) / (c * x + d)
    }

    /// `|b'(x)| = |AD - BC| / (Cx + D)^2`, with `|AD - BC| = 1`.
    pub fn abs_derivative(&self, x: f64) -> f64 {
        let c = self.c.to_f64().unwrap_or(f64::INFINITY);
        let d = self.d.to_f64().unwrap_or(f64::INFINITY);
        let r = 1.0 / (c * x + d);
        r * r
    }

    pub fn as_f64(&self) -> (f64, f64, f64, f64) {
        let cv = |v: &BigUint| v.to_f64().unwrap_or(f64::INFINITY);
        (cv(&self.a), cv(&self.b), cv(&self.c), cv(&self.d))
    }
}

impl Mul for &MoebiusMatrix {
    type Output = MoebiusMatrix;

    fn mul(self, rhs: &MoebiusMatrix) -> MoebiusMatrix {
        MoebiusMatrix {
            a: &self.a * &rhs.a + &self.b * &rhs.c,
            b: &self.a * &rhs.b + &self.b * &rhs.d,
            c: &self.c * &rhs.a + &self.d * &rhs.c,
            d: &self.c * &rhs.b + &self.d * &rhs.d,
        }
    }
}

pub fn branch_matrix(idx: BranchIndex) -> Result<MoebiusMatrix> {
    if idx.n == 0 {
        return Err(Error::InvalidIndex(0));
    }
    let n = idx.n;
    Ok(match idx.map {
        MapChoice::Gauss => MoebiusMatrix::from_u64(0, 1, 1, n),
        MapChoice::Renyi => MoebiusMatrix::from_u64(1, n - 1, 1, n),
    })
}

/// A nonempty sequence of branch indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BranchWord(Vec<BranchIndex>);

impl BranchWord {
    pub fn new(word: Vec<BranchIndex>) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Domain("branch word must be nonempty".into()));
        }
        if let Some(bad) = word.iter().find(|i| i.n == 0) {
            return Err(Error::InvalidIndex(bad.n));
        }
        Ok(Self(word))
    }

    pub fn indices(&self) -> &[BranchIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Product of the coin probabilities along the word.
    pub fn probability(&self, p: f64) -> f64 {
        self.0.iter().map(|i| i.probability(p)).product()
    }

    pub fn concat(&self, other: &BranchWord) -> BranchWord {
        BranchWord(self.0.iter().chain(&other.0).copied().collect())
    }
}

pub fn compose(word: &BranchWord) -> Result<MoebiusMatrix> {
    let mut acc = MoebiusMatrix::identity();
    for &idx in word.indices() {
        acc = &acc * &branch_matrix(idx)?;
    }
    Ok(acc)
}

/// `sup_{[0,1]} |b'| = 1/D^2`, attained at `x = 0`.
pub fn sup_abs_derivative(m: &MoebiusMatrix) -> Result<f64> {
    if m.d.is_zero() {
        return Err(Error::InvalidMatrix("D = 0"));
    }
    let inv = match m.d.to_f64() {
        Some(d) if d.is_finite() => 1.0 / d,
        _ => 0.0,
    };
    Ok(inv * inv)
}

/// `a_{n,w}(x)`: `p/(x+n)^2` for Gauss, `(1-p)/(x+n)^2` for Renyi.
pub fn branch_weight(idx: BranchIndex, p: f64, x: f64) -> f64 {
    let r = 1.0 / (x + idx.n as f64);
    idx.probability(p) * r * r
}

/// Weight of a composed branch: coin probability of the word times `|b_w'(x)|`.
pub fn word_weight(word: &BranchWord, p: f64, x: f64) -> Result<f64> {
    let m = compose(word)?;
    Ok(word.probability(p) * m.abs_derivative(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{inverse_branch, CounterRng};
    use proptest::prelude::*;

    fn random_word(rng: &mut CounterRng, max_len: usize, max_n: u64) -> BranchWord {
        let len = 1 + (rng.next_u64() % max_len as u64) as usize;
        let word = (0..len)
            .map(|_| {
                let n = 1 + rng.next_u64() % max_n;
                if rng.next_u64() & 1 == 0 {
                    BranchIndex::gauss(n)
                } else {
                    BranchIndex::renyi(n)
                }
            })
            .collect();
        BranchWord::new(word).unwrap()
    }

    /// Applies the word right-to-left as plain functions.
    fn eval_by_composition(word: &BranchWord, x: f64) -> f64 {
        word.indices().iter().rev().fold(x, |y, idx| inverse_branch(idx.n, idx.map, y))
    }

    #[test]
    fn branch_matrix_examples() {
        assert_eq!(branch_matrix(BranchIndex::gauss(1)).unwrap(), MoebiusMatrix::from_u64(0, 1, 1, 1));
        assert_eq!(branch_matrix(BranchIndex::renyi(3)).unwrap(), MoebiusMatrix::from_u64(1, 2, 1, 3));
        assert_eq!(BranchIndex::new(0, MapChoice::Gauss), Err(Error::InvalidIndex(0)));
        for n in 1..=100 {
            for idx in [BranchIndex::gauss(n), BranchIndex::renyi(n)] {
                assert!(branch_matrix(idx).unwrap().is_unimodular());
            }
        }
    }

    #[test]
    fn compose_examples() {
        let w = BranchWord::new(vec![BranchIndex::gauss(1), BranchIndex::renyi(2)]).unwrap();
        let m = compose(&w).unwrap();
        // [[0,1],[1,1]] * [[1,1],[1,2]] by hand
        assert_eq!(m, MoebiusMatrix::from_u64(1, 2, 2, 3));
        assert!((m.eval(0.0) - 2.0 / 3.0).abs() < 1e-16);
        assert!((eval_by_composition(&w, 0.0) - 2.0 / 3.0).abs() < 1e-16);
        assert!((sup_abs_derivative(&m).unwrap() - 1.0 / 9.0).abs() < 1e-17);
        let single = BranchWord::new(vec![BranchIndex::renyi(7)]).unwrap();
        assert_eq!(compose(&single).unwrap(), branch_matrix(BranchIndex::renyi(7)).unwrap());
        assert_eq!(sup_abs_derivative(&MoebiusMatrix::from_u64(0, 1, 1, 1)).unwrap(), 1.0);
        assert!(sup_abs_derivative(&MoebiusMatrix::from_u64(1, 0, 1, 0)).is_err());
    }

    #[test]
    fn weights_examples() {
        assert_eq!(branch_weight(BranchIndex::gauss(1), 0.5, 0.0), 0.5);
        assert!((branch_weight(BranchIndex::renyi(2), 0.25, 1.0) - 0.75 / 9.0).abs() < 1e-17);
        let w = BranchWord::new(vec![BranchIndex::gauss(1)]).unwrap();
        assert!((word_weight(&w, 0.7, 0.0).unwrap() - 0.7).abs() < 1e-16);
        let w = BranchWord::new(vec![BranchIndex::gauss(1), BranchIndex::renyi(2)]).unwrap();
        assert!((word_weight(&w, 0.5, 0.0).unwrap() - 0.25 / 9.0).abs() < 1e-17);
    }

    #[test]
    fn branch_weights_sum_to_trigamma() {
        // sum over n <= N and both maps at x = 0 is sum 1/n^2; add the integral tail 1/N.
        let p = 0.3;
        let n_max = 20_000u64;
        let partial: f64 = (1..=n_max)
            .rev()
            .map(|n| branch_weight(BranchIndex::gauss(n), p, 0.0) + branch_weight(BranchIndex::renyi(n), p, 0.0))
            .sum();
        let tail = 1.0 / (n_max as f64 + 0.5);
        assert!((partial + tail - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn sup_derivative_attained_at_zero_on_grid() {
        let mut rng = CounterRng::new(3);
        for _ in 0..100 {
            let w = random_word(&mut rng, 6, 12);
            let m = compose(&w).unwrap();
            let sup = sup_abs_derivative(&m).unwrap();
            let (a, b, c, d) = m.as_f64();
            for i in 0..=1000 {
                let x = i as f64 / 1000.0;
                // independent route: |AD - BC| / (Cx + D)^2 from float entries
                let det = (a * d - b * c).abs();
                let deriv = det / ((c * x + d) * (c * x + d));
                assert!(deriv <= sup * (1.0 + 1e-12));
            }
            assert!((m.abs_derivative(0.0) - sup).abs() <= 1e-15 * sup);
        }
    }

    #[test]
    fn word_weight_is_product_of_step_weights() {
        let mut rng = CounterRng::new(9);
        for _ in 0..100 {
            let w = random_word(&mut rng, 5, 9);
            let p = rng.next_f64();
            let x = rng.next_f64();
            // a_w(x) = prod_i a_{n_i}(b_{n_{i+1}} o ... o b_{n_m}(x))
            let mut y = x;
            let mut prod = 1.0;
            for idx in w.indices().iter().rev() {
                prod *= branch_weight(*idx, p, y);
                y = inverse_branch(idx.n, idx.map, y);
            }
            let direct = word_weight(&w, p, x).unwrap();
            assert!((direct - prod).abs() <= 1e-13 * prod.max(1e-300), "{direct} vs {prod}");
            let m = compose(&w).unwrap();
            assert!((m.eval(x) - eval_by_composition(&w, x)).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn compose_is_associative_and_unimodular(
            u in proptest::collection::vec((1u64..500, any::<bool>()), 1..8),
            v in proptest::collection::vec((1u64..500, any::<bool>()), 1..8),
        ) {
            let mk = |s: &[(u64, bool)]| BranchWord::new(
                s.iter().map(|&(n, r)| if r { BranchIndex::renyi(n) } else { BranchIndex::gauss(n) }).collect()
            ).unwrap();
            let (wu, wv) = (mk(&u), mk(&v));
            let lhs = compose(&wu.concat(&wv)).unwrap();
            let rhs = &compose(&wu).unwrap() * &compose(&wv).unwrap();
            prop_assert_eq!(&lhs, &rhs);
            prop_assert!(lhs.is_unimodular());
            prop_assert!(!lhs.c.is_zero() && !lhs.d.is_zero());
        }
    }
}
