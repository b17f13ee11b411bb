//! The random Gauss-Renyi system: map evaluation, digit expansion and its
//! inverse, and Monte-Carlo sampling of the stationary distribution.
//!
//! Digits follow the half-open cells `(1/(m+1), 1/m]`; a point exactly on a
//! cell boundary takes the digit of the cell it closes. All boundary
//! decisions are made with fused multiply-adds so the sign tests are exact
//! in binary64.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::UnitFunction;

/// Which map is applied at a step: `Gauss` is `x -> {1/x}`, `Renyi` is
/// `x -> {1/(1-x)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapChoice {
    Gauss = 0,
    Renyi = 1,
}

impl MapChoice {
    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(MapChoice::Gauss),
            1 => Ok(MapChoice::Renyi),
            other => Err(Error::Domain(format!("map choice must be 0 or 1, got {other}"))),
        }
    }
}

/// One step of a random continued fraction expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitRecord {
    pub digit: u64,
    pub map: MapChoice,
}

/// A finite expansion: the digits and the remaining orbit point.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub digits: Vec<DigitRecord>,
    pub tail: f64,
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} is not in [0, 1]")))
    }
}

/// Digit as a float (exact integer below 2^53), or `None` where undefined.
fn digit_f64(map: MapChoice, x: f64) -> Option<f64> {
    let y = match map {
        MapChoice::Gauss => x,
        MapChoice::Renyi => 1.0 - x,
    };
    if y <= 0.0 {
        return None;
    }
    let mut m = (1.0 / y).floor().max(1.0);
    // m * y <= 1 and (m + 1) * y > 1, tested exactly.
    let times_minus_one = |m: f64| match map {
        MapChoice::Gauss => m.mul_add(x, -1.0),
        MapChoice::Renyi => (-m).mul_add(x, m - 1.0),
    };
    for _ in 0..4 {
        if times_minus_one(m) > 0.0 {
            m -= 1.0;
        } else if m < 9.0e15 && times_minus_one(m + 1.0) <= 0.0 {
            m += 1.0;
        } else {
            break;
        }
    }
    Some(m)
}

/// Largest binary64 strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// `T_0(x) = {1/x}` (with `T_0(0) = 0`) or `T_1(x) = {1/(1-x)}` (with `T_1(1) = 0`).
pub fn apply_map(map: MapChoice, x: f64) -> f64 {
    let Some(m) = digit_f64(map, x) else {
        return 0.0;
    };
    let v = match map {
        MapChoice::Gauss => (-m).mul_add(x, 1.0) / x,
        MapChoice::Renyi => m.mul_add(x, 1.0 - m) / (1.0 - x),
    };
    v.clamp(0.0, ONE_MINUS_ULP)
}

/// First digit `a_1`: the `m` with `map + (-1)^map x` in `(1/(m+1), 1/m]`.
pub fn first_digit(map: MapChoice, x: f64) -> Result<u64> {
    check_unit(x)?;
    let m = digit_f64(map, x).ok_or(Error::DigitUndefined { x, omega: map.bit() })?;
    if m >= 1.8e19 {
        return Err(Error::Range(format!("digit {m:e} at x = {x:e}")));
    }
    Ok(m as u64)
}

/// Inverse branch `b_{n,map}(y)`: `1/(n+y)` for Gauss, `1 - 1/(n+y)` for Renyi.
pub fn inverse_branch(n: u64, map: MapChoice, y: f64) -> f64 {
    let u = 1.0 / (n as f64 + y);
    match map {
        MapChoice::Gauss => u,
        MapChoice::Renyi => 1.0 - u,
    }
}

/// Expand `x` along the given map sequence.
pub fn expand(x: f64, maps: &[MapChoice]) -> Result<Expansion> {
    check_unit(x)?;
    let mut digits = Vec::with_capacity(maps.len());
    let mut state = x;
    for &map in maps {
        let digit = first_digit(map, state)?;
        digits.push(DigitRecord { digit, map });
        state = apply_map(map, state);
    }
    Ok(Expansion { digits, tail: state })
}

/// Evaluate the nested fraction `w_1 + (-1)^{w_1} / (a_1 + w_2 + ... / (a_n + tail))`
/// from the innermost level outwards.
pub fn reconstruct(digits: &[DigitRecord], tail: f64) -> Result<f64> {
    if digits.is_empty() {
        return Err(Error::Domain("reconstruct needs at least one digit".into()));
    }
    let mut v = tail;
    for (level, rec) in digits.iter().enumerate().rev() {
        let denom = rec.digit as f64 + v;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Reconstruction { level });
        }
        v = match rec.map {
            MapChoice::Gauss => 1.0 / denom,
            MapChoice::Renyi => 1.0 - 1.0 / denom,
        };
    }
    Ok(v)
}

/// Identifier of the coin generator, recorded in simulation metadata.
pub const RNG_ALGORITHM_ID: &str =
    "splitmix64-counter/gamma=0x9e3779b97f4a7c15/mix=0xbf58476d1ce4e5b9,0x94d049bb133111eb";

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64: output `i` is `mix(seed + (i + 1) * gamma)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: seed, counter: 0 }
    }

    /// Stream for shard `index` of a run seeded with `seed`.
    pub fn for_shard(seed: u64, index: u64) -> Self {
        Self::new(splitmix_mix(seed ^ splitmix_mix(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        splitmix_mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Bernoulli coin parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinParams {
    pub p: f64,
    pub seed: u64,
    pub rng_algorithm_id: String,
}

impl CoinParams {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("p = {p} is not a probability")));
        }
        Ok(Self { p, seed, rng_algorithm_id: RNG_ALGORITHM_ID.to_string() })
    }

    fn coin(&self, rng: &mut CounterRng) -> MapChoice {
        if rng.next_f64() < self.p {
            MapChoice::Gauss
        } else {
            MapChoice::Renyi
        }
    }
}

pub const DEFAULT_BURN_IN: usize = 1_000;

/// Samples per independent orbit. Fixed so that output does not depend on
/// how many worker threads run the shards.
pub const SHARD_LEN: usize = 1 << 16;

/// Orbit samples of the random map after `burn_in` steps.
///
/// The run is split into shards of [`SHARD_LEN`] samples, each an
/// independent orbit from `x0` with its own derived coin stream and its own
/// burn-in; shards are concatenated in index order.
pub fn simulate(params: &CoinParams, x0: f64, burn_in: usize, samples: usize) -> Result<Vec<f64>> {
    check_unit(x0)?;
    if samples == 0 {
        return Err(Error::Domain("samples must be >= 1".into()));
    }
    let shards = samples.div_ceil(SHARD_LEN);
    let chunks: Vec<Vec<f64>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let len = SHARD_LEN.min(samples - shard * SHARD_LEN);
            let mut rng = CounterRng::for_shard(params.seed, shard as u64);
            let mut x = x0;
            for _ in 0..burn_in {
                x = apply_map(params.coin(&mut rng), x);
            }
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                x = apply_map(params.coin(&mut rng), x);
                out.push(x);
            }
            out
        })
        .collect();
    Ok(chunks.concat())
}

/// Normalized histogram on `bins` equal cells of [0, 1] (density values).
pub fn histogram(samples: &[f64], bins: usize) -> Vec<f64> {
    assert!(bins >= 1);
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let b = ((x * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let scale = bins as f64 / samples.len() as f64;
    counts.into_iter().map(|c| c as f64 * scale).collect()
}

/// `int_0^1 |hist(x) - h(x)| dx` for a piecewise-constant histogram.
pub fn l1_distance<F: UnitFunction + ?Sized>(hist: &[f64], density: &F) -> f64 {
    let bins = hist.len();
    let width = 1.0 / bins as f64;
    let sub = 8;
    let rule = crate::quadrature::GaussLegendre::new(8);
    let mut total = 0.0;
    for (b, &level) in hist.iter().enumerate() {
        for s in 0..sub {
            let a = (b as f64 + s as f64 / sub as f64) * width;
            let c = a + width / sub as f64;
            total += rule.integrate(a, c, |x| (level - density.eval(x)).abs());
        }
    }
    total
}
