//! Scalar special functions used across the crate: digamma, polygamma
//! (through the Hurwitz zeta function) and log-gamma.

use std::f64::consts::PI;

/// Even-index Bernoulli numbers B_2, B_4, ..., B_20.
pub(crate) const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta function `zeta(s, a) = sum_{k>=0} (k + a)^{-s}` for `s > 1`, `a > 0`.
///
/// Direct summation until the shifted argument is large, then Euler-Maclaurin.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let shift_to = (s + 12.0).max(16.0);
    let mut sum = 0.0;
    let mut x = a;
    while x < shift_to {
        sum += x.powf(-s);
        x += 1.0;
    }
    sum + euler_maclaurin_tail(s, x)
}

/// `sum_{k>=0} (x + k)^{-s}` by Euler-Maclaurin, accurate when `x >= s + 12`.
fn euler_maclaurin_tail(s: f64, x: f64) -> f64 {
    let xs = x.powf(-s);
    let mut total = x * xs / (s - 1.0) + 0.5 * xs;
    // rising factorial s (s+1) ... (s+2j-2) / (2j)! * x^{-s-2j+1}
    let mut factor = s * xs / x;
    let mut fact = 2.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * factor;
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
        let k = 2.0 * j as f64 + 2.0;
        factor *= (s + k - 1.0) * (s + k) / (x * x);
        fact *= (k + 1.0) * (k + 2.0);
    }
    total
}

/// Digamma function for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    let mut y = x;
    while y < 12.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    let mut series = 0.0;
    let mut pow = inv2;
    for (j, b) in BERNOULLI_EVEN.iter().take(8).enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        series += b / k * pow;
        pow *= inv2;
    }
    acc + y.ln() - 0.5 / y - series
}

/// Trigamma function `psi'(x) = zeta(2, x)` for `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    hurwitz_zeta(2.0, x)
}

/// Polygamma `psi^{(m)}(x)` for `m >= 1`, `x > 0`.
pub fn polygamma(m: u32, x: f64) -> f64 {
    assert!(m >= 1, "polygamma order must be >= 1");
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    sign * factorial(m) * hurwitz_zeta(m as f64 + 1.0, x)
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trigamma_at_one_is_zeta_two() {
        assert_relative_eq!(trigamma(1.0), PI * PI / 6.0, max_relative = 1e-15);
        assert_relative_eq!(trigamma(2.0), PI * PI / 6.0 - 1.0, max_relative = 1e-15);
    }

    #[test]
    fn digamma_known_values() {
        let euler_gamma = 0.577_215_664_901_532_9;
        assert_relative_eq!(digamma(1.0), -euler_gamma, max_relative = 1e-14);
        assert_relative_eq!(digamma(0.5), -euler_gamma - 2.0 * 2f64.ln(), max_relative = 1e-14);
        // recurrence
        let x = 3.7;
        assert_relative_eq!(digamma(x + 1.0), digamma(x) + 1.0 / x, max_relative = 1e-14);
    }

    #[test]
    fn polygamma_two_at_one() {
        // psi''(1) = -2 zeta(3)
        let zeta3 = 1.202_056_903_159_594_2;
        assert_relative_eq!(polygamma(2, 1.0), -2.0 * zeta3, max_relative = 1e-14);
    }

    #[test]
    fn hurwitz_matches_direct_sum_for_large_shift() {
        let direct: f64 = (0..200_000).map(|k| (k as f64 + 50.25).powi(-5)).sum();
        assert_relative_eq!(hurwitz_zeta(5.0, 50.25), direct, max_relative = 1e-12);
    }

    #[test]
    fn ln_gamma_factorials() {
        assert_relative_eq!(ln_gamma(11.0), factorial(10).ln(), max_relative = 1e-14);
        assert_relative_eq!(ln_gamma(0.5), PI.sqrt().ln(), max_relative = 1e-13);
    }
}
