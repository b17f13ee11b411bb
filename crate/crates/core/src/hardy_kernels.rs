//! Bessel kernels on the half line, the Laplace transform bridge to the Gauss
//! operator, weighted composition norm formulas and the nuclear decomposition.
//!
//! The measure on `(0, inf)` is `dmu(t) = t / (e^t - 1) dt`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussLegendre, LaguerreRule};
use crate::special::ln_gamma;
use crate::transfer::{apply_lg, TailPolicy, UnitFunction};

/// Largest `u = (x/2)^2` accepted by the power series.
pub const SERIES_LIMIT: f64 = 400.0;
/// Crossover from series to asymptotic expansion in the total kernels.
const ASYMPTOTIC_FROM: f64 = 64.0;
/// Largest index accepted by [`xi_eta_norms`].
pub const XI_ETA_MAX: usize = 150;

fn check_series(u: f64) -> Result<()> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::Domain(format!("kernel argument must be >= 0 (got {u})")));
    }
    if u > SERIES_LIMIT {
        return Err(Error::Range(format!("series argument u = {u} exceeds {SERIES_LIMIT}")));
    }
    Ok(())
}

/// `sum_k sign^k u^k / (k! (k+1)!)`, stopped once a term drops below
/// `1e-17` of the partial sum.
fn kernel_series(u: f64, sign: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= sign * u / (k * (k + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() || term == 0.0 {
            return sum;
        }
    }
}

/// `J_1(x)` by its power series.
pub fn bessel_j1(x: f64) -> Result<f64> {
    let u = 0.25 * x * x;
    check_series(u)?;
    Ok(0.5 * x * kernel_series(u, -1.0))
}

/// `I_1(x)` by its power series.
pub fn bessel_i1(x: f64) -> Result<f64> {
    let u = 0.25 * x * x;
    check_series(u)?;
    Ok(0.5 * x * kernel_series(u, 1.0))
}

/// `J_1(2 sqrt u) / sqrt u` by its power series.
pub fn kernel_j(u: f64) -> Result<f64> {
    check_series(u)?;
    Ok(kernel_series(u, -1.0))
}

/// `I_1(2 sqrt u) / sqrt u` by its power series.
pub fn kernel_i(u: f64) -> Result<f64> {
    check_series(u)?;
    Ok(kernel_series(u, 1.0))
}

/// Coefficients `a_k(1)` of the large-argument Bessel expansions, truncated
/// at the smallest term for argument `z`.
fn asymptotic_terms(z: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut a = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = a * (4.0 - odd * odd) / (8.0 * k * z);
        if next.abs() >= a.abs() || next.abs() < 1e-18 || k > 60.0 {
            return out;
        }
        out.push(next);
        a = next;
        k += 1.0;
    }
}

/// `J_1(2 sqrt u) / sqrt u` for any `u >= 0`: series below the crossover,
/// Hankel expansion above it.
pub fn kernel_j_eval(u: f64) -> f64 {
    if u <= ASYMPTOTIC_FROM {
        return kernel_series(u.max(0.0), -1.0);
    }
    hankel_kernel_j(u)
}

fn hankel_kernel_j(u: f64) -> f64 {
    let z = 2.0 * u.sqrt();
    let terms = asymptotic_terms(z);
    let (mut p, mut q) = (0.0, 0.0);
    for (k, a) in terms.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
    }
    let chi = z - 0.75 * PI;
    let j1 = (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin());
    2.0 * j1 / z
}

/// `e^{-2 sqrt u} I_1(2 sqrt u) / sqrt u` for any `u >= 0`.
pub fn kernel_i_scaled(u: f64) -> f64 {
    let z = 2.0 * u.max(0.0).sqrt();
    if u <= ASYMPTOTIC_FROM {
        return kernel_series(u.max(0.0), 1.0) * (-z).exp();
    }
    hankel_kernel_i_scaled(z)
}

fn hankel_kernel_i_scaled(z: f64) -> f64 {
    let s: f64 = asymptotic_terms(z).iter().enumerate().map(|(k, a)| if k % 2 == 0 { *a } else { -*a }).sum();
    2.0 * s / (z * (2.0 * PI * z).sqrt())
}

/// Function on the half line with a declared decay class
/// `polynomial x e^{-rate t}`.
pub trait HalfLineFunction: Sync {
    fn eval(&self, t: f64) -> f64;
    fn decay_rate(&self) -> f64 {
        0.0
    }
}

impl<F: Fn(f64) -> f64 + Sync> HalfLineFunction for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

/// `sum_k coeffs[k] t^k e^{-rate t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpPoly {
    pub coeffs: Vec<f64>,
    pub rate: f64,
}

impl ExpPoly {
    pub fn one() -> Self {
        Self { coeffs: vec![1.0], rate: 0.0 }
    }

    pub fn exp(rate: f64) -> Self {
        Self { coeffs: vec![1.0], rate }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| c * a).collect(), rate: self.rate }
    }
}

impl HalfLineFunction for ExpPoly {
    fn eval(&self, t: f64) -> f64 {
        let poly = self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
        poly * (-self.rate * t).exp()
    }

    fn decay_rate(&self) -> f64 {
        self.rate
    }
}

/// `t / (e^t - 1) * e^t`, the mu-density with the Laguerre weight factored out.
fn mu_factor(t: f64) -> f64 {
    if t < 1e-300 {
        1.0
    } else {
        -t / (-t).exp_m1()
    }
}

/// Pair of Gauss-Laguerre rules with `n` and `2n` nodes; the finer value is
/// returned and the difference acts as an error estimate.
#[derive(Debug, Clone)]
pub struct HalfLineRule {
    coarse: LaguerreRule,
    fine: LaguerreRule,
    tol: f64,
}

impl HalfLineRule {
    pub fn new(n: usize, tol: f64) -> Result<Self> {
        if n < 2 || tol.is_nan() || tol <= 0.0 {
            return Err(Error::Domain(format!("half-line rule needs n >= 2, tol > 0 (got {n}, {tol})")));
        }
        Ok(Self { coarse: LaguerreRule::new(n, 0.0)?, fine: LaguerreRule::new(2 * n, 0.0)?, tol })
    }

    pub fn nodes(&self) -> usize {
        self.coarse.len()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn coarse(&self) -> &LaguerreRule {
        &self.coarse
    }

    pub fn fine(&self) -> &LaguerreRule {
        &self.fine
    }

    /// `int_0^inf e^{-t} g(t) dt`.
    pub fn integrate_exp<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let a = self.coarse.integrate(&g);
        let b = self.fine.integrate(&g);
        let diff = (a - b).abs();
        if !b.is_finite() || diff > self.tol * b.abs().max(1.0) {
            return Err(Error::Accuracy { diff, tol: self.tol });
        }
        Ok(b)
    }

    /// `int_0^inf f(t) dmu(t)`.
    pub fn integrate_mu<G: Fn(f64) -> f64>(&self, f: G) -> Result<f64> {
        self.integrate_exp(|t| f(t) * mu_factor(t))
    }
}

impl Default for HalfLineRule {
    fn default() -> Self {
        Self::new(64, 1e-9).expect("default rule")
    }
}

fn integrate_mu_unchecked<G: Fn(f64) -> f64>(rule: &LaguerreRule, f: G) -> f64 {
    rule.integrate(|t| f(t) * mu_factor(t))
}

/// `||phi||` in `L^2(R_+, mu)`.
pub fn mu_norm<G: HalfLineFunction + ?Sized>(phi: &G, rule: &HalfLineRule) -> Result<f64> {
    let v = rule.integrate_mu(|t| phi.eval(t).powi(2))?;
    Ok(v.sqrt())
}

/// `(K_J g)(s) = int J_1(2 sqrt(st)) / sqrt(st) g(t) dmu(t)`.
pub fn apply_kj<G: HalfLineFunction + ?Sized>(g: &G, s: f64, rule: &HalfLineRule) -> Result<f64> {
    check_nonneg(s)?;
    rule.integrate_mu(|t| kernel_j_eval(s * t) * g.eval(t))
}

/// `(K_I g)(s) = int I_1(2 sqrt(st)) / sqrt(st) e^{-(s+t)} g(t) dt`.
pub fn apply_ki<G: HalfLineFunction + ?Sized>(g: &G, s: f64, rule: &HalfLineRule) -> Result<f64> {
    check_nonneg(s)?;
    rule.integrate_exp(|t| ki_integrand(s, t) * g.eval(t))
}

fn ki_integrand(s: f64, t: f64) -> f64 {
    let u = s * t;
    kernel_i_scaled(u) * (2.0 * u.sqrt() - s).exp()
}

fn check_nonneg(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument must be finite and >= 0 (got {s})")))
    }
}

/// `phi_hat(x) = int e^{-tx} phi(t) dmu(t)`.
pub fn laplace_hat<G: HalfLineFunction + ?Sized>(phi: &G, x: f64, rule: &HalfLineRule) -> Result<f64> {
    check_nonneg(x)?;
    rule.integrate_mu(|t| (-t * x).exp() * phi.eval(t))
}

/// `phi_hat` restricted to `[0, 1]` as an input to the transfer operator,
/// with derivatives taken under the integral.
pub struct LaplaceHat<'a, G: HalfLineFunction + ?Sized> {
    phi: &'a G,
    rule: &'a LaguerreRule,
}

impl<'a, G: HalfLineFunction + ?Sized> LaplaceHat<'a, G> {
    /// Validates the rule pair at both ends of `[0, 1]`.
    pub fn new(phi: &'a G, rule: &'a HalfLineRule) -> Result<Self> {
        laplace_hat(phi, 0.0, rule)?;
        laplace_hat(phi, 1.0, rule)?;
        Ok(Self { phi, rule: rule.fine() })
    }
}

impl<G: HalfLineFunction + ?Sized> UnitFunction for LaplaceHat<'_, G> {
    fn eval(&self, x: f64) -> f64 {
        integrate_mu_unchecked(self.rule, |t| (-t * x).exp() * self.phi.eval(t))
    }

    fn derivative(&self, x: f64, order: usize) -> f64 {
        integrate_mu_unchecked(self.rule, |t| (-t).powi(order as i32) * (-t * x).exp() * self.phi.eval(t))
    }
}

/// Largest gap on `xs` between `L_G phi_hat` and the transform of `K_J phi`.
pub fn commuting_residual<G: HalfLineFunction + ?Sized>(
    phi: &G,
    xs: &[f64],
    rule: &HalfLineRule,
    policy: &TailPolicy,
) -> Result<f64> {
    let hat = LaplaceHat::new(phi, rule)?;
    let inner = rule.fine();
    let kj = |s: f64| integrate_mu_unchecked(inner, |t| kernel_j_eval(s * t) * phi.eval(t));
    let tabulate = |r: &LaguerreRule| -> Vec<f64> { r.nodes().par_iter().map(|&s| kj(s)).collect() };
    let coarse_vals = tabulate(rule.coarse());
    let fine_vals = tabulate(rule.fine());
    let transform = |r: &LaguerreRule, vals: &[f64], x: f64| -> f64 {
        r.nodes().iter().zip(r.weights()).zip(vals).map(|((&s, &w), &v)| w * (-s * x).exp() * mu_factor(s) * v).sum()
    };
    let mut worst: f64 = 0.0;
    for &x in xs {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
        }
        let lhs = apply_lg(&hat, x, policy)?;
        let a = transform(rule.coarse(), &coarse_vals, x);
        let b = transform(rule.fine(), &fine_vals, x);
        let diff = (a - b).abs();
        if diff > rule.tol() * b.abs().max(1.0) {
            return Err(Error::Accuracy { diff, tol: rule.tol() });
        }
        worst = worst.max((lhs - b).abs());
    }
    Ok(worst)
}

/// `<K phi, psi>` and `<phi, K psi>` for `K = K_J` on `L^2(mu)`. The outer
/// integral uses the coarse rule and the inner one the fine rule, so the
/// two values come from different node sets.
pub fn kj_bilinear<G, H>(phi: &G, psi: &H, rule: &HalfLineRule) -> Result<(f64, f64)>
where
    G: HalfLineFunction + ?Sized,
    H: HalfLineFunction + ?Sized,
{
    let weight = |s: f64| mu_factor(s);
    let inner =
        |r: &LaguerreRule, g: &dyn Fn(f64) -> f64, s: f64| integrate_mu_unchecked(r, |t| kernel_j_eval(s * t) * g(t));
    bilinear(rule, weight, inner, phi, psi)
}

/// `<K phi, psi>` and `<phi, K psi>` for `K = K_I` on `L^2(dt)`.
pub fn ki_bilinear<G, H>(phi: &G, psi: &H, rule: &HalfLineRule) -> Result<(f64, f64)>
where
    G: HalfLineFunction + ?Sized,
    H: HalfLineFunction + ?Sized,
{
    let weight = |s: f64| s.exp();
    let inner = |r: &LaguerreRule, g: &dyn Fn(f64) -> f64, s: f64| r.integrate(|t| ki_integrand(s, t) * g(t));
    bilinear(rule, weight, inner, phi, psi)
}

fn bilinear<G, H, W, I>(rule: &HalfLineRule, weight: W, inner: I, phi: &G, psi: &H) -> Result<(f64, f64)>
where
    G: HalfLineFunction + ?Sized,
    H: HalfLineFunction + ?Sized,
    W: Fn(f64) -> f64,
    I: Fn(&LaguerreRule, &dyn Fn(f64) -> f64, f64) -> f64,
{
    let f = |t: f64| phi.eval(t);
    let g = |t: f64| psi.eval(t);
    let outer = rule.coarse();
    let form = |inner_rule: &LaguerreRule, swap: bool| -> f64 {
        outer
            .nodes()
            .iter()
            .zip(outer.weights())
            .map(|(&s, &w)| {
                let v = if swap { f(s) * inner(inner_rule, &g, s) } else { inner(inner_rule, &f, s) * g(s) };
                w * weight(s) * v
            })
            .sum()
    };
    let lhs = form(rule.fine(), false);
    let rhs = form(rule.fine(), true);
    let diff = (lhs - form(rule.coarse(), false)).abs();
    if !lhs.is_finite() || diff > rule.tol() * lhs.abs().max(1.0) {
        return Err(Error::Accuracy { diff, tol: rule.tol() });
    }
    Ok((lhs, rhs))
}

/// Hilbert-Schmidt norm of the weighted composition operator with symbol
/// `psi_n(z) = (z+n)^{-2}`, `phi_n(z) = (z+n)^{-1}` on `H^2` of the right
/// half-plane, by quadrature in `t = n tan(theta)`.
pub fn hs_norm(n: u32) -> f64 {
    let nf = f64::from(n.max(1));
    let rule = GaussLegendre::new(32);
    let integral = rule.integrate(-FRAC_PI_2, FRAC_PI_2, |theta| {
        let t = nf * theta.tan();
        let jac = nf / theta.cos().powi(2);
        hs_integrand(nf, t) * jac
    });
    (integral / (4.0 * PI)).sqrt()
}

/// `|psi_n(it)|^2 / Re phi_n(it)`.
pub fn hs_integrand(n: f64, t: f64) -> f64 {
    let z = Complex64::new(n, t);
    let psi = z.powi(-2);
    let phi = z.inv();
    psi.norm_sqr() / phi.re
}

/// `(2n^3 + 3n^2 + n)^{-1/2}`.
pub fn trace_norm_bound(n: u32) -> f64 {
    let n = f64::from(n);
    (1.0 / (2.0 * n.powi(3) + 3.0 * n * n + n)).sqrt()
}

/// `sqrt((1/pi) int dt / (|n+it|^2 |n+1+it|^2))` by quadrature.
pub fn trace_norm_quadrature(n: u32) -> f64 {
    let nf = f64::from(n.max(1));
    let rule = GaussLegendre::new(64);
    let integral = rule.integrate(-FRAC_PI_2, FRAC_PI_2, |theta| {
        let t = nf * theta.tan();
        let jac = nf / theta.cos().powi(2);
        let a = Complex64::new(nf, t).norm_sqr();
        let b = Complex64::new(nf + 1.0, t).norm_sqr();
        jac / (a * b)
    });
    (integral / PI).sqrt()
}

/// `1 / (n sqrt(n+1))`.
pub fn opnorm_bound_gauss(n: u32) -> f64 {
    let n = f64::from(n);
    1.0 / (n * (n + 1.0).sqrt())
}

/// `sup_t sqrt((t^2+1) / ((t^2+n^2)(t^2+(n+1)^2)))`, attained at
/// `t^2 = sqrt((n-1) n (n+1) (n+2)) - 1` (or `t = 0` for `n = 1`).
pub fn gauss_symbol_sup(n: u32) -> f64 {
    let nf = f64::from(n);
    let s = (((nf - 1.0) * nf * (nf + 1.0) * (nf + 2.0)).sqrt() - 1.0).max(0.0);
    gauss_symbol(nf, s.sqrt())
}

/// `sqrt((t^2+1) / ((t^2+n^2)(t^2+(n+1)^2)))`.
pub fn gauss_symbol(n: f64, t: f64) -> f64 {
    let t2 = t * t;
    ((t2 + 1.0) / ((t2 + n * n) * (t2 + (n + 1.0).powi(2)))).sqrt()
}

/// `gauss_symbol_sup(n) * sqrt(n + 1)`.
pub fn opnorm_bound_gauss_sup(n: u32) -> f64 {
    gauss_symbol_sup(n) * (f64::from(n) + 1.0).sqrt()
}

/// `sqrt(m + 1)`.
pub fn opnorm_bound_bpow(m: u32) -> f64 {
    (f64::from(m) + 1.0).sqrt()
}

/// Squared `L^2(R_+)` norms of the nuclear decomposition factors
/// `xi_n(s) = s/(e^s-1) s^n e^{-s}/(n+1)!` and `eta_n(t) = t^n e^{-t}/n!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiEta {
    pub n: usize,
    pub eta_sq: f64,
    pub eta_sq_quadrature: f64,
    pub xi_sq: f64,
}

pub fn xi_eta_norms(n: usize) -> Result<XiEta> {
    if n > XI_ETA_MAX {
        return Err(Error::Range(format!("index n = {n} exceeds {XI_ETA_MAX}")));
    }
    let nf = n as f64;
    let ln2 = std::f64::consts::LN_2;
    let eta_sq = (ln_gamma(2.0 * nf + 1.0) - 2.0 * ln_gamma(nf + 1.0) - (2.0 * nf + 1.0) * ln2).exp();
    let upper = nf + 60.0;
    let ln_eta_norm = 2.0 * ln_gamma(nf + 1.0);
    let eta_density = |t: f64| {
        if t <= 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (2.0 * nf * t.ln() - 2.0 * t - ln_eta_norm).exp()
    };
    let eta_sq_quadrature = panel_integrate(eta_density, upper);
    let ln_xi_norm = 2.0 * ln_gamma(nf + 2.0);
    let xi_density = |s: f64| {
        if s <= 0.0 {
            return if n == 0 { 1.0 / (ln_xi_norm.exp()) } else { 0.0 };
        }
        let mu = s / s.exp_m1();
        mu * mu * (2.0 * nf * s.ln() - 2.0 * s - ln_xi_norm).exp()
    };
    let xi_sq = panel_integrate(xi_density, upper);
    Ok(XiEta { n, eta_sq, eta_sq_quadrature, xi_sq })
}

fn panel_integrate<F: Fn(f64) -> f64>(f: F, upper: f64) -> f64 {
    let rule = GaussLegendre::new(32);
    let panels = 128;
    let h = upper / f64::from(panels);
    (0..panels).map(|i| rule.integrate(f64::from(i) * h, f64::from(i + 1) * h, &f)).sum()
}

/// One row of the norms table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyRow {
    pub n: usize,
    pub hs: f64,
    pub trace_bound: f64,
    pub op_bound: f64,
    pub eta_sq: f64,
    pub xi_sq: f64,
}

/// Rows `1..=n_max`, computed in parallel, returned in order.
pub fn norms_table(n_max: usize) -> Result<Vec<HardyRow>> {
    if n_max == 0 || n_max > XI_ETA_MAX {
        return Err(Error::Range(format!("table size {n_max} outside 1..={XI_ETA_MAX}")));
    }
    (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let xe = xi_eta_norms(n)?;
            let k = n as u32;
            Ok(HardyRow {
                n,
                hs: hs_norm(k),
                trace_bound: trace_norm_bound(k),
                op_bound: opnorm_bound_gauss(k),
                eta_sq: xe.eta_sq,
                xi_sq: xe.xi_sq,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{hurwitz_zeta, trigamma};
    use approx::assert_relative_eq;

    /// `sum_{j >= j0} e^{-s/j} / j^2`, the image of `e^{-(j0-1) t}` under `K_J`.
    fn kj_exp_oracle(s: f64, j0: u32) -> f64 {
        let cut = (20.0 * s).max(50.0) as u32;
        let mut sum: f64 = (j0..cut).map(|j| (-s / f64::from(j)).exp() / f64::from(j * j)).sum();
        let mut coeff = 1.0;
        for k in 0..40 {
            sum += coeff * hurwitz_zeta(2.0 + k as f64, f64::from(cut));
            coeff *= -s / (k as f64 + 1.0);
        }
        sum
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        assert_eq!(kernel_j(0.0).unwrap(), 1.0);
        assert_relative_eq!(bessel_i1(0.2).unwrap(), 0.100500834_0, max_relative = 1e-9);
        assert_relative_eq!(bessel_j1(1.0).unwrap(), 0.440_050_585_744_933_5, max_relative = 1e-14);
        assert!(matches!(kernel_j(401.0), Err(Error::Range(_))));
        assert!(matches!(bessel_i1(41.0), Err(Error::Range(_))));
    }

    #[test]
    fn asymptotic_branch_matches_series_at_crossover() {
        for u in [50.0, 64.0, 80.0] {
            let z = 2.0 * f64::sqrt(u);
            assert!((kernel_series(u, -1.0) - hankel_kernel_j(u)).abs() < 1e-10, "u = {u}");
            let scaled = kernel_series(u, 1.0) * (-z).exp();
            assert_relative_eq!(scaled, hankel_kernel_i_scaled(z), max_relative = 1e-10);
        }
    }

    #[test]
    fn scaled_kernel_i_bounded() {
        for i in 0..=100 {
            let v = kernel_i_scaled(f64::from(i));
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn kernel_j_partial_sums_bracket() {
        for u in [0.1, 0.5, 1.0] {
            let limit = kernel_j(u).unwrap();
            let mut term = 1.0;
            let mut partial = 1.0;
            for k in 1..12 {
                let kf = f64::from(k);
                let prev = partial;
                term *= -u / (kf * (kf + 1.0));
                partial += term;
                let (lo, hi) = if prev < partial { (prev, partial) } else { (partial, prev) };
                assert!(lo - 1e-16 <= limit && limit <= hi + 1e-16);
            }
        }
    }

    #[test]
    fn kj_of_one_at_zero() {
        let rule = HalfLineRule::default();
        let v = apply_kj(&ExpPoly::one(), 0.0, &rule).unwrap();
        assert_relative_eq!(v, PI * PI / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn kj_matches_series_oracle() {
        let rule = HalfLineRule::new(64, 1e-8).unwrap();
        for s in [0.5, 2.0, 8.0] {
            let one = apply_kj(&ExpPoly::one(), s, &rule).unwrap();
            assert!((one - kj_exp_oracle(s, 1)).abs() < 1e-9, "s = {s}");
            let ex = apply_kj(&ExpPoly::exp(1.0), s, &rule).unwrap();
            assert!((ex - kj_exp_oracle(s, 2)).abs() < 1e-9, "s = {s}");
        }
    }

    #[test]
    fn ki_rule_refinement() {
        let a = HalfLineRule::new(64, 1.0).unwrap();
        let g = ExpPoly::exp(1.0);
        let coarse: f64 = a.coarse().integrate(|t| ki_integrand(1.0, t) * g.eval(t));
        let fine: f64 = a.fine().integrate(|t| ki_integrand(1.0, t) * g.eval(t));
        assert!((coarse - fine).abs() < 1e-9);
        assert!(apply_ki(&g, 1.0, &HalfLineRule::default()).is_ok());
    }

    #[test]
    fn laplace_of_one_is_trigamma() {
        let rule = HalfLineRule::default();
        let one = ExpPoly::one();
        assert_relative_eq!(laplace_hat(&one, 0.0, &rule).unwrap(), PI * PI / 6.0, max_relative = 1e-12);
        assert_relative_eq!(laplace_hat(&one, 1.0, &rule).unwrap(), PI * PI / 6.0 - 1.0, max_relative = 1e-12);
        for x in [0.3, 0.7] {
            assert_relative_eq!(laplace_hat(&one, x, &rule).unwrap(), trigamma(1.0 + x), max_relative = 1e-12);
        }
    }

    #[test]
    fn commuting_diagram() {
        let rule = HalfLineRule::default();
        let policy = TailPolicy::default();
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        for phi in [ExpPoly::one(), ExpPoly::exp(1.0)] {
            let r = commuting_residual(&phi, &xs, &rule, &policy).unwrap();
            assert!(r <= 1e-6, "residual {r}");
        }
    }

    #[test]
    fn kernels_symmetric() {
        let rule = HalfLineRule::default();
        let battery: Vec<ExpPoly> = vec![
            ExpPoly::one(),
            ExpPoly::exp(1.0),
            ExpPoly { coeffs: vec![0.0, 1.0], rate: 0.5 },
            ExpPoly { coeffs: vec![1.0, -1.0, 0.25], rate: 1.0 },
            ExpPoly { coeffs: vec![2.0, 0.0, 1.0], rate: 2.0 },
        ];
        for i in 0..battery.len() {
            let j = (i + 1) % battery.len();
            let (a, b) = kj_bilinear(&battery[i], &battery[j], &rule).unwrap();
            assert!((a - b).abs() <= 1e-8, "K_J pair {i},{j}: {a} vs {b}");
        }
        let decaying: Vec<ExpPoly> =
            battery.iter().map(|f| ExpPoly { coeffs: f.coeffs.clone(), rate: f.rate + 1.0 }).collect();
        for i in 0..decaying.len() {
            let j = (i + 1) % decaying.len();
            let (a, b) = ki_bilinear(&decaying[i], &decaying[j], &rule).unwrap();
            assert!((a - b).abs() <= 1e-8, "K_I pair {i},{j}: {a} vs {b}");
        }
    }

    #[test]
    fn hs_norm_formula() {
        for n in 1..=10 {
            assert!((hs_norm(n) * 2.0 * f64::from(n) - 1.0).abs() < 1e-8);
        }
        assert!((hs_norm(1) - 0.5).abs() < 1e-12);
        for t in [0.3, 2.0, 17.0] {
            assert_eq!(hs_integrand(3.0, t), hs_integrand(3.0, -t));
        }
    }

    #[test]
    fn norm_bounds() {
        assert!((trace_norm_bound(2) - (1.0f64 / 30.0).sqrt()).abs() < 1e-12);
        assert_relative_eq!(opnorm_bound_gauss(1), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        for n in 1..=20 {
            assert_relative_eq!(trace_norm_quadrature(n), trace_norm_bound(n), max_relative = 1e-10);
            assert!(trace_norm_bound(n) <= f64::from(n).powf(-1.5));
            let grid = (0..=200_000).map(|i| gauss_symbol(f64::from(n), f64::from(i) * 1e-3)).fold(0.0, f64::max);
            assert!(grid - gauss_symbol_sup(n) < 1e-15 && gauss_symbol_sup(n) - grid < 1e-8);
            assert!(opnorm_bound_gauss_sup(n) >= opnorm_bound_gauss(n) * (1.0 - 1e-15));
        }
        assert_relative_eq!(gauss_symbol_sup(1), 0.5, max_relative = 1e-15);
        assert!(gauss_symbol_sup(2) > 1.0 / 6.0 + 0.05);
        assert_eq!(opnorm_bound_bpow(3), 2.0);
        let partial = |k: u32| -> f64 { (2..=k).map(trace_norm_bound).sum() };
        let (a, b) = (partial(1000), partial(4000));
        assert!(b - a < 2.0 * 1000f64.powf(-0.5));
    }

    #[test]
    fn eta_xi_norms() {
        let x0 = xi_eta_norms(0).unwrap();
        assert_relative_eq!(x0.eta_sq, 0.5, max_relative = 1e-14);
        let x1 = xi_eta_norms(1).unwrap();
        assert_relative_eq!(x1.eta_sq, 0.25, max_relative = 1e-14);
        for n in 0..=40 {
            let x = xi_eta_norms(n).unwrap();
            assert!((x.eta_sq - x.eta_sq_quadrature).abs() <= 1e-10, "n = {n}");
            assert!(x.eta_sq <= 1.0 / ((n + 1) as f64).sqrt());
        }
        for n in 5..=40 {
            let a = xi_eta_norms(n).unwrap().xi_sq.sqrt();
            let b = xi_eta_norms(n + 1).unwrap().xi_sq.sqrt();
            assert!(b / a <= 2.0 / 3.0 + 0.05, "n = {n}: {}", b / a);
        }
        assert!(matches!(xi_eta_norms(151), Err(Error::Range(_))));
    }

    #[test]
    fn table_ordered() {
        let rows = norms_table(12).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().enumerate().all(|(i, r)| r.n == i + 1));
    }
}
