//! Special functions and the power formulas of the studentized tests.
//!
//! Everything here is scalar and pure. The series evaluators share one
//! truncation policy ([`SeriesOptions`]) and report [`Error::NonConvergence`]
//! with the partial sum when the term cap binds.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// Truncation policy for the infinite series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the approximation in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_z(a, b)`.
pub fn reg_inc_beta(z: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete beta needs z in [0,1], a > 0, b > 0 (got z={z}, a={a}, b={b})"
        )));
    }
    Ok(inc_beta_pair(z, 1.0 - z, a, b).0)
}

/// Returns `(I_x(a,b), 1 − I_x(a,b))` where `y = 1 − x` is passed separately
/// so callers can supply it without cancellation.
fn inc_beta_pair(x: f64, y: f64, a: f64, b: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let v = (ln_front.exp() * beta_cf(x, a, b) / a).clamp(0.0, 1.0);
        (v, 1.0 - v)
    } else {
        let w = (ln_front.exp() * beta_cf(y, b, a) / b).clamp(0.0, 1.0);
        (1.0 - w, w)
    }
}

// modified Lentz evaluation of the incomplete beta continued fraction
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 − Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Student-t CDF with `nu` degrees of freedom.
pub fn student_t_cdf(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let (lower, upper) = t_tails(t, nu);
    if t >= 0.0 {
        upper
    } else {
        lower
    }
}

/// Student-t upper tail `P(T > t)`, accurate far into the tail.
pub fn student_t_sf(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let (lower, upper) = t_tails(t, nu);
    if t >= 0.0 {
        lower
    } else {
        upper
    }
}

// (P(T > |t|), P(T ≤ |t|))
fn t_tails(t: f64, nu: f64) -> (f64, f64) {
    if t.is_infinite() {
        return (0.0, 1.0);
    }
    let t2 = t * t;
    let x = nu / (nu + t2);
    let y = t2 / (nu + t2);
    let (ix, cx) = inc_beta_pair(x, y, 0.5 * nu, 0.5);
    let tail = 0.5 * ix;
    (tail, 0.5 + 0.5 * cx)
}

pub fn student_t_pdf(t: f64, nu: f64) -> f64 {
    let ln = ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p();
    ln.exp()
}

/// The `p` quantile of Student-t by bracketing and bisection.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(nu > 0.0) {
        return Err(Error::Domain(format!("t quantile needs p in (0,1) and nu > 0 (got p={p}, nu={nu})")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut lo = -1.0;
    let mut hi = 1.0;
    while student_t_cdf(lo, nu) > p {
        hi = lo;
        lo *= 2.0;
        if lo < -1e300 {
            return Err(Error::Domain(format!("t quantile for p={p} out of range")));
        }
    }
    while student_t_cdf(hi, nu) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Domain(format!("t quantile for p={p} out of range")));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-14 * mid.abs().max(1.0) {
            break;
        }
        if student_t_cdf(mid, nu) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper `alpha` critical value `t_ν^{(α)}`.
pub fn t_critical(alpha: f64, nu: f64) -> Result<f64> {
    student_t_quantile(1.0 - alpha, nu)
}

// Tracks the alternating series sum and decides when the remaining tail is
// below tolerance using the decay of a log-envelope sampled two terms apart.
struct SeriesSum {
    opts: SeriesOptions,
    sum: f64,
    abs_sum: f64,
    prev_env: [f64; 2],
    last_term: f64,
}

impl SeriesSum {
    fn new(opts: SeriesOptions, start: f64) -> Self {
        Self {
            opts,
            sum: start,
            abs_sum: start.abs(),
            prev_env: [f64::NEG_INFINITY; 2],
            last_term: 0.0,
        }
    }

    /// Adds term `j` with log-magnitude bound `ln_env`. Returns true once converged.
    fn push(&mut self, j: usize, term: f64, ln_env: f64) -> bool {
        self.sum += term;
        self.abs_sum += term.abs();
        self.last_term = term;
        let slot = j % 2;
        let prev = self.prev_env[slot];
        self.prev_env[slot] = ln_env;
        if ln_env < -745.0 && prev > ln_env {
            return true;
        }
        if !(prev > ln_env) {
            return false;
        }
        let ratio = (ln_env - prev).exp();
        // geometric bound on both parities of the remaining terms
        let tail = 2.0 * ln_env.exp() / (1.0 - ratio);
        // below tolerance, or below the rounding noise already in the sum
        tail <= (self.opts.tol * self.sum.abs()).max(f64::EPSILON * self.abs_sum)
    }

    /// The sum, with values inside its own rounding noise reported as zero.
    fn value(&self) -> f64 {
        if self.sum.abs() <= 8.0 * f64::EPSILON * self.abs_sum {
            0.0
        } else {
            self.sum
        }
    }

    fn fail(&self, terms: usize) -> Error {
        Error::NonConvergence {
            terms,
            partial_sum: self.sum,
            last_term: self.last_term,
        }
    }
}

/// First index `j ≥ j0` from which the unimodal log-weights `ln_w` matter.
/// Skipped terms lie on the rising side with total mass below about 1e-20.
fn first_significant(j0: usize, ln_w: impl Fn(usize) -> f64) -> usize {
    let negligible = |j: usize| {
        let w = ln_w(j);
        w + (2.0 * (j + 1) as f64).ln() < -46.0 && ln_w(j + 1) > w
    };
    if !negligible(j0) {
        return j0;
    }
    let (mut lo, mut hi) = (j0, j0 + 1);
    while negligible(hi) {
        lo = hi;
        hi = j0 + 2 * (hi - j0);
        if hi > 1 << 52 {
            return hi;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if negligible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `(−1)^j + I_z(a, b)` evaluated without cancellation for odd `j`.
fn signed_beta(j: usize, z: f64, y: f64, a: f64, b: f64) -> f64 {
    let (i, ci) = inc_beta_pair(z, y, a, b);
    if j.is_multiple_of(2) {
        1.0 + i
    } else {
        -ci
    }
}

/// Noncentral Student-t CDF `P(t_{ν,δ} ≤ t)` with default series options.
pub fn noncentral_t_cdf(t: f64, nu: f64, delta: f64) -> Result<f64> {
    noncentral_t_cdf_with(t, nu, delta, SeriesOptions::default())
}

pub fn noncentral_t_cdf_with(t: f64, nu: f64, delta: f64, opts: SeriesOptions) -> Result<f64> {
    if !(nu > 0.0) || t.is_nan() || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "noncentral t needs nu > 0 and finite delta (got nu={nu}, delta={delta})"
        )));
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    if t == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if delta == 0.0 {
        return Ok(student_t_cdf(t, nu));
    }
    if t < 0.0 {
        let upper = noncentral_t_cdf_nonneg(-t, nu, -delta, opts)?;
        return Ok((1.0 - upper).clamp(0.0, 1.0));
    }
    Ok(noncentral_t_cdf_nonneg(t, nu, delta, opts)?.clamp(0.0, 1.0))
}

fn noncentral_t_cdf_nonneg(t: f64, nu: f64, delta: f64, opts: SeriesOptions) -> Result<f64> {
    let t2 = t * t;
    let z = t2 / (t2 + nu);
    let y = nu / (t2 + nu);
    let half_d2 = 0.5 * delta * delta;
    let ln_half_d2 = half_d2.ln();
    let negative = delta < 0.0;
    let ln_weight =
        |j: usize| 0.5 * j as f64 * ln_half_d2 - ln_gamma(0.5 * j as f64 + 1.0) - half_d2 - std::f64::consts::LN_2;
    let start = first_significant(0, ln_weight);
    let mut series = SeriesSum::new(opts, 0.0);
    for j in start..start.saturating_add(opts.max_terms) {
        let jf = j as f64;
        let ln_w = ln_weight(j);
        let sign = if negative && j % 2 == 1 { -1.0 } else { 1.0 };
        let term = sign * ln_w.exp() * signed_beta(j, z, y, 0.5 * (jf + 1.0), 0.5 * nu);
        if series.push(j, term, ln_w) {
            return Ok(series.value());
        }
    }
    Err(series.fail(opts.max_terms))
}

/// `E[P(t_{v−1,W} ≤ t)]` for `W = c·χ_v`, by the exact series, with default
/// series options. Only `t ≥ 0` is supported.
pub fn mixture_cdf_exact(t: f64, v: u64, c: f64) -> Result<f64> {
    mixture_cdf_exact_with(t, v, c, SeriesOptions::default())
}

pub fn mixture_cdf_exact_with(t: f64, v: u64, c: f64, opts: SeriesOptions) -> Result<f64> {
    if v < 2 {
        return Err(Error::Domain(format!("mixture needs v >= 2, got {v}")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("mixture needs finite c >= 0, got {c}")));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("exact mixture series is defined for t >= 0, got {t}")));
    }
    let vf = v as f64;
    let nu = vf - 1.0;
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    let base = student_t_cdf(t, nu);
    if c == 0.0 {
        return Ok(base);
    }
    let c2 = c * c;
    let ln_pref = -0.5 * vf * c2.ln_1p();
    let ln_r2 = c2.ln() - c2.ln_1p();
    let t2 = t * t;
    let z = t2 / (t2 + nu);
    let y = nu / (t2 + nu);
    let ln_weight = |j: usize| {
        let jf = j as f64;
        ln_pref + 0.5 * jf * ln_r2 - jf.ln() - ln_beta(0.5 * jf, 0.5 * vf)
    };
    let start = first_significant(1, ln_weight);
    let mut series = SeriesSum::new(opts, ln_pref.exp() * base);
    for j in start..start.saturating_add(opts.max_terms) {
        let jf = j as f64;
        let ln_w = ln_weight(j);
        let term = ln_w.exp() * signed_beta(j, z, y, 0.5 * (jf + 1.0), 0.5 * nu);
        if series.push(j, term, ln_w) {
            return Ok(series.value().clamp(0.0, 1.0));
        }
    }
    Err(series.fail(opts.max_terms))
}

fn check_power_args(n: usize, alpha: f64) -> Result<u64> {
    if n < 4 {
        return Err(Error::SampleTooSmall(n));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(degrees_v(n))
}

/// `v = n(n−3)/2`.
pub fn degrees_v(n: usize) -> u64 {
    (n as u64 * (n as u64).saturating_sub(3)) / 2
}

/// Finite-sample power `Power_n(φ)` of the level-`alpha` studentized test.
pub fn power_n(phi: f64, n: usize, alpha: f64) -> Result<f64> {
    power_n_with(phi, n, alpha, SeriesOptions::default())
}

pub fn power_n_with(phi: f64, n: usize, alpha: f64, opts: SeriesOptions) -> Result<f64> {
    let v = check_power_args(n, alpha)?;
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::Domain(format!("phi must lie in [0,1), got {phi}")));
    }
    let tq = t_critical(alpha, v as f64 - 1.0)?;
    let c = phi / (1.0 - phi * phi).sqrt();
    Ok(1.0 - mixture_cdf_exact_with(tq, v, c, opts)?)
}

/// Local-alternative limit `Power_∞(φ₀) = P(t_{v−1,φ₀} > t_{v−1}^{(α)})`.
pub fn power_inf(phi0: f64, n: usize, alpha: f64) -> Result<f64> {
    power_inf_with(phi0, n, alpha, SeriesOptions::default())
}

pub fn power_inf_with(phi0: f64, n: usize, alpha: f64, opts: SeriesOptions) -> Result<f64> {
    let v = check_power_args(n, alpha)?;
    if !(phi0 >= 0.0) || !phi0.is_finite() {
        return Err(Error::Domain(format!("phi0 must be finite and nonnegative, got {phi0}")));
    }
    let nu = v as f64 - 1.0;
    let tq = t_critical(alpha, nu)?;
    Ok(1.0 - noncentral_t_cdf_with(tq, nu, phi0, opts)?)
}
