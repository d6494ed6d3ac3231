//! Studentized and permutation independence tests.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::centering::SampleMatrix;
use crate::error::{Error, Result};
use crate::estimators::{prepare, PreparedPair, Statistic};
use crate::specialfn::{degrees_v, normal_sf, student_t_sf};

const R_STAR_CLAMP: f64 = 1e-12;

/// Null reference of the studentized statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Student-t with `v − 1` degrees of freedom.
    Hdlss,
    /// Standard normal.
    Hdmss,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Hdlss => "hdlss",
            Regime::Hdmss => "hdmss",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hdlss" => Ok(Regime::Hdlss),
            "hdmss" => Ok(Regime::Hdmss),
            other => Err(Error::InvalidInput(format!("unknown regime '{other}' (expected hdlss or hdmss)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    StudentT { df: u64 },
    StandardNormal,
    Permutation { permutations: usize },
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::StudentT { df } => write!(f, "student-t({df})"),
            Reference::StandardNormal => f.write_str("standard-normal"),
            Reference::Permutation { permutations } => write!(f, "permutation({permutations})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: Statistic,
    /// `T_R` for studentized tests, the raw statistic for permutation tests.
    pub value: f64,
    /// The unstudentized statistic.
    pub raw: f64,
    pub r_star: Option<f64>,
    pub reference: Reference,
    pub p_value: f64,
    pub v: u64,
    pub seed: Option<u64>,
    pub degenerate: bool,
    /// The reference law is not backed by theory (mhCov with data-driven bandwidths).
    pub heuristic: bool,
}

impl TestResult {
    /// Rejects at level `alpha` iff `p ≤ alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }

    /// `(alpha, reject)` for each level.
    pub fn decisions(&self, alphas: &[f64]) -> Vec<(f64, bool)> {
        alphas.iter().map(|&a| (a, self.rejects(a))).collect()
    }
}

/// `T_R = √(v−1) R*/√(1 − R*²)` with `R* = rxy/√(rxx·ryy)` clamped to
/// `[−1 + 1e-12, 1 − 1e-12]`.
pub fn studentized_statistic(rxy: f64, rxx: f64, ryy: f64, n: usize) -> Result<f64> {
    studentize(r_star(rxy, rxx, ryy)?, n)
}

fn r_star(rxy: f64, rxx: f64, ryy: f64) -> Result<f64> {
    if !(rxx > 0.0 && ryy > 0.0) {
        return Err(Error::Degenerate(format!(
            "self-dependence must be positive (got {rxx:e}, {ryy:e})"
        )));
    }
    Ok((rxy / (rxx * ryy).sqrt()).clamp(-1.0 + R_STAR_CLAMP, 1.0 - R_STAR_CLAMP))
}

fn studentize(r: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::SampleTooSmall(n));
    }
    let v = degrees_v(n) as f64;
    Ok((v - 1.0).sqrt() * r / ((1.0 - r) * (1.0 + r)).sqrt())
}

fn is_heuristic(stat: &Statistic) -> bool {
    matches!(stat, Statistic::Mhcov { .. })
}

/// Studentized test with the `t_{v−1}` (HDLSS) or standard normal (HDMSS)
/// reference, one-sided in the upper tail.
pub fn t_test(x: &SampleMatrix, y: &SampleMatrix, stat: &Statistic, regime: Regime) -> Result<TestResult> {
    Ok(t_test_prepared(&prepare(stat, x, y)?, stat, regime))
}

/// As [`t_test`] on an already prepared pair.
pub fn t_test_prepared(prep: &PreparedPair, stat: &Statistic, regime: Regime) -> TestResult {
    let n = prep.n();
    let v = degrees_v(n);
    let reference = match regime {
        Regime::Hdlss => Reference::StudentT { df: v - 1 },
        Regime::Hdmss => Reference::StandardNormal,
    };
    let raw = prep.statistic();
    let (rxx, ryy) = prep.self_inner();
    let mut result = TestResult {
        statistic: *stat,
        value: 0.0,
        raw,
        r_star: None,
        reference,
        p_value: 1.0,
        v,
        seed: None,
        degenerate: true,
        heuristic: is_heuristic(stat),
    };
    if prep.degenerate {
        return result;
    }
    let Ok(r) = r_star(raw / prep.scale, rxx, ryy) else {
        return result;
    };
    let t = studentize(r, n).expect("n >= 4 after prepare");
    result.value = t;
    result.r_star = Some(r);
    result.degenerate = false;
    result.p_value = match regime {
        Regime::Hdlss => student_t_sf(t, (v - 1) as f64),
        Regime::Hdmss => normal_sf(t),
    }
    .clamp(0.0, 1.0);
    result
}

/// Uniform random permutation of `0..n` by Fisher–Yates.
pub fn random_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Generator for permutation `b` under `seed`; independent of scheduling.
pub fn permutation_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

/// Permutation test shuffling the rows of X, with
/// `p = (1 + #{b : stat_b ≥ stat_obs}) / (1 + B)`.
pub fn permutation_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    stat: &Statistic,
    permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    permutation_test_prepared(&prepare(stat, x, y)?, stat, permutations, seed)
}

/// As [`permutation_test`] on an already prepared pair.
pub fn permutation_test_prepared(
    prep: &PreparedPair,
    stat: &Statistic,
    permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    if permutations == 0 {
        return Err(Error::InvalidInput("number of permutations must be at least 1".into()));
    }
    let n = prep.n();
    let identity: Vec<usize> = (0..n).collect();
    // same summation order as the permuted statistics so ties compare equal
    let observed = prep.permuted_statistic(&identity);
    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map(|b| {
            let perm = random_permutation(n, &mut permutation_rng(seed, b));
            usize::from(prep.permuted_statistic(&perm) >= observed)
        })
        .sum();
    Ok(TestResult {
        statistic: *stat,
        value: observed,
        raw: observed,
        r_star: None,
        reference: Reference::Permutation { permutations },
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        v: degrees_v(n),
        seed: Some(seed),
        degenerate: prep.degenerate,
        heuristic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::specialfn::{normal_cdf, student_t_cdf};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(n: usize, d: usize, seed: u64) -> SampleMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleMatrix::new(n, d, (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap()
    }

    fn all_statistics() -> Vec<Statistic> {
        vec![
            Statistic::Dcov,
            Statistic::Mdcov,
            Statistic::hcov(KernelFamily::Gaussian),
            Statistic::hcov(KernelFamily::Laplacian),
            Statistic::mhcov(KernelFamily::Gaussian),
            Statistic::mhcov(KernelFamily::Laplacian),
        ]
    }

    #[test]
    fn studentized_values() {
        assert_eq!(studentized_statistic(0.0, 1.0, 2.0, 10).unwrap(), 0.0);
        let t = studentized_statistic(0.3, 1.0, 1.0, 10).unwrap();
        assert_relative_eq!(t, 34f64.sqrt() * 0.3 / 0.91f64.sqrt(), max_relative = 1e-14);
        assert!((t - 1.8338).abs() < 1e-4);
        assert!(studentized_statistic(0.1, 0.0, 1.0, 10).is_err());
        assert!(studentized_statistic(0.1, 1.0, -1.0, 10).is_err());
        let near_one = studentized_statistic(1.0, 1.0, 1.0, 10).unwrap();
        assert!(near_one.is_finite() && near_one > 1e6);
    }

    #[test]
    fn identical_samples_reject_strongly() {
        for stat in all_statistics() {
            let x = sample(10, 4, 3);
            let r = t_test(&x, &x, &stat, Regime::Hdlss).unwrap();
            assert!(r.p_value < 1e-6, "{stat:?}: {}", r.p_value);
            assert_eq!(r.heuristic, matches!(stat, Statistic::Mhcov { .. }));
        }
    }

    #[test]
    fn regimes_agree_for_large_v() {
        // n = 33 gives v = 495; n = 34 gives v = 527
        let v = degrees_v(34);
        assert!(v >= 500);
        for &t in &[0.5, 1.0, 1.645, 2.5] {
            let pt = 1.0 - student_t_cdf(t, (v - 1) as f64);
            let pn = 1.0 - normal_cdf(t);
            assert!((pt - pn).abs() < 0.005);
        }
        let x = sample(34, 5, 1);
        let y = sample(34, 5, 2);
        let a = t_test(&x, &y, &Statistic::Dcov, Regime::Hdlss).unwrap();
        let b = t_test(&x, &y, &Statistic::Dcov, Regime::Hdmss).unwrap();
        assert_eq!(a.value, b.value);
        assert!((a.p_value - b.p_value).abs() < 0.005);
        assert_eq!(b.reference, Reference::StandardNormal);
        assert_eq!(a.reference, Reference::StudentT { df: v - 1 });
    }

    #[test]
    fn degenerate_sample_gives_unit_p() {
        let x = SampleMatrix::new(8, 2, vec![3.0; 16]).unwrap();
        let y = sample(8, 2, 5);
        for stat in all_statistics() {
            let r = t_test(&x, &y, &stat, Regime::Hdlss).unwrap();
            assert_eq!(r.p_value, 1.0);
            assert!(r.degenerate);
            let r = permutation_test(&y, &x, &stat, 50, 1).unwrap();
            assert_eq!(r.p_value, 1.0);
        }
    }

    #[test]
    fn permutation_test_is_deterministic() {
        let x = sample(12, 3, 1);
        let y = sample(12, 3, 2);
        let a = permutation_test(&x, &y, &Statistic::Dcov, 99, 17).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| permutation_test(&x, &y, &Statistic::Dcov, 99, 17).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(17));
        assert!(permutation_test(&x, &y, &Statistic::Dcov, 0, 17).is_err());
    }

    #[test]
    fn permutation_matches_explicit_recomputation() {
        let x = sample(9, 3, 4);
        let y = sample(9, 2, 5);
        let stat = Statistic::Mdcov;
        let obs = crate::estimators::mdcov2(&x, &y).unwrap().value;
        let mut exceed = 0;
        for b in 0..40 {
            let perm = random_permutation(9, &mut permutation_rng(8, b));
            let xp = x.permute_rows(&perm).unwrap();
            let s = crate::estimators::mdcov2(&xp, &y).unwrap().value;
            // strict margins avoid ambiguity from summation order
            if s >= obs + 1e-12 * obs.abs() {
                exceed += 1;
            } else if s > obs - 1e-12 * obs.abs() {
                panic!("near tie at b={b}");
            }
        }
        let r = permutation_test(&x, &y, &stat, 40, 8).unwrap();
        assert_eq!(r.p_value, (1 + exceed) as f64 / 41.0);
    }

    #[test]
    fn fisher_yates_is_uniform_on_small_n() {
        let mut counts = std::collections::HashMap::new();
        let reps = 24_000;
        for b in 0..reps {
            let p = random_permutation(4, &mut permutation_rng(3, b));
            *counts.entry(p).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = reps as f64 / 24.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 23 degrees of freedom, 0.999 quantile is about 49.7
        assert!(chi2 < 49.7, "chi2 {chi2}");
    }

    #[test]
    fn permutation_p_values_are_valid_under_null() {
        let reps = 1500u64;
        let alphas = [0.01, 0.05, 0.1];
        let rejections: Vec<[usize; 3]> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let x = sample(10, 3, 2 * r);
                let y = sample(10, 3, 2 * r + 1);
                let t = permutation_test(&x, &y, &Statistic::Dcov, 99, r).unwrap();
                let mut out = [0; 3];
                for (k, &a) in alphas.iter().enumerate() {
                    out[k] = usize::from(t.rejects(a));
                }
                out
            })
            .collect();
        for (k, &a) in alphas.iter().enumerate() {
            let rate = rejections.iter().map(|r| r[k]).sum::<usize>() as f64 / reps as f64;
            let se = (a * (1.0 - a) / reps as f64).sqrt();
            assert!(rate <= a + 3.0 * se, "alpha {a}: rate {rate}");
        }
    }

    #[test]
    fn regime_parsing() {
        assert_eq!("HDLSS".parse::<Regime>().unwrap(), Regime::Hdlss);
        assert!("both".parse::<Regime>().is_err());
        assert_eq!(Reference::StudentT { df: 34 }.to_string(), "student-t(34)");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn studentized_is_monotone(a in -0.999f64..0.999, b in -0.999f64..0.999) {
            let ta = studentized_statistic(a, 1.0, 1.0, 12).unwrap();
            let tb = studentized_statistic(b, 1.0, 1.0, 12).unwrap();
            prop_assert_eq!(ta.signum() == a.signum() || a == 0.0, true);
            if a < b {
                prop_assert!(ta < tb);
            }
        }

        #[test]
        fn common_permutation_leaves_t_test_unchanged(seed in any::<u64>()) {
            let x = sample(10, 3, seed);
            let y = sample(10, 4, seed ^ 1);
            let perm = random_permutation(10, &mut permutation_rng(seed, 0));
            let xp = x.permute_rows(&perm).unwrap();
            let yp = y.permute_rows(&perm).unwrap();
            for stat in all_statistics() {
                let a = t_test(&x, &y, &stat, Regime::Hdlss).unwrap();
                let b = t_test(&xp, &yp, &stat, Regime::Hdlss).unwrap();
                prop_assert!((a.value - b.value).abs() <= 1e-10 * a.value.abs().max(1e-6));
                prop_assert!((a.p_value - b.p_value).abs() <= 1e-10);
            }
        }
    }
}
