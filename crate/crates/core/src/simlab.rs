//! Scenario generators and the seeded Monte Carlo driver.
//!
//! Replicate `r` of a run with master seed `s` draws its data from ChaCha8
//! seeded with `s` on stream `r`; the permutation seed of that replicate is
//! the next `u64` of the same stream. Results therefore do not depend on
//! thread count or scheduling.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::centering::SampleMatrix;
use crate::error::{Error, Result};
use crate::estimators::{prepare, PreparedPair, Statistic};
use crate::inference::{permutation_test_prepared, t_test_prepared, Regime, TestResult};

/// Identifies the generator family in reports.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9), stream = replicate index, normals by ziggurat";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Example {
    Ex1I,
    Ex1Ii,
    Ex1Iii,
    Ex2I,
    Ex2Ii,
    Ex2Iii,
    Ex3I,
    Ex3Ii,
    Ex3Iii,
    Ex4I,
    Ex4Ii,
    Ex4Iii,
}

impl Example {
    pub const ALL: [Example; 12] = [
        Example::Ex1I,
        Example::Ex1Ii,
        Example::Ex1Iii,
        Example::Ex2I,
        Example::Ex2Ii,
        Example::Ex2Iii,
        Example::Ex3I,
        Example::Ex3Ii,
        Example::Ex3Iii,
        Example::Ex4I,
        Example::Ex4Ii,
        Example::Ex4Iii,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Example::Ex1I => "ex1-i",
            Example::Ex1Ii => "ex1-ii",
            Example::Ex1Iii => "ex1-iii",
            Example::Ex2I => "ex2-i",
            Example::Ex2Ii => "ex2-ii",
            Example::Ex2Iii => "ex2-iii",
            Example::Ex3I => "ex3-i",
            Example::Ex3Ii => "ex3-ii",
            Example::Ex3Iii => "ex3-iii",
            Example::Ex4I => "ex4-i",
            Example::Ex4Ii => "ex4-ii",
            Example::Ex4Iii => "ex4-iii",
        }
    }

    /// True for the independence scenarios.
    pub fn is_null(self) -> bool {
        matches!(self, Example::Ex1I | Example::Ex1Ii | Example::Ex1Iii)
    }

    fn default_params(self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self {
            Example::Ex1Ii => {
                m.insert("phi".into(), 0.5);
            }
            Example::Ex1Iii | Example::Ex3Ii => {
                m.insert("toeplitz".into(), 0.7);
            }
            Example::Ex2I | Example::Ex2Iii => {
                m.insert("rho".into(), 0.5);
            }
            Example::Ex2Ii => {
                m.insert("rho".into(), 0.7);
            }
            _ => {}
        }
        m
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Example::ALL.into_iter().find(|e| e.name() == key).ok_or_else(|| {
            let names: Vec<&str> = Example::ALL.iter().map(|e| e.name()).collect();
            Error::InvalidInput(format!("unknown scenario '{}' (valid: {})", s.trim(), names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub params: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    /// Scenario with `q = p` and the default parameters of the example.
    pub fn new(example: Example, n: usize, p: usize) -> Result<Self> {
        let spec = Self {
            example,
            n,
            p,
            q: p,
            params: example.default_params(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_q(mut self, q: usize) -> Result<Self> {
        self.q = q;
        self.validate()?;
        Ok(self)
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Result<Self> {
        if !self.params.contains_key(key) {
            return Err(Error::InvalidInput(format!(
                "scenario {} has no parameter '{key}'",
                self.example
            )));
        }
        self.params.insert(key.to_string(), value);
        self.validate()?;
        Ok(self)
    }

    fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::SampleTooSmall(self.n));
        }
        if self.p == 0 || self.q == 0 {
            return Err(Error::InvalidInput("dimensions p and q must be positive".into()));
        }
        if !self.example.is_null() && self.p != self.q {
            return Err(Error::InvalidInput(format!(
                "scenario {} needs q == p (got p={}, q={})",
                self.example, self.p, self.q
            )));
        }
        if self.example == Example::Ex2Iii && !self.p.is_multiple_of(5) {
            return Err(Error::InvalidInput(format!(
                "scenario ex2-iii needs p divisible by 5, got {}",
                self.p
            )));
        }
        for (k, &v) in &self.params {
            let ok = match k.as_str() {
                "phi" | "toeplitz" => v.is_finite() && v.abs() < 1.0,
                "rho" => (0.0..=1.0).contains(&v),
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidInput(format!("parameter {k} = {v} out of range")));
            }
        }
        Ok(())
    }

    /// Precomputes what the scenario needs once (Cholesky factors).
    pub fn generator(&self) -> Result<Generator> {
        self.validate()?;
        let chol = match self.example {
            Example::Ex1Iii | Example::Ex3Ii => Some(toeplitz_cholesky(self.p.max(self.q), self.param("toeplitz"))?),
            _ => None,
        };
        Ok(Generator {
            spec: self.clone(),
            chol,
        })
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={}, p={}, q={})", self.example, self.n, self.p, self.q)
    }
}

/// The fixed 5×5 orthogonal mixing block of ex2-iii, row-major.
pub fn ex2_block() -> [[f64; 5]; 5] {
    let s = f64::sqrt;
    [
        [0.0, s(0.25), s(0.2), -s(0.25), -s(0.3)],
        [s(1.0 / 6.0), s(0.25), s(0.2), s(0.25), s(2.0 / 15.0)],
        [-s(2.0 / 3.0), 0.0, s(0.2), 0.0, s(2.0 / 15.0)],
        [s(1.0 / 6.0), -s(0.25), s(0.2), -s(0.25), s(2.0 / 15.0)],
        [0.0, -s(0.25), s(0.2), s(0.25), -s(0.3)],
    ]
}

/// Lower Cholesky factor of `σ_ij = base^{|i−j|}`, row-major `d × d`.
pub fn toeplitz_cholesky(d: usize, base: f64) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let sigma = base.powi((i - j) as i32);
            let dot: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = sigma - dot;
                if v <= 0.0 {
                    return Err(Error::Domain("covariance is not positive definite".into()));
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (sigma - dot) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone)]
pub struct Generator {
    spec: ScenarioSpec,
    chol: Option<Vec<f64>>,
}

fn normals<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| StandardNormal.sample(rng)).collect()
}

impl Generator {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    fn correlated_row<R: Rng>(&self, rng: &mut R, d: usize) -> Vec<f64> {
        let l = self.chol.as_ref().expect("cholesky factor");
        let full = self.spec.p.max(self.spec.q);
        let z = normals(rng, d);
        (0..d)
            .map(|i| (0..=i).map(|k| l[i * full + k] * z[k]).sum())
            .collect()
    }

    fn ar_row<R: Rng>(rng: &mut R, d: usize, phi: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(d);
        let z: f64 = StandardNormal.sample(rng);
        let mut prev = z / (1.0 - phi * phi).sqrt();
        row.push(prev);
        for _ in 1..d {
            let e: f64 = StandardNormal.sample(rng);
            prev = phi * prev + e;
            row.push(prev);
        }
        row
    }

    /// Draws one `(X, Y)` pair of `n` rows.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> (SampleMatrix, SampleMatrix) {
        let ScenarioSpec { n, p, q, .. } = self.spec;
        let mut xs = Vec::with_capacity(n * p);
        let mut ys = Vec::with_capacity(n * q);
        for _ in 0..n {
            let (x, y) = self.draw_row(rng);
            xs.extend(x);
            ys.extend(y);
        }
        (
            SampleMatrix::new(n, p, xs).expect("finite draws"),
            SampleMatrix::new(n, q, ys).expect("finite draws"),
        )
    }

    fn draw_row<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let ScenarioSpec { p, q, .. } = self.spec;
        match self.spec.example {
            Example::Ex1I => (normals(rng, p), normals(rng, q)),
            Example::Ex1Ii => {
                let phi = self.spec.param("phi");
                let x = Self::ar_row(rng, p, phi);
                (x, Self::ar_row(rng, q, -phi))
            }
            Example::Ex1Iii => {
                let x = self.correlated_row(rng, p);
                (x, self.correlated_row(rng, q))
            }
            Example::Ex2I | Example::Ex2Ii => {
                let rho = self.spec.param("rho");
                let x = normals(rng, p);
                let z = normals(rng, p);
                let norm = (rho * rho + (1.0 - rho) * (1.0 - rho)).sqrt();
                let y = x.iter().zip(&z).map(|(a, b)| (rho * a + (1.0 - rho) * b) / norm).collect();
                (x, y)
            }
            Example::Ex2Iii => {
                let rho = self.spec.param("rho");
                let a = ex2_block();
                let x = normals(rng, p);
                let z = normals(rng, p);
                let norm = (rho * rho + (1.0 - rho) * (1.0 - rho)).sqrt();
                let mut y = vec![0.0; p];
                for block in 0..p / 5 {
                    let o = 5 * block;
                    for k in 0..5 {
                        let mixed: f64 = (0..5).map(|l| a[k][l] * x[o + l]).sum();
                        y[o + k] = (rho * mixed + (1.0 - rho) * z[o + k]) / norm;
                    }
                }
                (x, y)
            }
            Example::Ex3I => {
                let x = normals(rng, p);
                let y = x.iter().map(|v| v * v).collect();
                (x, y)
            }
            Example::Ex3Ii => {
                let x = self.correlated_row(rng, p);
                let y = x.iter().map(|v| v * v).collect();
                (x, y)
            }
            Example::Ex3Iii => {
                // a standard normal is never exactly 0 in practice; guard anyway
                let x: Vec<f64> = (0..p)
                    .map(|_| loop {
                        let v: f64 = StandardNormal.sample(rng);
                        if v != 0.0 {
                            break v;
                        }
                    })
                    .collect();
                let y = x.iter().map(|v| v.abs().ln()).collect();
                (x, y)
            }
            Example::Ex4I => {
                let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = x.iter().map(|v| v * v).collect();
                (x, y)
            }
            Example::Ex4Ii => {
                let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
                let y = x.iter().map(|v| 4.0 * v * v * v - 3.6 * v + 0.8).collect();
                (x, y)
            }
            Example::Ex4Iii => {
                let z: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                (z.iter().map(|v| v.sin()).collect(), z.iter().map(|v| v.cos()).collect())
            }
        }
    }
}

/// One data set from `spec` under `seed`.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<(SampleMatrix, SampleMatrix)> {
    let g = spec.generator()?;
    Ok(g.draw(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Generator state of replicate `r` under `master_seed`.
pub fn replicate_rng(master_seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(r as u64);
    rng
}

/// Data of replicate `r` plus the permutation seed assigned to it.
pub fn replicate_data(g: &Generator, master_seed: u64, r: usize) -> (SampleMatrix, SampleMatrix, u64) {
    let mut rng = replicate_rng(master_seed, r);
    let (x, y) = g.draw(&mut rng);
    (x, y, rng.next_u64())
}

/// Runs `f` on every replicate in parallel; results come back in replicate order.
pub fn map_replicates<T, F>(spec: &ScenarioSpec, replicates: usize, master_seed: u64, f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(usize, &SampleMatrix, &SampleMatrix, u64) -> Result<T> + Sync,
{
    let g = spec.generator()?;
    Ok((0..replicates)
        .into_par_iter()
        .map(|r| {
            let (x, y, seed) = replicate_data(&g, master_seed, r);
            f(r, &x, &y, seed)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Studentized,
    Permutation,
}

/// A statistic paired with the way its null distribution is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub statistic: Statistic,
    pub test: TestKind,
}

impl MethodSpec {
    pub fn t(statistic: Statistic) -> Self {
        Self {
            statistic,
            test: TestKind::Studentized,
        }
    }

    pub fn perm(statistic: Statistic) -> Self {
        Self {
            statistic,
            test: TestKind::Permutation,
        }
    }

    /// `t-dcov`, `perm-mhcov-laplacian`, ...
    pub fn label(&self) -> String {
        let prefix = match self.test {
            TestKind::Studentized => "t",
            TestKind::Permutation => "perm",
        };
        format!("{prefix}-{}", self.statistic.label())
    }

    /// The twelve methods of the size and power tables: permutation and
    /// studentized versions of dCov, mdCov, and Gaussian/Laplacian hCov, mhCov.
    pub fn table_methods() -> Vec<MethodSpec> {
        use crate::kernels::KernelFamily::{Gaussian, Laplacian};
        let mut out = Vec::new();
        for (joint, marginal) in [
            (Statistic::Dcov, Statistic::Mdcov),
            (Statistic::hcov(Gaussian), Statistic::mhcov(Gaussian)),
            (Statistic::hcov(Laplacian), Statistic::mhcov(Laplacian)),
        ] {
            out.extend([
                MethodSpec::perm(joint),
                MethodSpec::perm(marginal),
                MethodSpec::t(joint),
                MethodSpec::t(marginal),
            ]);
        }
        out
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(rest) = s.strip_prefix("t-") {
            Ok(MethodSpec::t(rest.parse()?))
        } else if let Some(rest) = s.strip_prefix("perm-") {
            Ok(MethodSpec::perm(rest.parse()?))
        } else {
            Err(Error::InvalidInput(format!(
                "method '{s}' needs a t- or perm- prefix (e.g. t-dcov, perm-mhcov-laplacian)"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub spec: ScenarioSpec,
    pub methods: Vec<MethodSpec>,
    pub alphas: Vec<f64>,
    pub replicates: usize,
    pub permutations: usize,
    pub regime: Regime,
    pub master_seed: u64,
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidInput("alphas must be non-empty and lie in (0,1)".into()));
        }
        if self.permutations == 0 && self.methods.iter().any(|m| m.test == TestKind::Permutation) {
            return Err(Error::InvalidInput("permutation methods need at least 1 permutation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub scenario: ScenarioSpec,
    pub replicates: usize,
    pub methods: Vec<String>,
    pub alphas: Vec<f64>,
    /// `rejections[m][a]` counts replicates where method `m` rejected at `alphas[a]`.
    pub rejections: Vec<Vec<usize>>,
    pub rejection_rates: Vec<Vec<f64>>,
    pub standard_errors: Vec<Vec<f64>>,
    /// Replicates skipped because an estimator returned an error.
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub permutations: usize,
    pub regime: Regime,
    pub master_seed: u64,
    pub rng: &'static str,
    pub wall_time: f64,
}

impl MonteCarloReport {
    pub fn rate(&self, method: &str, alpha: f64) -> Option<f64> {
        let m = self.methods.iter().position(|l| l == method)?;
        let a = self.alphas.iter().position(|&x| x == alpha)?;
        Some(self.rejection_rates[m][a])
    }

    pub fn stderr(&self, method: &str, alpha: f64) -> Option<f64> {
        let m = self.methods.iter().position(|l| l == method)?;
        let a = self.alphas.iter().position(|&x| x == alpha)?;
        Some(self.standard_errors[m][a])
    }
}

/// Runs every method of `config` on one data set.
pub fn run_methods(
    methods: &[MethodSpec],
    x: &SampleMatrix,
    y: &SampleMatrix,
    regime: Regime,
    permutations: usize,
    perm_seed: u64,
) -> Result<Vec<TestResult>> {
    let mut prepared: Vec<(Statistic, PreparedPair)> = Vec::new();
    let mut out = Vec::with_capacity(methods.len());
    for m in methods {
        let idx = match prepared.iter().position(|(s, _)| *s == m.statistic) {
            Some(i) => i,
            None => {
                prepared.push((m.statistic, prepare(&m.statistic, x, y)?));
                prepared.len() - 1
            }
        };
        let prep = &prepared[idx].1;
        out.push(match m.test {
            TestKind::Studentized => t_test_prepared(prep, &m.statistic, regime),
            TestKind::Permutation => permutation_test_prepared(prep, &m.statistic, permutations, perm_seed)?,
        });
    }
    Ok(out)
}

/// Rejection-rate table for `config`.
pub fn monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let start = Instant::now();
    let alphas = &config.alphas;
    let per_replicate = map_replicates(&config.spec, config.replicates, config.master_seed, |_, x, y, seed| {
        let results = run_methods(&config.methods, x, y, config.regime, config.permutations, seed)?;
        Ok(results
            .iter()
            .map(|t| alphas.iter().map(|&a| t.rejects(a)).collect::<Vec<bool>>())
            .collect::<Vec<_>>())
    })?;
    let m = config.methods.len();
    let k = alphas.len();
    let mut rejections = vec![vec![0usize; k]; m];
    let mut failures = 0;
    let mut failure_messages = Vec::new();
    for (r, outcome) in per_replicate.into_iter().enumerate() {
        match outcome {
            Ok(table) => {
                for (i, row) in table.iter().enumerate() {
                    for (j, &rej) in row.iter().enumerate() {
                        rejections[i][j] += usize::from(rej);
                    }
                }
            }
            Err(e) => {
                failures += 1;
                if failure_messages.len() < 10 {
                    failure_messages.push(format!("replicate {r}: {e}"));
                }
            }
        }
    }
    let effective = config.replicates - failures;
    let (rates, ses): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rejections
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| {
                    if effective == 0 {
                        return (f64::NAN, f64::NAN);
                    }
                    let r = c as f64 / effective as f64;
                    (r, (r * (1.0 - r) / effective as f64).sqrt())
                })
                .unzip()
        })
        .unzip();
    Ok(MonteCarloReport {
        scenario: config.spec.clone(),
        replicates: config.replicates,
        methods: config.methods.iter().map(MethodSpec::label).collect(),
        alphas: alphas.clone(),
        rejections,
        rejection_rates: rates,
        standard_errors: ses,
        failures,
        failure_messages,
        permutations: config.permutations,
        regime: config.regime,
        master_seed: config.master_seed,
        rng: RNG_ALGORITHM,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Studentized statistics `T_R` of each statistic over `replicates` draws.
/// Returns one vector per statistic, in replicate order; degenerate draws are
/// skipped.
pub fn null_samples(
    spec: &ScenarioSpec,
    statistics: &[Statistic],
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be at least 1".into()));
    }
    let rows = map_replicates(spec, replicates, master_seed, |_, x, y, _| {
        statistics
            .iter()
            .map(|s| {
                let t = t_test_prepared(&prepare(s, x, y)?, s, Regime::Hdlss);
                Ok((!t.degenerate).then_some(t.value))
            })
            .collect::<Result<Vec<Option<f64>>>>()
    })?;
    let mut out = vec![Vec::with_capacity(replicates); statistics.len()];
    for row in rows {
        for (k, v) in row?.into_iter().enumerate() {
            if let Some(v) = v {
                out[k].push(v);
            }
        }
    }
    Ok(out)
}
