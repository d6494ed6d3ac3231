//! Sample dependence statistics.
//!
//! All statistics are U-centered inner products `(Ã · B̃)` of pairwise
//! matrices. The marginal versions aggregate over coordinate pairs; by
//! bilinearity that aggregate equals the inner product of coordinate-summed
//! centered matrices, which is what [`PreparedPair`] stores for the tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::centering::{
    column_distance, column_product, gram_matrix, pairwise_distance, u_center, ucentered_inner, PairwiseKind,
    PairwiseMatrix, SampleMatrix, UCenteredMatrix,
};
use crate::error::{Error, Result};
use crate::kernels::{apply_kernel_with, Bandwidth, KernelFamily, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Dcov2,
    Dcor2,
    Hcov2,
    Hcor2,
    Mdcov2,
    Mhcov2,
    Ucov2,
    Rv,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dcov2 => "dcov2",
            Method::Dcor2 => "dcor2",
            Method::Hcov2 => "hcov2",
            Method::Hcor2 => "hcor2",
            Method::Mdcov2 => "mdcov2",
            Method::Mhcov2 => "mhcov2",
            Method::Ucov2 => "ucov2",
            Method::Rv => "rv",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceEstimate {
    pub value: f64,
    pub method: Method,
    pub kernels: Option<(KernelSpec, KernelSpec)>,
    pub meta: BTreeMap<String, f64>,
    /// Set when a constant sample or an undefined bandwidth forced the value to 0.
    pub degenerate: bool,
}

impl DependenceEstimate {
    fn new(method: Method, value: f64) -> Self {
        Self {
            value,
            method,
            kernels: None,
            meta: BTreeMap::new(),
            degenerate: false,
        }
    }
}

fn check_pair(x: &SampleMatrix, y: &SampleMatrix) -> Result<usize> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            x.n(),
            y.n()
        )));
    }
    if x.n() < 4 {
        return Err(Error::SampleTooSmall(x.n()));
    }
    Ok(x.n())
}

fn pairs(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

fn guarded_ratio(xy: f64, xx: f64, yy: f64) -> f64 {
    let d = xx * yy;
    if d > 0.0 {
        xy / d.sqrt()
    } else {
        0.0
    }
}

fn all_zero(m: &PairwiseMatrix) -> bool {
    m.entries().iter().all(|&v| v == 0.0)
}

fn centered_distance(x: &SampleMatrix) -> Result<UCenteredMatrix> {
    u_center(&pairwise_distance(x, 1)?)
}

/// Centered kernel matrix and its resolved bandwidth. A degenerate median
/// bandwidth yields the zero matrix and `None`.
fn centered_kernel(d: &PairwiseMatrix, spec: &KernelSpec) -> Result<(UCenteredMatrix, Option<f64>)> {
    if all_zero(d) {
        let g = match spec.bandwidth {
            Bandwidth::Fixed(g) => Some(g),
            Bandwidth::Median => None,
        };
        return Ok((UCenteredMatrix::zeros(d.n()), g));
    }
    match apply_kernel_with(d, spec) {
        Ok((k, g)) => Ok((u_center(&k)?, g)),
        Err(Error::Degenerate(_)) => Ok((UCenteredMatrix::zeros(d.n()), None)),
        Err(e) => Err(e),
    }
}

fn check_kernel(spec: &KernelSpec) -> Result<()> {
    if spec.family.uses_bandwidth() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "hCov needs a gaussian or laplacian kernel, got {}",
            spec.family
        )))
    }
}

/// Unbiased squared distance covariance `dCov_n²(X, Y)`.
pub fn dcov2(x: &SampleMatrix, y: &SampleMatrix) -> Result<DependenceEstimate> {
    check_pair(x, y)?;
    let dx = pairwise_distance(x, 1)?;
    let dy = pairwise_distance(y, 1)?;
    let v = ucentered_inner(&u_center(&dx)?, &u_center(&dy)?)?;
    let mut est = DependenceEstimate::new(Method::Dcov2, v);
    est.degenerate = all_zero(&dx) || all_zero(&dy);
    Ok(est)
}

/// Squared distance correlation; 0 when `dCov_n²(X,X)·dCov_n²(Y,Y) ≤ 0`.
pub fn dcor2(x: &SampleMatrix, y: &SampleMatrix) -> Result<DependenceEstimate> {
    check_pair(x, y)?;
    let a = centered_distance(x)?;
    let b = centered_distance(y)?;
    let xx = ucentered_inner(&a, &a)?;
    let yy = ucentered_inner(&b, &b)?;
    let mut est = DependenceEstimate::new(Method::Dcor2, guarded_ratio(ucentered_inner(&a, &b)?, xx, yy));
    est.degenerate = !(xx * yy > 0.0);
    Ok(est)
}

struct KernelPair {
    a: UCenteredMatrix,
    b: UCenteredMatrix,
    gx: Option<f64>,
    gy: Option<f64>,
}

fn kernel_pair(x: &SampleMatrix, y: &SampleMatrix, kx: &KernelSpec, ky: &KernelSpec) -> Result<KernelPair> {
    check_pair(x, y)?;
    check_kernel(kx)?;
    check_kernel(ky)?;
    let (a, gx) = centered_kernel(&pairwise_distance(x, 1)?, kx)?;
    let (b, gy) = centered_kernel(&pairwise_distance(y, 1)?, ky)?;
    Ok(KernelPair { a, b, gx, gy })
}

fn kernel_estimate(method: Method, value: f64, kp: &KernelPair, kx: &KernelSpec, ky: &KernelSpec) -> DependenceEstimate {
    let mut est = DependenceEstimate::new(method, value);
    est.kernels = Some((*kx, *ky));
    if let Some(g) = kp.gx {
        est.meta.insert("gamma_x".into(), g);
    }
    if let Some(g) = kp.gy {
        est.meta.insert("gamma_y".into(), g);
    }
    est.degenerate = kp.gx.is_none() || kp.gy.is_none() || kp.a.is_zero() || kp.b.is_zero();
    est
}

/// Hilbert-Schmidt covariance `hCov_n²(X, Y) = (R̃ · H̃)` with
/// `r_st = f(|X_s − X_t| / γ_X)`.
///
/// With a median bandwidth and a constant sample the bandwidth is undefined;
/// the statistic is then reported as 0 with `degenerate` set.
pub fn hcov2(x: &SampleMatrix, y: &SampleMatrix, kx: &KernelSpec, ky: &KernelSpec) -> Result<DependenceEstimate> {
    let kp = kernel_pair(x, y, kx, ky)?;
    let v = ucentered_inner(&kp.a, &kp.b)?;
    Ok(kernel_estimate(Method::Hcov2, v, &kp, kx, ky))
}

/// Hilbert-Schmidt correlation with the same zero guard as [`dcor2`].
pub fn hcor2(x: &SampleMatrix, y: &SampleMatrix, kx: &KernelSpec, ky: &KernelSpec) -> Result<DependenceEstimate> {
    let kp = kernel_pair(x, y, kx, ky)?;
    let xx = ucentered_inner(&kp.a, &kp.a)?;
    let yy = ucentered_inner(&kp.b, &kp.b)?;
    let v = guarded_ratio(ucentered_inner(&kp.a, &kp.b)?, xx, yy);
    let mut est = kernel_estimate(Method::Hcor2, v, &kp, kx, ky);
    est.degenerate |= !(xx * yy > 0.0);
    Ok(est)
}

/// Unbiased estimate of `cov²(x, y)` for two scalar columns.
pub fn covsq_pair(xi: &[f64], yj: &[f64]) -> Result<f64> {
    if xi.len() != yj.len() {
        return Err(Error::DimensionMismatch(format!(
            "columns of length {} and {}",
            xi.len(),
            yj.len()
        )));
    }
    if is_constant(xi) || is_constant(yj) {
        if xi.len() < 4 {
            return Err(Error::SampleTooSmall(xi.len()));
        }
        return Ok(0.0);
    }
    let a = u_center(&column_product(xi))?;
    let b = u_center(&column_product(yj))?;
    ucentered_inner(&a, &b)
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Centered Gram matrix; exactly zero for a sample with identical rows.
fn centered_gram(x: &SampleMatrix) -> Result<UCenteredMatrix> {
    if x.rows().all(|r| r == x.row(0)) {
        if x.n() < 4 {
            return Err(Error::SampleTooSmall(x.n()));
        }
        return Ok(UCenteredMatrix::zeros(x.n()));
    }
    u_center(&gram_matrix(x))
}

/// `Σ_i Σ_j covsq_pair(x_i, y_j)` in `O(n²(p + q))` via Gram matrices.
pub fn covsq_sum(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    check_pair(x, y)?;
    ucentered_inner(&centered_gram(x)?, &centered_gram(y)?)
}

fn centered_columns(x: &SampleMatrix, f: impl Fn(&[f64]) -> Result<UCenteredMatrix> + Sync) -> Result<Vec<UCenteredMatrix>> {
    x.columns().par_iter().map(|c| f(c)).collect()
}

fn marginal_double_sum(a: &[UCenteredMatrix], b: &[UCenteredMatrix]) -> Result<f64> {
    let rows: Vec<f64> = a
        .par_iter()
        .map(|ai| {
            let mut acc = 0.0;
            for bj in b {
                acc += ucentered_inner(ai, bj)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum())
}

/// Marginal distance covariance `√C(n,2) Σ_i Σ_j dCov_n²(x_i, y_j)`.
pub fn mdcov2(x: &SampleMatrix, y: &SampleMatrix) -> Result<DependenceEstimate> {
    let n = check_pair(x, y)?;
    let a = centered_columns(x, |c| u_center(&column_distance(c)))?;
    let b = centered_columns(y, |c| u_center(&column_distance(c)))?;
    let v = pairs(n).sqrt() * marginal_double_sum(&a, &b)?;
    let mut est = DependenceEstimate::new(Method::Mdcov2, v);
    est.degenerate = a.iter().all(UCenteredMatrix::is_zero) || b.iter().all(UCenteredMatrix::is_zero);
    Ok(est)
}

struct MarginalKernels {
    mats: Vec<UCenteredMatrix>,
    degenerate: usize,
}

fn marginal_kernels(x: &SampleMatrix, spec: &KernelSpec) -> Result<MarginalKernels> {
    let parts: Vec<(UCenteredMatrix, Option<f64>)> = x
        .columns()
        .par_iter()
        .map(|c| centered_kernel(&column_distance(c), spec))
        .collect::<Result<_>>()?;
    let degenerate = parts.iter().filter(|(_, g)| g.is_none()).count();
    Ok(MarginalKernels {
        mats: parts.into_iter().map(|(m, _)| m).collect(),
        degenerate,
    })
}

/// Marginal Hilbert-Schmidt covariance with per-coordinate bandwidths.
/// Coordinates whose median bandwidth is undefined contribute 0 and are
/// counted in `meta["degenerate_x_coords"]` / `meta["degenerate_y_coords"]`.
pub fn mhcov2(x: &SampleMatrix, y: &SampleMatrix, kx: &KernelSpec, ky: &KernelSpec) -> Result<DependenceEstimate> {
    let n = check_pair(x, y)?;
    check_kernel(kx)?;
    check_kernel(ky)?;
    let a = marginal_kernels(x, kx)?;
    let b = marginal_kernels(y, ky)?;
    let v = pairs(n).sqrt() * marginal_double_sum(&a.mats, &b.mats)?;
    let mut est = DependenceEstimate::new(Method::Mhcov2, v);
    est.kernels = Some((*kx, *ky));
    est.meta.insert("degenerate_x_coords".into(), a.degenerate as f64);
    est.meta.insert("degenerate_y_coords".into(), b.degenerate as f64);
    est.degenerate = a.degenerate == x.d() || b.degenerate == y.d();
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcovKernel {
    AbsDistance,
    SquaredDistance,
}

/// Coordinate-summed kernel matrix: L1 distance for `AbsDistance`, squared
/// Euclidean distance for `SquaredDistance`.
fn summed_kernel(x: &SampleMatrix, kernel: UcovKernel) -> Result<PairwiseMatrix> {
    match kernel {
        UcovKernel::SquaredDistance => pairwise_distance(x, 2),
        UcovKernel::AbsDistance => {
            let n = x.n();
            let mut e = vec![0.0; n * n];
            for s in 0..n {
                for t in (s + 1)..n {
                    let v: f64 = x.row(s).iter().zip(x.row(t)).map(|(a, b)| (a - b).abs()).sum();
                    e[s * n + t] = v;
                    e[t * n + s] = v;
                }
            }
            Ok(PairwiseMatrix::from_trusted(n, e, PairwiseKind::Distance))
        }
    }
}

/// `uCov_n² = (1/√(pq)) (K̄̃ · L̄̃)` for coordinate-summed kernels.
pub fn ucov2(x: &SampleMatrix, y: &SampleMatrix, kernel: UcovKernel) -> Result<DependenceEstimate> {
    check_pair(x, y)?;
    let a = u_center(&summed_kernel(x, kernel)?)?;
    let b = u_center(&summed_kernel(y, kernel)?)?;
    let v = ucentered_inner(&a, &b)? / ((x.d() * y.d()) as f64).sqrt();
    Ok(DependenceEstimate::new(Method::Ucov2, v))
}

/// RV coefficient built from the squared cross-covariance estimates.
pub fn rv_coefficient(x: &SampleMatrix, y: &SampleMatrix) -> Result<DependenceEstimate> {
    check_pair(x, y)?;
    let gx = centered_gram(x)?;
    let gy = centered_gram(y)?;
    let xx = ucentered_inner(&gx, &gx)?;
    let yy = ucentered_inner(&gy, &gy)?;
    let mut est = DependenceEstimate::new(Method::Rv, guarded_ratio(ucentered_inner(&gx, &gy)?, xx, yy));
    est.degenerate = !(xx * yy > 0.0);
    Ok(est)
}

/// `τ̂_X = √(mean over pairs s < t of |X_s − X_t|²)`. Returns 0 for a
/// constant sample.
pub fn tau_hat(x: &SampleMatrix) -> Result<f64> {
    let n = x.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!("tau needs at least 2 rows, got {n}")));
    }
    let d2 = pairwise_distance(x, 2)?;
    let total: f64 = d2.upper_triangle().iter().sum();
    Ok((total / pairs(n)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecompositionTarget {
    Dcov,
    ScaledHcov { kx: KernelSpec, ky: KernelSpec },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    /// `dCov_n²` or `τ̂·hCov_n²`.
    pub statistic: f64,
    pub leading_term: f64,
    pub remainder: f64,
    pub tau_hat: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    pub gamma_x: Option<f64>,
    pub gamma_y: Option<f64>,
    pub degenerate: bool,
}

impl DecompositionReport {
    /// `|remainder| / |leading_term|`, or `None` when the leading term is 0.
    pub fn ratio(&self) -> Option<f64> {
        (self.leading_term != 0.0).then(|| (self.remainder / self.leading_term).abs())
    }

    fn zero(tau_x: f64, tau_y: f64) -> Self {
        Self {
            statistic: 0.0,
            leading_term: 0.0,
            remainder: 0.0,
            tau_hat: tau_x * tau_y,
            tau_x,
            tau_y,
            gamma_x: None,
            gamma_y: None,
            degenerate: true,
        }
    }
}

/// Remainder `r` with `leading + r == stat` in floating point whenever such an
/// `r` exists. When `|leading|` dwarfs `|stat|` no float `r` may satisfy it; the
/// sum is then within one ulp of `max(|leading|, |r|)`.
pub(crate) fn exact_remainder(stat: f64, leading: f64) -> f64 {
    let mut r = stat - leading;
    for _ in 0..64 {
        let s = leading + r;
        if s == stat {
            return r;
        }
        let next = if s < stat { r.next_up() } else { r.next_down() };
        if (leading + next - stat).abs() > (s - stat).abs() {
            break;
        }
        r = next;
    }
    r
}

/// Splits `dCov_n²` (or `τ̂·hCov_n²`) into the aggregated squared
/// cross-covariance term and a remainder.
pub fn decompose(x: &SampleMatrix, y: &SampleMatrix, target: DecompositionTarget) -> Result<DecompositionReport> {
    check_pair(x, y)?;
    let tau_x = tau_hat(x)?;
    let tau_y = tau_hat(y)?;
    if tau_x == 0.0 || tau_y == 0.0 {
        return Ok(DecompositionReport::zero(tau_x, tau_y));
    }
    let tau = tau_x * tau_y;
    let base = covsq_sum(x, y)? / tau;
    let (statistic, leading, gamma_x, gamma_y) = match target {
        DecompositionTarget::Dcov => (dcov2(x, y)?.value, base, None, None),
        DecompositionTarget::ScaledHcov { kx, ky } => {
            let h = hcov2(x, y, &kx, &ky)?;
            let (Some(&gx), Some(&gy)) = (h.meta.get("gamma_x"), h.meta.get("gamma_y")) else {
                return Ok(DecompositionReport::zero(tau_x, tau_y));
            };
            let ax = tau_x / gx;
            let ay = tau_y / gy;
            let pref = kx.family.derivative(ax) * ky.family.derivative(ay) * ax * ay;
            (tau * h.value, pref * base, Some(gx), Some(gy))
        }
    };
    Ok(DecompositionReport {
        statistic,
        leading_term: leading,
        remainder: exact_remainder(statistic, leading),
        tau_hat: tau,
        tau_x,
        tau_y,
        gamma_x,
        gamma_y,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    Phi1,
    Phi2,
}

/// Plug-in signal ratio `Σ_{ij} R(x_i, y_j) / √(Σ_{ij} R(x_i, x_j) Σ_{ij} R(y_i, y_j))`
/// with `R = dCov_n²` for `Phi1` and `R = cov_n²` for `Phi2`, clipped to [−1, 1].
pub fn estimate_phi(x: &SampleMatrix, y: &SampleMatrix, kind: PhiKind) -> Result<f64> {
    check_pair(x, y)?;
    let (a, b) = match kind {
        PhiKind::Phi1 => (summed_centered_marginals(x)?, summed_centered_marginals(y)?),
        PhiKind::Phi2 => (centered_gram(x)?, centered_gram(y)?),
    };
    let xx = ucentered_inner(&a, &a)?;
    let yy = ucentered_inner(&b, &b)?;
    if !(xx > 0.0 && yy > 0.0) {
        return Err(Error::Degenerate("within-block dependence is not positive".into()));
    }
    Ok((ucentered_inner(&a, &b)? / (xx * yy).sqrt()).clamp(-1.0, 1.0))
}

/// `Σ_i Ũ(|x_i,s − x_i,t|)`; centering is linear, so this equals the
/// centered L1 distance matrix.
fn summed_centered_marginals(x: &SampleMatrix) -> Result<UCenteredMatrix> {
    u_center(&summed_kernel(x, UcovKernel::AbsDistance)?)
}

/// The four statistics that have studentized and permutation tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Dcov,
    Hcov { kx: KernelSpec, ky: KernelSpec },
    Mdcov,
    Mhcov { kx: KernelSpec, ky: KernelSpec },
}

impl Statistic {
    pub fn method(&self) -> Method {
        match self {
            Statistic::Dcov => Method::Dcov2,
            Statistic::Hcov { .. } => Method::Hcov2,
            Statistic::Mdcov => Method::Mdcov2,
            Statistic::Mhcov { .. } => Method::Mhcov2,
        }
    }

    pub fn hcov(family: KernelFamily) -> Self {
        let k = KernelSpec::new(family, Bandwidth::Median).expect("median spec");
        Statistic::Hcov { kx: k, ky: k }
    }

    pub fn mhcov(family: KernelFamily) -> Self {
        let k = KernelSpec::new(family, Bandwidth::Median).expect("median spec");
        Statistic::Mhcov { kx: k, ky: k }
    }

    pub fn kernels(&self) -> Option<(KernelSpec, KernelSpec)> {
        match *self {
            Statistic::Hcov { kx, ky } | Statistic::Mhcov { kx, ky } => Some((kx, ky)),
            _ => None,
        }
    }

    /// Short label such as `dcov`, `hcov-gaussian`, `mhcov-laplacian`.
    pub fn label(&self) -> String {
        match self {
            Statistic::Dcov => "dcov".into(),
            Statistic::Mdcov => "mdcov".into(),
            Statistic::Hcov { kx, .. } => format!("hcov-{}", kx.family),
            Statistic::Mhcov { kx, .. } => format!("mhcov-{}", kx.family),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    /// Parses `dcov`, `mdcov`, `hcov[-gaussian|-laplacian]`,
    /// `mhcov[-gaussian|-laplacian]`; kernels default to Gaussian.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (base, kernel) = match s.split_once('-') {
            Some((b, k)) => (b, Some(k)),
            None => (s.as_str(), None),
        };
        let family = kernel.map(str::parse::<KernelFamily>).transpose()?.unwrap_or(KernelFamily::Gaussian);
        match (base, kernel) {
            ("dcov", None) => Ok(Statistic::Dcov),
            ("mdcov", None) => Ok(Statistic::Mdcov),
            ("hcov", _) => Ok(Statistic::hcov(family)),
            ("mhcov", _) => Ok(Statistic::mhcov(family)),
            _ => Err(Error::InvalidInput(format!(
                "unknown method '{s}' (expected dcov, hcov, mdcov or mhcov)"
            ))),
        }
    }
}

/// Centered matrices `Ã`, `B̃` and a positive scale such that the statistic is
/// `scale · (Ã · B̃)`. Everything the tests need follows from this triple.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub a: UCenteredMatrix,
    pub b: UCenteredMatrix,
    pub scale: f64,
    pub meta: BTreeMap<String, f64>,
    pub degenerate: bool,
}

impl PreparedPair {
    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn statistic(&self) -> f64 {
        self.scale * ucentered_inner(&self.a, &self.b).expect("orders match")
    }

    /// Self-dependence `(Ã·Ã)` and `(B̃·B̃)`.
    pub fn self_inner(&self) -> (f64, f64) {
        (
            ucentered_inner(&self.a, &self.a).expect("orders match"),
            ucentered_inner(&self.b, &self.b).expect("orders match"),
        )
    }

    /// Statistic after relabelling the rows of X by `perm`.
    pub fn permuted_statistic(&self, perm: &[usize]) -> f64 {
        self.scale * self.a.inner_permuted(&self.b, perm)
    }
}

fn sum_centered(mats: Vec<UCenteredMatrix>, n: usize) -> UCenteredMatrix {
    let mut e = vec![0.0; n * n];
    for m in &mats {
        for (acc, v) in e.iter_mut().zip(m.entries()) {
            *acc += v;
        }
    }
    // the sum of U-centered matrices is already U-centered; recentering only
    // rewraps the storage
    u_center(&PairwiseMatrix::from_trusted(n, e, PairwiseKind::Kernel)).expect("n >= 4")
}

/// Builds the [`PreparedPair`] for `stat` on `(x, y)`.
pub fn prepare(stat: &Statistic, x: &SampleMatrix, y: &SampleMatrix) -> Result<PreparedPair> {
    let n = check_pair(x, y)?;
    let mut meta = BTreeMap::new();
    let prepared = match stat {
        Statistic::Dcov => {
            let dx = pairwise_distance(x, 1)?;
            let dy = pairwise_distance(y, 1)?;
            PreparedPair {
                degenerate: all_zero(&dx) || all_zero(&dy),
                a: u_center(&dx)?,
                b: u_center(&dy)?,
                scale: 1.0,
                meta,
            }
        }
        Statistic::Hcov { kx, ky } => {
            let kp = kernel_pair(x, y, kx, ky)?;
            if let Some(g) = kp.gx {
                meta.insert("gamma_x".into(), g);
            }
            if let Some(g) = kp.gy {
                meta.insert("gamma_y".into(), g);
            }
            PreparedPair {
                degenerate: kp.a.is_zero() || kp.b.is_zero(),
                a: kp.a,
                b: kp.b,
                scale: 1.0,
                meta,
            }
        }
        Statistic::Mdcov => {
            let a = summed_centered_marginals(x)?;
            let b = summed_centered_marginals(y)?;
            PreparedPair {
                degenerate: a.is_zero() || b.is_zero(),
                a,
                b,
                scale: pairs(n).sqrt(),
                meta,
            }
        }
        Statistic::Mhcov { kx, ky } => {
            check_kernel(kx)?;
            check_kernel(ky)?;
            let a = marginal_kernels(x, kx)?;
            let b = marginal_kernels(y, ky)?;
            meta.insert("degenerate_x_coords".into(), a.degenerate as f64);
            meta.insert("degenerate_y_coords".into(), b.degenerate as f64);
            let a = sum_centered(a.mats, n);
            let b = sum_centered(b.mats, n);
            PreparedPair {
                degenerate: a.is_zero() || b.is_zero(),
                a,
                b,
                scale: pairs(n).sqrt(),
                meta,
            }
        }
    };
    Ok(prepared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_sample(n: usize, d: usize, rng: &mut ChaCha8Rng) -> SampleMatrix {
        SampleMatrix::new(n, d, (0..n * d).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
    }

    fn sample(n: usize, d: usize, seed: u64) -> SampleMatrix {
        normal_sample(n, d, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn constant(n: usize, d: usize) -> SampleMatrix {
        SampleMatrix::new(n, d, vec![1.25; n * d]).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    // three-sum form over distinct index tuples
    fn dcov_three_sum(x: &SampleMatrix, y: &SampleMatrix) -> f64 {
        let n = x.n();
        let a = pairwise_distance(x, 1).unwrap();
        let b = pairwise_distance(y, 1).unwrap();
        let (mut s2, mut s4, mut s3) = (0.0, 0.0, 0.0);
        for s in 0..n {
            for t in 0..n {
                if s == t {
                    continue;
                }
                s2 += a.get(s, t) * b.get(s, t);
                for u in 0..n {
                    if u == s || u == t {
                        continue;
                    }
                    s3 += a.get(s, t) * b.get(s, u);
                    for v in 0..n {
                        if v == s || v == t || v == u {
                            continue;
                        }
                        s4 += a.get(s, t) * b.get(u, v);
                    }
                }
            }
        }
        let nf = n as f64;
        let p2 = nf * (nf - 1.0);
        let p3 = p2 * (nf - 2.0);
        let p4 = p3 * (nf - 3.0);
        s2 / p2 + s4 / p4 - 2.0 * s3 / p3
    }

    // symmetrized fourth-order kernel over all 4-subsets
    pub(crate) fn covsq_brute(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let perms: Vec<[usize; 4]> = {
            let mut out = Vec::new();
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for d in 0..4 {
                            let p = [a, b, c, d];
                            let mut seen = [false; 4];
                            if p.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
            out
        };
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    for l in (k + 1)..n {
                        let idx = [i, j, k, l];
                        let mut h = 0.0;
                        for p in &perms {
                            let (s, t, u, v) = (idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]);
                            h += 0.25 * (x[s] - x[t]) * (y[s] - y[t]) * (x[u] - x[v]) * (y[u] - y[v]);
                        }
                        total += h / 24.0;
                        count += 1;
                    }
                }
            }
        }
        total / count as f64
    }

    #[test]
    fn dcov_constant_is_zero() {
        let e = dcov2(&constant(6, 3), &sample(6, 2, 1)).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn dcov_matches_three_sum() {
        for seed in 0..5 {
            let x = sample(6, 3, seed);
            let y = sample(6, 2, seed + 100);
            assert_relative_eq!(dcov2(&x, &y).unwrap().value, dcov_three_sum(&x, &y), max_relative = 1e-10);
        }
    }

    #[test]
    fn dcov_unbiased_under_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let reps = 10_000;
        let vals: Vec<f64> = (0..reps)
            .map(|_| {
                let x = normal_sample(10, 5, &mut rng);
                let y = normal_sample(10, 5, &mut rng);
                dcov2(&x, &y).unwrap().value
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn dcor_cases() {
        let x = sample(8, 3, 5);
        let y = sample(8, 4, 6);
        assert_relative_eq!(dcor2(&x, &x).unwrap().value, 1.0, max_relative = 1e-14);
        assert_eq!(dcor2(&constant(8, 2), &y).unwrap().value, 0.0);
        let xy = dcov2(&x, &y).unwrap().value;
        let xx = dcov2(&x, &x).unwrap().value;
        let yy = dcov2(&y, &y).unwrap().value;
        assert_relative_eq!(dcor2(&x, &y).unwrap().value, xy / (xx * yy).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn mismatch_and_small_samples() {
        assert!(matches!(dcov2(&sample(6, 2, 1), &sample(7, 2, 2)), Err(Error::DimensionMismatch(_))));
        assert_eq!(dcov2(&sample(3, 2, 1), &sample(3, 2, 2)).unwrap_err(), Error::SampleTooSmall(3));
    }

    #[test]
    fn hcov_cases() {
        let g = KernelSpec::gaussian();
        let x = sample(7, 3, 8);
        let e = hcov2(&constant(7, 3), &x, &g, &g).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
        assert!(hcov2(&x, &x, &g, &g).unwrap().value > 0.0);
        let f = KernelSpec::fixed(KernelFamily::Gaussian, 1.0).unwrap();
        let e = hcov2(&constant(7, 3), &x, &f, &f).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
        let y = sample(6, 2, 9);
        let x = sample(6, 3, 10);
        let l = KernelSpec::fixed(KernelFamily::Laplacian, 1.0).unwrap();
        let k = crate::kernels::apply_kernel(&pairwise_distance(&x, 1).unwrap(), &f).unwrap();
        let m = crate::kernels::apply_kernel(&pairwise_distance(&y, 1).unwrap(), &l).unwrap();
        let hand = ucentered_inner(&u_center(&k).unwrap(), &u_center(&m).unwrap()).unwrap();
        assert_eq!(hcov2(&x, &y, &f, &l).unwrap().value, hand);
        assert!(hcov2(&x, &y, &KernelSpec::new(KernelFamily::Euclidean, Bandwidth::Median).unwrap(), &f).is_err());
    }

    #[test]
    fn hcor_cases() {
        let g = KernelSpec::laplacian();
        let x = sample(9, 3, 11);
        let y = sample(9, 2, 12);
        assert_relative_eq!(hcor2(&x, &x, &g, &g).unwrap().value, 1.0, max_relative = 1e-14);
        assert_eq!(hcor2(&constant(9, 3), &y, &g, &g).unwrap().value, 0.0);
        let xy = hcov2(&x, &y, &g, &g).unwrap().value;
        let xx = hcov2(&x, &x, &g, &g).unwrap().value;
        let yy = hcov2(&y, &y, &g, &g).unwrap().value;
        assert_relative_eq!(hcor2(&x, &y, &g, &g).unwrap().value, xy / (xx * yy).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn covsq_cases() {
        let y = sample(8, 1, 3).column(0);
        assert!(covsq_pair(&[2.0; 8], &y).unwrap().abs() < 1e-14);
        for seed in 0..5 {
            let x = sample(8, 1, seed).column(0);
            let y = sample(8, 1, seed + 50).column(0);
            let fast = covsq_pair(&x, &y).unwrap();
            let slow = covsq_brute(&x, &y);
            assert!(close(fast, slow, 1e-10), "{fast} vs {slow}");
        }
    }

    #[test]
    fn covsq_unbiased_for_correlated_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let reps = 10_000;
        let rho: f64 = 0.5;
        let vals: Vec<f64> = (0..reps)
            .map(|_| {
                let mut x = Vec::with_capacity(200);
                let mut y = Vec::with_capacity(200);
                for _ in 0..200 {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    x.push(a);
                    y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
                }
                covsq_pair(&x, &y).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - 0.25).abs() < 3.0 * (var / reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn covsq_sum_matches_loop() {
        let x = sample(9, 3, 1);
        let y = sample(9, 2, 2);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                acc += covsq_pair(&x.column(i), &y.column(j)).unwrap();
            }
        }
        assert!(close(covsq_sum(&x, &y).unwrap(), acc, 1e-10));
    }

    #[test]
    fn mdcov_cases() {
        let x = sample(6, 1, 1);
        let y = sample(6, 1, 2);
        assert_relative_eq!(
            mdcov2(&x, &y).unwrap().value,
            15f64.sqrt() * dcov2(&x, &y).unwrap().value,
            max_relative = 1e-13
        );
        assert_eq!(mdcov2(&constant(6, 2), &y).unwrap().value, 0.0);
        let x = sample(6, 2, 3);
        let y = sample(6, 3, 4);
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..3 {
                let xi = SampleMatrix::from_columns(&[x.column(i)]).unwrap();
                let yj = SampleMatrix::from_columns(&[y.column(j)]).unwrap();
                acc += dcov2(&xi, &yj).unwrap().value;
            }
        }
        assert_relative_eq!(mdcov2(&x, &y).unwrap().value, 15f64.sqrt() * acc, max_relative = 1e-12);
    }

    #[test]
    fn mhcov_cases() {
        let g = KernelSpec::gaussian();
        let x = sample(6, 1, 5);
        let y = sample(6, 1, 6);
        assert_relative_eq!(
            mhcov2(&x, &y, &g, &g).unwrap().value,
            15f64.sqrt() * hcov2(&x, &y, &g, &g).unwrap().value,
            max_relative = 1e-13
        );
        let e = mhcov2(&constant(6, 3), &sample(6, 2, 7), &g, &g).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.meta["degenerate_x_coords"], 3.0);
        assert!(e.degenerate);
        let f = KernelSpec::fixed(KernelFamily::Gaussian, 1.0).unwrap();
        let x = sample(6, 2, 8);
        let y = sample(6, 2, 9);
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let xi = SampleMatrix::from_columns(&[x.column(i)]).unwrap();
                let yj = SampleMatrix::from_columns(&[y.column(j)]).unwrap();
                acc += hcov2(&xi, &yj, &f, &f).unwrap().value;
            }
        }
        assert_relative_eq!(mhcov2(&x, &y, &f, &f).unwrap().value, 15f64.sqrt() * acc, max_relative = 1e-12);
    }

    #[test]
    fn ucov_identities() {
        let x = sample(9, 4, 1);
        let y = sample(9, 3, 2);
        let (p, q) = (4.0f64, 3.0f64);
        let c = 36f64.sqrt();
        let u = ucov2(&x, &y, UcovKernel::AbsDistance).unwrap().value;
        assert!(close(mdcov2(&x, &y).unwrap().value, (p * q).sqrt() * c * u, 1e-12));
        let u2 = ucov2(&x, &y, UcovKernel::SquaredDistance).unwrap().value;
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                acc += covsq_pair(&x.column(i), &y.column(j)).unwrap();
            }
        }
        assert!(close(u2, 4.0 / (p * q).sqrt() * acc, 1e-10));
        assert_eq!(ucov2(&constant(9, 4), &y, UcovKernel::AbsDistance).unwrap().value, 0.0);
    }

    #[test]
    fn rv_cases() {
        let x = sample(20, 3, 1);
        let y = sample(20, 3, 2);
        assert_relative_eq!(rv_coefficient(&x, &x).unwrap().value, 1.0, max_relative = 1e-12);
        assert_eq!(rv_coefficient(&constant(20, 3), &y).unwrap().value, 0.0);
        let sum = |a: &SampleMatrix, b: &SampleMatrix| {
            let mut s = 0.0;
            for i in 0..a.d() {
                for j in 0..b.d() {
                    s += covsq_pair(&a.column(i), &b.column(j)).unwrap();
                }
            }
            s
        };
        let expected = sum(&x, &y) / (sum(&x, &x) * sum(&y, &y)).sqrt();
        assert!(close(rv_coefficient(&x, &y).unwrap().value, expected, 1e-10));
    }

    #[test]
    fn tau_cases() {
        let x = SampleMatrix::from_rows(&[[0.0, 0.0], [3.0, 0.0]]).unwrap();
        assert_eq!(tau_hat(&x).unwrap(), 3.0);
        assert_eq!(tau_hat(&constant(5, 2)).unwrap(), 0.0);
        let t = tau_hat(&sample(500, 50, 3)).unwrap();
        assert!((t * t - 100.0).abs() < 5.0, "{}", t * t);
    }

    fn assert_sum_reproduces(r: &DecompositionReport) {
        let sum = r.leading_term + r.remainder;
        if sum != r.statistic {
            let ulp = r.leading_term.abs().max(r.remainder.abs()).next_up() - r.leading_term.abs().max(r.remainder.abs());
            assert!((sum - r.statistic).abs() <= ulp, "{r:?}");
            // no single-ulp move of the remainder does better
            for cand in [r.remainder.next_up(), r.remainder.next_down()] {
                assert!((r.leading_term + cand - r.statistic).abs() >= (sum - r.statistic).abs());
            }
        }
    }

    #[test]
    fn exact_remainder_when_representable() {
        assert_eq!(exact_remainder(0.3, 0.1), 0.3 - 0.1);
        for (stat, lead) in [(0.3, 0.1), (1.0, 0.7), (-2.5, 1e-3), (1e-3, 0.9e-3)] {
            let r = exact_remainder(stat, lead);
            assert_eq!(lead + r, stat);
        }
    }

    #[test]
    fn decomposition_is_exact() {
        for seed in 0..20 {
            let x = sample(10, 5, seed);
            let y = sample(10, 5, seed + 1000);
            let r = decompose(&x, &y, DecompositionTarget::Dcov).unwrap();
            assert_eq!(r.statistic, dcov2(&x, &y).unwrap().value);
            assert_sum_reproduces(&r);
            let k = KernelSpec::gaussian();
            let r = decompose(&x, &y, DecompositionTarget::ScaledHcov { kx: k, ky: k }).unwrap();
            assert_sum_reproduces(&r);
            assert!(r.gamma_x.is_some());
        }
        let r = decompose(&constant(10, 5), &sample(10, 5, 1), DecompositionTarget::Dcov).unwrap();
        assert_eq!((r.statistic, r.leading_term, r.remainder), (0.0, 0.0, 0.0));
        assert!(r.degenerate);
    }

    #[test]
    fn decomposition_leading_term_dominates_in_high_dimension() {
        // with large p the hCov Taylor prefactor should match the statistic closely
        let x = sample(10, 2000, 1);
        let y = sample(10, 2000, 2);
        for k in [KernelSpec::gaussian(), KernelSpec::laplacian()] {
            let r = decompose(&x, &y, DecompositionTarget::ScaledHcov { kx: k, ky: k }).unwrap();
            assert!(r.ratio().unwrap() < 0.2, "{:?}", r);
        }
        let r = decompose(&x, &y, DecompositionTarget::Dcov).unwrap();
        assert!(r.ratio().unwrap() < 0.2, "{:?}", r);
    }

    #[test]
    fn phi_cases() {
        let x = sample(50, 4, 1);
        assert_relative_eq!(estimate_phi(&x, &x, PhiKind::Phi1).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(estimate_phi(&x, &x, PhiKind::Phi2).unwrap(), 1.0, max_relative = 1e-12);
        let x = sample(200, 10, 2);
        let y = sample(200, 10, 3);
        for kind in [PhiKind::Phi1, PhiKind::Phi2] {
            assert!(estimate_phi(&x, &y, kind).unwrap().abs() < 0.1);
        }
        assert!(estimate_phi(&constant(20, 2), &sample(20, 2, 1), PhiKind::Phi1).is_err());
    }

    #[test]
    fn phi1_matches_marginal_loop() {
        let x = sample(12, 3, 4);
        let y = sample(12, 2, 5);
        let s = |a: &SampleMatrix, b: &SampleMatrix| mdcov2(a, b).unwrap().value;
        let expected = s(&x, &y) / (s(&x, &x) * s(&y, &y)).sqrt();
        assert!(close(estimate_phi(&x, &y, PhiKind::Phi1).unwrap(), expected, 1e-10));
    }

    #[test]
    fn prepared_pairs_match_estimators() {
        let x = sample(11, 4, 1);
        let y = sample(11, 3, 2);
        let g = KernelSpec::gaussian();
        let l = KernelSpec::laplacian();
        let cases: Vec<(Statistic, f64)> = vec![
            (Statistic::Dcov, dcov2(&x, &y).unwrap().value),
            (Statistic::Hcov { kx: g, ky: l }, hcov2(&x, &y, &g, &l).unwrap().value),
            (Statistic::Mdcov, mdcov2(&x, &y).unwrap().value),
            (Statistic::Mhcov { kx: l, ky: g }, mhcov2(&x, &y, &l, &g).unwrap().value),
        ];
        for (stat, expected) in cases {
            let p = prepare(&stat, &x, &y).unwrap();
            assert!(close(p.statistic(), expected, 1e-10), "{stat:?}");
            let id: Vec<usize> = (0..11).collect();
            assert!(close(p.permuted_statistic(&id), expected, 1e-10));
        }
    }

    #[test]
    fn statistic_parsing() {
        assert_eq!("dcov".parse::<Statistic>().unwrap(), Statistic::Dcov);
        assert_eq!("MDCOV".parse::<Statistic>().unwrap(), Statistic::Mdcov);
        assert_eq!("hcov".parse::<Statistic>().unwrap(), Statistic::hcov(KernelFamily::Gaussian));
        assert_eq!("mhcov-laplacian".parse::<Statistic>().unwrap(), Statistic::mhcov(KernelFamily::Laplacian));
        assert_eq!(Statistic::mhcov(KernelFamily::Laplacian).label(), "mhcov-laplacian");
        for bad in ["", "dcov-gaussian", "xcov", "hcov-cosine"] {
            assert!(bad.parse::<Statistic>().is_err(), "{bad}");
        }
    }

    fn all_statistics(x: &SampleMatrix, y: &SampleMatrix) -> Vec<f64> {
        let g = KernelSpec::gaussian();
        let l = KernelSpec::laplacian();
        vec![
            dcov2(x, y).unwrap().value,
            hcov2(x, y, &g, &l).unwrap().value,
            mdcov2(x, y).unwrap().value,
            mhcov2(x, y, &g, &l).unwrap().value,
            ucov2(x, y, UcovKernel::AbsDistance).unwrap().value,
            ucov2(x, y, UcovKernel::SquaredDistance).unwrap().value,
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn self_dependence_nonnegative(seed in any::<u64>(), n in 4usize..15, d in 1usize..5) {
            let x = sample(n, d, seed);
            prop_assert!(dcov2(&x, &x).unwrap().value >= 0.0);
            let g = KernelSpec::gaussian();
            prop_assert!(hcov2(&x, &x, &g, &g).unwrap().value >= 0.0);
        }

        #[test]
        fn translation_invariance(seed in any::<u64>(), shift in proptest::collection::vec(-50.0f64..50.0, 3)) {
            let x = sample(10, 3, seed);
            let y = sample(10, 2, seed ^ 0xabc);
            let xs = SampleMatrix::from_rows(
                &x.rows().map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect::<Vec<_>>()).collect::<Vec<_>>()
            ).unwrap();
            for (a, b) in all_statistics(&x, &y).into_iter().zip(all_statistics(&xs, &y)) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3), "{a} vs {b}");
            }
        }

        #[test]
        fn orthogonal_invariance_of_joint_statistics(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
            let x = sample(10, 2, seed);
            let y = sample(10, 3, seed ^ 0x55);
            let (c, s) = (theta.cos(), theta.sin());
            let xr = SampleMatrix::from_rows(
                &x.rows().map(|r| vec![c * r[0] - s * r[1], s * r[0] + c * r[1]]).collect::<Vec<_>>()
            ).unwrap();
            let g = KernelSpec::gaussian();
            let a = dcov2(&x, &y).unwrap().value;
            let b = dcov2(&xr, &y).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3));
            let a = hcov2(&x, &y, &g, &g).unwrap().value;
            let b = hcov2(&xr, &y, &g, &g).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3));
        }

        #[test]
        fn common_row_permutation_invariance(seed in any::<u64>(), n in 5usize..12) {
            let x = sample(n, 3, seed);
            let y = sample(n, 2, seed ^ 0x77);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let xp = x.permute_rows(&perm).unwrap();
            let yp = y.permute_rows(&perm).unwrap();
            let scales = all_statistics(&x, &x).into_iter().zip(all_statistics(&y, &y)).map(|(sx, sy)| (sx * sy).abs().sqrt());
            for ((a, b), scale) in all_statistics(&x, &y).into_iter().zip(all_statistics(&xp, &yp)).zip(scales) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(scale), "{a} vs {b} (scale {scale})");
            }
        }

        #[test]
        fn ucov_identities_hold(seed in any::<u64>(), n in 4usize..12, p in 1usize..6, q in 1usize..6) {
            let x = sample(n, p, seed);
            let y = sample(n, q, seed ^ 0x99);
            let pq = ((p * q) as f64).sqrt();
            let md = mdcov2(&x, &y).unwrap().value;
            let u = ucov2(&x, &y, UcovKernel::AbsDistance).unwrap().value;
            prop_assert!(close(md, pq * pairs(n).sqrt() * u, 1e-10));
            let u2 = ucov2(&x, &y, UcovKernel::SquaredDistance).unwrap().value;
            prop_assert!(close(u2, 4.0 / pq * covsq_sum(&x, &y).unwrap(), 1e-10));
        }

        #[test]
        fn covsq_matches_brute_force(seed in any::<u64>(), n in 4usize..10) {
            let x = sample(n, 1, seed).column(0);
            let y = sample(n, 1, seed ^ 0x1234).column(0);
            let fast = covsq_pair(&x, &y).unwrap();
            let slow = covsq_brute(&x, &y);
            prop_assert!((fast - slow).abs() <= 1e-10 * fast.abs().max(slow.abs()).max(1e-12));
        }
    }
}
