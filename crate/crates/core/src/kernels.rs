//! Kernels of the form `f(|x − y| / γ)` and the median bandwidth heuristic.

use std::fmt;
use std::str::FromStr;

use crate::centering::{PairwiseKind, PairwiseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Euclidean,
    SquaredEuclidean,
    Gaussian,
    Laplacian,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Euclidean => "euclidean",
            KernelFamily::SquaredEuclidean => "squared-euclidean",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
        }
    }

    pub fn uses_bandwidth(self) -> bool {
        matches!(self, KernelFamily::Gaussian | KernelFamily::Laplacian)
    }

    /// The profile `f(a)`.
    pub fn profile(self, a: f64) -> f64 {
        match self {
            KernelFamily::Euclidean => a,
            KernelFamily::SquaredEuclidean => a * a,
            KernelFamily::Gaussian => (-0.5 * a * a).exp(),
            KernelFamily::Laplacian => (-a).exp(),
        }
    }

    /// The first derivative `f'(a)`.
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            KernelFamily::Euclidean => 1.0,
            KernelFamily::SquaredEuclidean => 2.0 * a,
            KernelFamily::Gaussian => -a * (-0.5 * a * a).exp(),
            KernelFamily::Laplacian => -(-a).exp(),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(KernelFamily::Euclidean),
            "squared-euclidean" => Ok(KernelFamily::SquaredEuclidean),
            "gaussian" => Ok(KernelFamily::Gaussian),
            "laplacian" => Ok(KernelFamily::Laplacian),
            other => Err(Error::InvalidInput(format!(
                "unknown kernel '{other}' (expected gaussian or laplacian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Median => f.write_str("median"),
            Bandwidth::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("median") {
            return Ok(Bandwidth::Median);
        }
        let g: f64 = s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bandwidth must be 'median' or a number, got '{s}'")))?;
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive and finite, got {s}")));
        }
        Ok(Bandwidth::Fixed(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: Bandwidth) -> Result<Self> {
        if let Bandwidth::Fixed(g) = bandwidth {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidInput(format!("fixed bandwidth must be positive, got {g}")));
            }
        }
        Ok(Self { family, bandwidth })
    }

    pub fn gaussian() -> Self {
        Self {
            family: KernelFamily::Gaussian,
            bandwidth: Bandwidth::Median,
        }
    }

    pub fn laplacian() -> Self {
        Self {
            family: KernelFamily::Laplacian,
            bandwidth: Bandwidth::Median,
        }
    }

    pub fn fixed(family: KernelFamily, gamma: f64) -> Result<Self> {
        Self::new(family, Bandwidth::Fixed(gamma))
    }
}

/// Median of the `n(n−1)/2` upper-triangular distances. For an even count the
/// midpoint of the two central order statistics is returned.
pub fn median_bandwidth(d: &PairwiseMatrix) -> Result<f64> {
    if d.kind() != PairwiseKind::Distance {
        return Err(Error::InvalidInput("median bandwidth needs a distance matrix".into()));
    }
    if d.n() < 2 {
        return Err(Error::InvalidInput("median bandwidth needs at least 2 rows".into()));
    }
    let mut v = d.upper_triangle();
    let m = median_in_place(&mut v);
    if m > 0.0 {
        Ok(m)
    } else {
        Err(Error::Degenerate("median pairwise distance is zero".into()))
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let len = v.len();
    let mid = len / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Resolves the bandwidth of `spec` against the distance matrix `d`.
pub fn resolve_bandwidth(d: &PairwiseMatrix, spec: &KernelSpec) -> Result<f64> {
    match spec.bandwidth {
        Bandwidth::Fixed(g) => Ok(g),
        Bandwidth::Median => median_bandwidth(d),
    }
}

/// Applies `f(d/γ)` entrywise. Euclidean and squared-Euclidean families ignore
/// the bandwidth and return `d` and `d²`.
pub fn apply_kernel(d: &PairwiseMatrix, spec: &KernelSpec) -> Result<PairwiseMatrix> {
    Ok(apply_kernel_with(d, spec)?.0)
}

/// As [`apply_kernel`], also returning the resolved bandwidth (`None` when the
/// family has no bandwidth).
pub fn apply_kernel_with(d: &PairwiseMatrix, spec: &KernelSpec) -> Result<(PairwiseMatrix, Option<f64>)> {
    if d.kind() != PairwiseKind::Distance {
        return Err(Error::InvalidInput("kernels are applied to distance matrices".into()));
    }
    let n = d.n();
    match spec.family {
        KernelFamily::Euclidean => Ok((d.clone(), None)),
        KernelFamily::SquaredEuclidean => {
            let e = d.entries().iter().map(|v| v * v).collect();
            Ok((PairwiseMatrix::from_trusted(n, e, PairwiseKind::SquaredDistance), None))
        }
        family => {
            let gamma = resolve_bandwidth(d, spec)?;
            let e = d.entries().iter().map(|&v| family.profile(v / gamma)).collect();
            Ok((PairwiseMatrix::from_trusted(n, e, PairwiseKind::Kernel), Some(gamma)))
        }
    }
}
