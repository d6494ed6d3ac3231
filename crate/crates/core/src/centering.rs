//! Sample and pairwise matrices, U-centering, and the U-centered inner product.
//!
//! Every dependence statistic in this crate reduces to `(Ã · B̃)` for some pair
//! of U-centered `n × n` matrices, so the types here are deliberately small:
//! dense row-major `Vec<f64>` storage with the order carried alongside.

use crate::error::{Error, Result};

/// An `n × d` block of observations. Rows are samples, columns coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    /// Builds a matrix from row-major values. All entries must be finite.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "sample matrix must be at least 1x1, got {n}x{d}"
            )));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {n}x{d} matrix, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * d);
        for (s, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "row {s} has {} columns, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(n, d, values)
    }

    /// Builds a matrix from a list of columns of equal length.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, |c| c.as_ref().len());
        let mut values = vec![0.0; n * d];
        for (j, col) in columns.iter().enumerate() {
            let col = col.as_ref();
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            for (s, &v) in col.iter().enumerate() {
                values[s * d + j] = v;
            }
        }
        Self::new(n, d, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, j: usize) -> f64 {
        self.values[s * self.d + j]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.d..(s + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|s| self.get(s, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|j| self.column(j)).collect()
    }

    /// Returns the matrix whose row `s` is row `perm[s]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} rows",
                perm.len(),
                self.n
            )));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &src in perm {
            if src >= self.n {
                return Err(Error::InvalidInput(format!("row index {src} out of range")));
            }
            values.extend_from_slice(self.row(src));
        }
        Ok(Self {
            n: self.n,
            d: self.d,
            values,
        })
    }

    /// Applies `f` entrywise. The result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.n, self.d, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// What the entries of a [`PairwiseMatrix`] represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairwiseKind {
    Distance,
    SquaredDistance,
    Kernel,
    Product,
}

impl PairwiseKind {
    fn is_distance(self) -> bool {
        matches!(self, PairwiseKind::Distance | PairwiseKind::SquaredDistance)
    }
}

/// Symmetric `n × n` matrix of pairwise distances, kernel values or products.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    n: usize,
    entries: Vec<f64>,
    kind: PairwiseKind,
}

impl PairwiseMatrix {
    /// Validates symmetry (exact) and, for distance kinds, a zero diagonal
    /// with nonnegative off-diagonal entries.
    pub fn new(n: usize, entries: Vec<f64>, kind: PairwiseKind) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for order {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for s in 0..n {
            for t in 0..n {
                let v = entries[s * n + t];
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite entry at ({s}, {t})")));
                }
                if t > s && v != entries[t * n + s] {
                    return Err(Error::InvalidInput(format!("matrix not symmetric at ({s}, {t})")));
                }
            }
            if kind.is_distance() && entries[s * n + s] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {s}")));
            }
        }
        if kind.is_distance() && entries.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("negative distance".into()));
        }
        Ok(Self { n, entries, kind })
    }

    /// Builds from entries that are symmetric by construction.
    pub(crate) fn from_trusted(n: usize, entries: Vec<f64>, kind: PairwiseKind) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        Self { n, entries, kind }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> PairwiseKind {
        self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.entries[s * self.n + t]
    }

    /// Upper-triangular entries `s < t`, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for s in 0..n {
            out.extend_from_slice(&self.entries[s * n + s + 1..(s + 1) * n]);
        }
        out
    }
}

/// Pairwise Euclidean distances `|X_s − X_t|^exponent` for `exponent ∈ {1, 2}`.
pub fn pairwise_distance(x: &SampleMatrix, exponent: u32) -> Result<PairwiseMatrix> {
    let kind = match exponent {
        1 => PairwiseKind::Distance,
        2 => PairwiseKind::SquaredDistance,
        e => {
            return Err(Error::InvalidInput(format!(
                "distance exponent must be 1 or 2, got {e}"
            )))
        }
    };
    let n = x.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "pairwise distances need at least 2 rows, got {n}"
        )));
    }
    let mut entries = vec![0.0; n * n];
    for s in 0..n {
        let rs = x.row(s);
        for t in (s + 1)..n {
            let sq: f64 = rs
                .iter()
                .zip(x.row(t))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = if exponent == 1 { sq.sqrt() } else { sq };
            entries[s * n + t] = v;
            entries[t * n + s] = v;
        }
    }
    Ok(PairwiseMatrix::from_trusted(n, entries, kind))
}

/// `|x_s − x_t|` for a single coordinate.
pub fn column_distance(col: &[f64]) -> PairwiseMatrix {
    let n = col.len();
    let mut entries = vec![0.0; n * n];
    for s in 0..n {
        for t in (s + 1)..n {
            let v = (col[s] - col[t]).abs();
            entries[s * n + t] = v;
            entries[t * n + s] = v;
        }
    }
    PairwiseMatrix::from_trusted(n, entries, PairwiseKind::Distance)
}

/// Product matrix `x_s x_t` of a single coordinate.
pub fn column_product(col: &[f64]) -> PairwiseMatrix {
    let n = col.len();
    let mut entries = vec![0.0; n * n];
    for s in 0..n {
        for t in s..n {
            let v = col[s] * col[t];
            entries[s * n + t] = v;
            entries[t * n + s] = v;
        }
    }
    PairwiseMatrix::from_trusted(n, entries, PairwiseKind::Product)
}

/// Gram matrix `X_s · X_t` over all coordinates, i.e. the sum of the
/// per-coordinate product matrices.
pub fn gram_matrix(x: &SampleMatrix) -> PairwiseMatrix {
    let n = x.n();
    let mut entries = vec![0.0; n * n];
    for s in 0..n {
        let rs = x.row(s);
        for t in s..n {
            let v: f64 = rs.iter().zip(x.row(t)).map(|(a, b)| a * b).sum();
            entries[s * n + t] = v;
            entries[t * n + s] = v;
        }
    }
    PairwiseMatrix::from_trusted(n, entries, PairwiseKind::Product)
}

/// A U-centered matrix: zero diagonal, zero row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct UCenteredMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl UCenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.entries[s * self.n + t]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// The zero matrix of order `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    /// Reinterprets the centered entries as a pairwise matrix, e.g. to center
    /// a second time.
    pub fn to_pairwise(&self) -> PairwiseMatrix {
        PairwiseMatrix::from_trusted(self.n, self.entries.clone(), PairwiseKind::Kernel)
    }

    /// `(Ã_π · B̃)` where `Ã_π[s][t] = Ã[π(s)][π(t)]`, i.e. the inner product
    /// after relabelling the rows of the sample behind `self` by `perm`.
    pub fn inner_permuted(&self, other: &UCenteredMatrix, perm: &[usize]) -> f64 {
        let n = self.n;
        debug_assert_eq!(other.n, n);
        debug_assert_eq!(perm.len(), n);
        let mut acc = 0.0;
        for s in 0..n {
            let row = &self.entries[perm[s] * n..(perm[s] + 1) * n];
            let orow = &other.entries[s * n..(s + 1) * n];
            let mut racc = 0.0;
            for t in 0..n {
                racc += row[perm[t]] * orow[t];
            }
            acc += racc;
        }
        acc / (n as f64 * (n as f64 - 3.0))
    }
}

/// U-centers a pairwise matrix:
///
/// `ã_st = a_st − r_s/(n−2) − c_t/(n−2) + g/((n−1)(n−2))` for `s ≠ t`, `ã_ss = 0`,
///
/// where `r_s`, `c_t` and `g` are the row, column and grand sums of the
/// off-diagonal entries. For zero-diagonal input this is the textbook formula;
/// for kernel or product matrices the diagonal never enters the result.
pub fn u_center(m: &PairwiseMatrix) -> Result<UCenteredMatrix> {
    u_center_entries(m.n, &m.entries)
}

pub(crate) fn u_center_entries(n: usize, a: &[f64]) -> Result<UCenteredMatrix> {
    if n < 4 {
        return Err(Error::SampleTooSmall(n));
    }
    debug_assert_eq!(a.len(), n * n);
    let mut row = vec![0.0; n];
    let mut col = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s != t {
                let v = a[s * n + t];
                row[s] += v;
                col[t] += v;
            }
        }
    }
    let grand: f64 = row.iter().sum();
    let nf = n as f64;
    let k1 = 1.0 / (nf - 2.0);
    let g = grand / ((nf - 1.0) * (nf - 2.0));
    let mut entries = vec![0.0; n * n];
    for s in 0..n {
        for t in 0..n {
            if s != t {
                entries[s * n + t] = a[s * n + t] - k1 * row[s] - k1 * col[t] + g;
            }
        }
    }
    Ok(UCenteredMatrix { n, entries })
}

/// `(Ã · B̃) = 1/(n(n−3)) Σ_{s≠t} ã_st b̃_st`.
pub fn ucentered_inner(a: &UCenteredMatrix, b: &UCenteredMatrix) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch(format!(
            "U-centered matrices of order {} and {}",
            a.n, b.n
        )));
    }
    let n = a.n as f64;
    // diagonals are zero, so the full sum equals the s != t sum
    let sum: f64 = a.entries.iter().zip(&b.entries).map(|(x, y)| x * y).sum();
    Ok(sum / (n * (n - 3.0)))
}
