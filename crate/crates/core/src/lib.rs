//! Distance- and kernel-based dependence statistics for high-dimensional
//! independence testing.
//!
//! The crate covers the whole pipeline:
//!
//! * [`centering`]: pairwise matrices, U-centering and the U-centered inner
//!   product every estimator is built on.
//! * [`kernels`]: Gaussian/Laplacian kernels and the median-heuristic bandwidth.
//! * [`estimators`]: dCov, dCor, hCov, hCor, mdCov, mhCov, uCov, the RV
//!   coefficient and the leading-term/remainder decomposition.
//! * [`inference`]: studentized t-tests, normal-reference tests and seeded
//!   permutation tests.
//! * [`specialfn`]: incomplete beta, Student-t and noncentral-t CDFs and the
//!   exact/approximate power formulas.
//! * [`simlab`]: scenario generators and a reproducible parallel Monte Carlo
//!   driver.
//! * [`cli`]: the `hdcov` command-line surface and its CSV/JSON formats.

pub mod centering;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod kernels;
pub mod simlab;
pub mod specialfn;

pub use centering::{PairwiseKind, PairwiseMatrix, SampleMatrix, UCenteredMatrix};
pub use error::{Error, Result};
