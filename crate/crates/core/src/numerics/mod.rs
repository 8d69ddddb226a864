//! Dense-matrix primitives and random samplers.

mod linalg;
mod rng;
mod sample;

pub use linalg::{cholesky, cholesky_solve, column_means, pearson, svd, DataMatrix, Svd};
pub(crate) use rng::fnv1a;
pub use rng::RngStream;
pub use sample::{gh_transform, sample_gh, sample_mvnormal, GhSample, GH_CLAMP};
