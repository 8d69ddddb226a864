//! Multivariate adaptive stochastic search (MASS) for supervised
//! dimensionality reduction in binary classification.
//!
//! The search repeatedly draws sparse random directions, keeps the `p` that
//! enter a least-angle-regression path first, and adapts the sparsity of the
//! next draw to that of the directions it kept. A nonlinear variant replaces
//! each direction by additive natural-spline functions with bounded
//! curvature.
//!
//! ```
//! use mass::{gen_sim, run_mass, MassConfig, RngStream, Study};
//!
//! let study = Study::II { scenario: 1 };
//! let data = gen_sim(study, study.default_sizes(), &mut RngStream::new(1)).unwrap();
//! let mut config = MassConfig::new(5, 42);
//! config.iterations = 50;
//! let fit = run_mass(&data.x_train, &data.y_train, &config, None).unwrap();
//! let predicted = fit.predict(data.x_test.view()).unwrap();
//! let rate = mass::mcr(&predicted, &data.y_test).unwrap();
//! assert!(rate < 0.5);
//! ```

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod error;
pub mod mass;
pub mod numerics;
pub mod projection;
pub mod reduce;
pub mod selection;
pub mod simgen;
pub mod spline;

pub use classify::{bayes_rate_estimate, fit_logistic, mcr, predict_classes, LogisticModel};
pub use error::{Error, Result};
pub use mass::{
    l_schedule, next_sparsity, run_mass, run_mass_observed, Directions, EvalSet, LSchedule, MassConfig, MassResult,
    MassTrace, Mode, SparsityPolicy, TraceEntry,
};
pub use numerics::{sample_gh, sample_mvnormal, svd, DataMatrix, RngStream, Svd};
pub use projection::{
    draw_column_sparsities, gen_candidate_columns, project, sparsity_of, ProjectionMatrix, SparsitySpec,
};
pub use reduce::{intermediate_dim, pca_reduce, pca_sis_reduce, sis_reduce, Reduction, ReductionKind, ReductionMap};
pub use selection::{lars_entries, lars_path, select_first_p, LarsPath, Selection};
pub use simgen::{gen_sim, logistic_labels, LinkKind, LinkSpec, SimDataset, Sizes, Study, Truth};
pub use spline::{
    build_ncs_basis, constrain_and_standardize, curvature_gram, expand_features, CurvatureOperator, NcsBasis,
    SplineCoeffs,
};
