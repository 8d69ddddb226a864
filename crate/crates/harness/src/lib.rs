//! Experiment harness for the MASS library: replicated simulation studies,
//! baseline comparisons, p-sweeps, traces, plots and the stability metric.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod method;
pub mod output;
pub mod plot;
pub mod stability;

pub use config::{ConfigFile, DataSource, ExperimentSpec, MassDefaults};
pub use error::{HarnessError, Result};
pub use experiment::{aggregate, run_experiment, ExperimentOutput, ResultRow, SummaryRow};
pub use method::{MethodKind, MethodSpec};
pub use stability::{stability_metric, StabilityReport};
