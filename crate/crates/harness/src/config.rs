//! Experiment manifests. A TOML document with top-level keys and `[mass]`,
//! `[reduce]` and `[data]` sections; every command-line flag overrides the
//! matching key.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use mass::{ReductionKind, Sizes, Study};

use crate::error::{HarnessError, Result};
use crate::method::{parse_methods, MethodSpec};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub study: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub methods: Option<Vec<String>>,
    /// Record test MCR along MASS traces.
    pub trace_test: Option<bool>,
    /// Fill the `wall_seconds` column; off by default so reruns are byte-identical.
    pub record_wall_time: Option<bool>,
    /// Write SVG plots next to the traces.
    pub plots: Option<bool>,
    #[serde(default)]
    pub mass: MassSection,
    #[serde(default)]
    pub reduce: ReduceSection,
    #[serde(default)]
    pub data: DataSection,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MassSection {
    pub p: Option<usize>,
    pub iters: Option<usize>,
    pub xi0: Option<f64>,
    pub alpha: Option<f64>,
    /// Default curvature budget for search methods without their own.
    pub lambda: Option<f64>,
    /// Default fixed sparsity for MFSS without its own.
    pub xi: Option<f64>,
    pub l_start: Option<usize>,
    pub l_end: Option<usize>,
    pub q: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReduceSection {
    pub kind: Option<String>,
    /// Intermediate dimension; 0 or absent means `round(2n / ln n)`.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub d: Option<usize>,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    /// Largest `p` visited by sweeping baselines; defaults to the number of predictors.
    pub p_max: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Study { study: Study, sizes: Sizes },
    Csv { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassDefaults {
    pub p: usize,
    pub iterations: usize,
    pub xi0: f64,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub xi: f64,
    pub l_start: Option<usize>,
    pub l_end: Option<usize>,
    pub q: usize,
}

impl Default for MassDefaults {
    fn default() -> Self {
        Self {
            p: 5,
            iterations: mass::mass::DEFAULT_ITERATIONS,
            xi0: mass::mass::DEFAULT_INITIAL_SPARSITY,
            alpha: mass::mass::DEFAULT_ALPHA,
            lambda: None,
            xi: 0.0,
            l_start: None,
            l_end: None,
            q: mass::spline::DEFAULT_DEGREES_OF_FREEDOM,
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub reduction: ReductionKind,
    /// `None` means the intermediate-dimension rule.
    pub m: Option<usize>,
    pub methods: Vec<MethodSpec>,
    pub mass: MassDefaults,
    pub reps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub trace_test: bool,
    pub record_wall_time: bool,
    pub plots: bool,
    pub p_max: Option<usize>,
}

impl ExperimentSpec {
    pub fn for_study(study: Study, methods: &[&str]) -> Result<Self> {
        let file = ConfigFile {
            study: Some(study.tag()),
            methods: Some(methods.iter().map(|s| s.to_string()).collect()),
            ..ConfigFile::default()
        };
        Self::resolve(file)
    }

    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let cfg = |m: String| HarnessError::Config(m);
        let source = match (&file.data.train_csv, &file.data.test_csv, &file.study) {
            (Some(train), Some(test), _) => DataSource::Csv {
                train: train.clone(),
                test: test.clone(),
            },
            (Some(_), None, _) | (None, Some(_), _) => {
                return Err(cfg("train_csv and test_csv must be given together".into()))
            }
            (None, None, Some(tag)) => {
                let study: Study = tag.parse()?;
                let def = study.default_sizes();
                DataSource::Study {
                    study,
                    sizes: Sizes {
                        n_train: file.data.n_train.unwrap_or(def.n_train),
                        n_test: file.data.n_test.unwrap_or(def.n_test),
                        d: file.data.d.unwrap_or(def.d),
                    },
                }
            }
            (None, None, None) => return Err(cfg("no study and no CSV data given".into())),
        };
        let reduction = match &file.reduce.kind {
            Some(k) => k.parse::<ReductionKind>()?,
            None => ReductionKind::None,
        };
        let methods = parse_methods(file.methods.as_deref().unwrap_or(&["FD".to_string()]))?;
        if methods.is_empty() {
            return Err(cfg("empty method list".into()));
        }
        let def = MassDefaults::default();
        let mass = MassDefaults {
            p: file.mass.p.unwrap_or(def.p),
            iterations: file.mass.iters.unwrap_or(def.iterations),
            xi0: file.mass.xi0.unwrap_or(def.xi0),
            alpha: file.mass.alpha.unwrap_or(def.alpha),
            lambda: file.mass.lambda,
            xi: file.mass.xi.unwrap_or(def.xi),
            l_start: file.mass.l_start,
            l_end: file.mass.l_end,
            q: file.mass.q.unwrap_or(def.q),
        };
        if mass.p == 0 {
            return Err(cfg("p must be at least 1".into()));
        }
        if mass.iterations == 0 {
            return Err(cfg("iters must be at least 1".into()));
        }
        let reps = file.reps.unwrap_or(1);
        if reps == 0 {
            return Err(cfg("reps must be at least 1".into()));
        }
        if file.workers == Some(0) {
            return Err(cfg("workers must be at least 1".into()));
        }
        Ok(Self {
            source,
            reduction,
            m: file.reduce.m.filter(|m| *m > 0),
            methods,
            mass,
            reps,
            seed: file.seed.unwrap_or(1),
            out: file.out,
            workers: file.workers,
            trace_test: file.trace_test.unwrap_or(true),
            record_wall_time: file.record_wall_time.unwrap_or(false),
            plots: file.plots.unwrap_or(true),
            p_max: file.data.p_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_sections() {
        let text = r#"
            study = "II1"
            reps = 3
            seed = 9
            methods = ["FD", "MFSS(xi=0.98)"]
            [mass]
            p = 4
            iters = 50
            [reduce]
            kind = "sis"
            m = 20
        "#;
        let file: ConfigFile = toml::from_str(text).unwrap();
        let spec = ExperimentSpec::resolve(file).unwrap();
        assert_eq!(spec.reps, 3);
        assert_eq!(spec.mass.p, 4);
        assert_eq!(spec.reduction, ReductionKind::Sis);
        assert_eq!(spec.m, Some(20));
        assert_eq!(spec.methods.len(), 2);
        assert!(matches!(spec.source, DataSource::Study { study: Study::II { scenario: 1 }, .. }));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<ConfigFile>("stdy = \"I\"").is_err());
        let file: ConfigFile = toml::from_str("study = \"II1\"\nreps = 0").unwrap();
        assert!(ExperimentSpec::resolve(file).is_err());
        let file: ConfigFile = toml::from_str("study = \"VII\"").unwrap();
        assert!(ExperimentSpec::resolve(file).is_err());
        assert!(ExperimentSpec::resolve(ConfigFile::default()).is_err());
    }
}
