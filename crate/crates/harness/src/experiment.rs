//! Replicated experiments: generate or load data, fit the preliminary
//! reduction on the training split, run every method, and aggregate.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::RngCore;
use rayon::prelude::*;

use mass::reduce::{intermediate_dim, Reduction};
use mass::{
    bayes_rate_estimate, fit_logistic, gen_sim, lars_entries, mcr, predict_classes, run_mass, DataMatrix, EvalSet,
    MassConfig, MassTrace, Mode, ReductionKind, RngStream, SimDataset, SparsityPolicy,
};

use crate::config::{DataSource, ExperimentSpec, MassDefaults};
use crate::error::{HarnessError, Result};
use crate::method::{MethodKind, MethodSpec};

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub p: usize,
    pub replication: usize,
    pub seed: u64,
    pub test_mcr: Option<f64>,
    pub bayes_mcr: Option<f64>,
    pub final_sparsity: Option<f64>,
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub method: String,
    pub replication: usize,
    pub reason: String,
}

/// Per-method summary. For swept methods `p` is the minimizer `p*` of the
/// replication-averaged MCR curve and `mean` is `MCR*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub p: usize,
    pub swept: bool,
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

/// Iteration-wise average of the traces of one method over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTrace {
    pub iteration: Vec<usize>,
    pub l: Vec<f64>,
    pub deviance: Vec<f64>,
    pub xi_bar: Vec<f64>,
    pub test_mcr: Option<Vec<f64>>,
}

impl AveragedTrace {
    pub fn from_traces(traces: &[&MassTrace]) -> Option<Self> {
        let first = traces.first()?;
        let len = first.len();
        if len == 0 || traces.iter().any(|t| t.len() != len) {
            return None;
        }
        let k = traces.len() as f64;
        let avg = |f: &dyn Fn(&mass::TraceEntry) -> f64| -> Vec<f64> {
            (0..len)
                .map(|i| traces.iter().map(|t| f(&t.entries[i])).sum::<f64>() / k)
                .collect()
        };
        let test_mcr = if traces.iter().all(|t| t.entries.iter().all(|e| e.test_mcr.is_some())) {
            Some(avg(&|e| e.test_mcr.unwrap_or(0.0)))
        } else {
            None
        };
        Some(Self {
            iteration: first.entries.iter().map(|e| e.iteration).collect(),
            l: avg(&|e| e.l as f64),
            deviance: avg(&|e| e.deviance),
            xi_bar: avg(&|e| e.xi_bar),
            test_mcr,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
    pub table: Vec<SummaryRow>,
    pub traces: Vec<(String, AveragedTrace)>,
    /// Mean and standard error of the per-replication Bayes rate.
    pub bayes: Option<(f64, f64)>,
}

/// Data for one replication after the preliminary reduction.
pub struct Prepared {
    pub x_train: DataMatrix,
    pub y_train: Vec<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Vec<f64>,
}

impl Prepared {
    pub fn new(data: &SimDataset, kind: ReductionKind, m: Option<usize>) -> Result<Self> {
        let x = &data.x_train;
        let reduction = match kind {
            ReductionKind::None => mass::reduce::identity(x),
            _ => {
                let m = match m {
                    Some(m) => m,
                    None => intermediate_dim(x.nrows())?,
                };
                let m = m.min(x.ncols()).min(x.nrows());
                Reduction::fit(kind, x, &data.y_train, m)?
            }
        };
        Ok(Self {
            x_train: reduction.apply_train(x)?,
            y_train: data.y_train.clone(),
            x_test: reduction.apply(data.x_test.view())?,
            y_test: data.y_test.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }
}

/// Result of one method on one replication at one `p`.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub p: usize,
    pub test_mcr: f64,
    pub final_sparsity: Option<f64>,
    pub trace: Option<MassTrace>,
    /// Reduced test predictors (search methods only).
    pub z_test: Option<Array2<f64>>,
}

pub fn mass_config(method: &MethodSpec, defaults: &MassDefaults, seed: u64) -> MassConfig {
    let mut cfg = MassConfig::new(method.p.unwrap_or(defaults.p), seed);
    cfg.iterations = defaults.iterations;
    cfg.xi0 = defaults.xi0;
    cfg.alpha = defaults.alpha;
    cfg.l_start = defaults.l_start;
    cfg.l_end = defaults.l_end;
    if let Some(lambda) = method.lambda.or(defaults.lambda) {
        cfg.mode = Mode::Spline { lambda, q: defaults.q };
    }
    if method.kind == MethodKind::Mfss {
        cfg.policy = SparsityPolicy::Fixed(method.xi.unwrap_or(defaults.xi));
    }
    cfg
}

fn logistic_mcr(z_train: &Array2<f64>, y: &[f64], z_test: &Array2<f64>, y_test: &[f64]) -> Result<f64> {
    let model = fit_logistic(z_train.view(), y)?;
    Ok(mcr(&predict_classes(&model, z_test.view())?, y_test)?)
}

fn prefix_outcomes(
    data: &Prepared,
    train: &Array2<f64>,
    test: &Array2<f64>,
    ps: impl Iterator<Item = usize>,
) -> Result<Vec<MethodOutcome>> {
    ps.map(|p| {
        let idx: Vec<usize> = (0..p).collect();
        let tr = train.select(Axis(1), &idx);
        let te = test.select(Axis(1), &idx);
        Ok(MethodOutcome {
            p,
            test_mcr: logistic_mcr(&tr, &data.y_train, &te, &data.y_test)?,
            final_sparsity: None,
            trace: None,
            z_test: None,
        })
    })
    .collect()
}

/// Runs `method` on prepared data. Sweeping baselines return one outcome per
/// `p` in `1..=p_max`, stopping early when fewer directions exist.
pub fn run_method(
    method: &MethodSpec,
    defaults: &MassDefaults,
    data: &Prepared,
    seed: u64,
    trace_test: bool,
    p_max: Option<usize>,
) -> Result<Vec<MethodOutcome>> {
    let dim = data.dim();
    let n = data.x_train.nrows();
    let fixed_p = method.p.unwrap_or(defaults.p);
    let top = if method.sweep {
        p_max.unwrap_or(dim).min(dim)
    } else {
        if fixed_p > dim {
            return Err(HarnessError::Config(format!("p = {fixed_p} exceeds the {dim} available predictors")));
        }
        fixed_p
    };
    let ps = |avail: usize| -> Box<dyn Iterator<Item = usize>> {
        if method.sweep {
            Box::new(1..=top.min(avail))
        } else {
            Box::new(std::iter::once(fixed_p).filter(move |p| *p <= avail))
        }
    };
    let x = data.x_train.as_array();
    let outcomes = match method.kind {
        MethodKind::Fd => vec![MethodOutcome {
            p: dim,
            test_mcr: logistic_mcr(x, &data.y_train, &data.x_test, &data.y_test)?,
            final_sparsity: None,
            trace: None,
            z_test: None,
        }],
        MethodKind::Lars => {
            let path = lars_entries(x.view(), &data.y_train, top)?;
            let order = &path.entry_order;
            let train = x.select(Axis(1), order);
            let test = data.x_test.select(Axis(1), order);
            prefix_outcomes(data, &train, &test, ps(order.len()))?
        }
        MethodKind::Pca => {
            let red = mass::pca_reduce(&data.x_train, top.min(n))?;
            let train = red.apply(x.view())?;
            let test = red.apply(data.x_test.view())?;
            prefix_outcomes(data, &train, &test, ps(red.m))?
        }
        MethodKind::Sis => {
            let red = mass::sis_reduce(&data.x_train, &data.y_train, top)?;
            let train = red.apply(x.view())?;
            let test = red.apply(data.x_test.view())?;
            prefix_outcomes(data, &train, &test, ps(red.m))?
        }
        MethodKind::Mass | MethodKind::Mfss => {
            let cfg = mass_config(method, defaults, seed);
            let eval = trace_test.then(|| EvalSet {
                x: data.x_test.view(),
                y: &data.y_test,
            });
            let res = run_mass(&data.x_train, &data.y_train, &cfg, eval)?;
            let z_test = res.directions.transform(data.x_test.view())?;
            let pred = predict_classes(&res.model, z_test.view())?;
            vec![MethodOutcome {
                p: cfg.p,
                test_mcr: mcr(&pred, &data.y_test)?,
                final_sparsity: Some(res.directions.mean_sparsity()),
                trace: Some(res.trace),
                z_test: Some(z_test),
            }]
        }
    };
    if outcomes.is_empty() {
        return Err(HarnessError::Config(format!("{method} produced no directions")));
    }
    Ok(outcomes)
}

/// Seed of the data stream for replication `rep`.
pub fn replication_stream(master: u64, rep: usize) -> RngStream {
    RngStream::new(master).child_indexed("replication", rep as u64)
}

/// Seed for one method on one replication; independent of which other
/// methods are in the experiment.
pub fn method_seed(master: u64, label: &str, rep: usize) -> u64 {
    RngStream::new(master)
        .child_indexed(&format!("method/{label}"), rep as u64)
        .next_u64()
}

pub fn load_data(source: &DataSource, master: u64, rep: usize) -> Result<SimDataset> {
    match source {
        DataSource::Study { study, sizes } => Ok(gen_sim(*study, *sizes, &mut replication_stream(master, rep))?),
        DataSource::Csv { train, test } => Ok(SimDataset::read_csv(train, test)?),
    }
}

struct RepRecord {
    rows: Vec<Vec<ResultRow>>,
    traces: Vec<Option<MassTrace>>,
    failures: Vec<Failure>,
}

fn run_replication(spec: &ExperimentSpec, rep: usize) -> RepRecord {
    let mut rows = vec![Vec::new(); spec.methods.len()];
    let mut traces = vec![None; spec.methods.len()];
    let mut failures = Vec::new();
    let na_row = |label: String, p: usize, seed: u64, bayes: Option<f64>| ResultRow {
        method: label,
        p,
        replication: rep,
        seed,
        test_mcr: None,
        bayes_mcr: bayes,
        final_sparsity: None,
        wall_seconds: None,
    };
    let data = match load_data(&spec.source, spec.seed, rep) {
        Ok(d) => d,
        Err(e) => {
            for (i, m) in spec.methods.iter().enumerate() {
                let label = m.label();
                let seed = method_seed(spec.seed, &label, rep);
                failures.push(Failure {
                    method: label.clone(),
                    replication: rep,
                    reason: format!("data: {e}"),
                });
                rows[i].push(na_row(label, m.p.unwrap_or(spec.mass.p), seed, None));
            }
            return RepRecord { rows, traces, failures };
        }
    };
    let bayes = bayes_rate_estimate(&data).ok();
    let mut prepared: BTreeMap<&'static str, std::result::Result<Prepared, String>> = BTreeMap::new();
    for (i, method) in spec.methods.iter().enumerate() {
        let label = method.label();
        let seed = method_seed(spec.seed, &label, rep);
        let kind = method.reduction.unwrap_or(spec.reduction);
        let prep = prepared
            .entry(kind.name())
            .or_insert_with(|| Prepared::new(&data, kind, spec.m).map_err(|e| e.to_string()));
        let start = Instant::now();
        let result = match prep {
            Ok(p) => run_method(method, &spec.mass, p, seed, spec.trace_test, spec.p_max).map_err(|e| e.to_string()),
            Err(e) => Err(format!("reduction: {e}")),
        };
        let wall = spec.record_wall_time.then(|| start.elapsed().as_secs_f64());
        match result {
            Ok(outcomes) => {
                for o in outcomes {
                    rows[i].push(ResultRow {
                        method: label.clone(),
                        p: o.p,
                        replication: rep,
                        seed,
                        test_mcr: Some(o.test_mcr),
                        bayes_mcr: bayes,
                        final_sparsity: o.final_sparsity,
                        wall_seconds: wall,
                    });
                    if o.trace.is_some() {
                        traces[i] = o.trace;
                    }
                }
            }
            Err(reason) => {
                failures.push(Failure {
                    method: label.clone(),
                    replication: rep,
                    reason,
                });
                let mut row = na_row(label, method.p.unwrap_or(spec.mass.p), seed, bayes);
                row.wall_seconds = wall;
                rows[i].push(row);
            }
        }
    }
    RepRecord { rows, traces, failures }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<RepRecord> = pool.install(|| {
        (0..spec.reps)
            .into_par_iter()
            .map(|rep| run_replication(spec, rep))
            .collect()
    });

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (i, method) in spec.methods.iter().enumerate() {
        for r in &records {
            rows.extend(r.rows[i].iter().cloned());
        }
        let ts: Vec<&MassTrace> = records.iter().filter_map(|r| r.traces[i].as_ref()).collect();
        if let Some(avg) = AveragedTrace::from_traces(&ts) {
            traces.push((method.label(), avg));
        }
    }
    let failures = records.iter().flat_map(|r| r.failures.iter().cloned()).collect();
    let table = aggregate(&rows);
    let bayes = bayes_summary(&rows);
    Ok(ExperimentOutput {
        rows,
        failures,
        table,
        traces,
        bayes,
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn bayes_summary(rows: &[ResultRow]) -> Option<(f64, f64)> {
    let mut per_rep = BTreeMap::new();
    for r in rows {
        if let Some(b) = r.bayes_mcr {
            per_rep.entry(r.replication).or_insert(b);
        }
    }
    if per_rep.is_empty() {
        return None;
    }
    Some(mean_se(&per_rep.values().copied().collect::<Vec<_>>()))
}

/// Summarizes per-replication rows, methods in order of first appearance.
/// Rows with a missing MCR are left out of the means.
pub fn aggregate(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_method: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if !by_method.contains_key(r.method.as_str()) {
            order.push(&r.method);
        }
        let curve = by_method.entry(&r.method).or_default();
        let cell = curve.entry(r.p).or_default();
        if let Some(v) = r.test_mcr {
            cell.push(v);
        }
    }
    order
        .into_iter()
        .filter_map(|name| {
            let curve = &by_method[name];
            let full = curve.values().map(Vec::len).max().unwrap_or(0);
            if full == 0 {
                return None;
            }
            let swept = curve.len() > 1;
            let mut best: Option<(usize, f64, f64)> = None;
            for (&p, vals) in curve {
                if vals.len() < full {
                    continue;
                }
                let (m, se) = mean_se(vals);
                if best.map_or(true, |(_, bm, _)| m < bm) {
                    best = Some((p, m, se));
                }
            }
            let (p, mean, se) = best?;
            Some(SummaryRow {
                method: name.to_string(),
                p,
                swept,
                mean,
                se,
                reps: full,
            })
        })
        .collect()
}

/// Mean test MCR curve over `p` for one swept method.
pub fn sweep_curve(rows: &[ResultRow], method: &str) -> Vec<(usize, f64)> {
    let mut curve: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method) {
        if let Some(v) = r.test_mcr {
            curve.entry(r.p).or_default().push(v);
        }
    }
    curve.into_iter().map(|(p, v)| (p, mean_se(&v).0)).collect()
}
