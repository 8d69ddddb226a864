//! The stochastic search loop: keep the `p` best directions, refill the bank
//! with fresh sparse random directions, reselect, and adapt the sparsity
//! level to what was selected.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};

use crate::classify::{check_labels, fit_logistic, mcr, predict_classes, LogisticModel};
use crate::error::{param, Error, Result};
use crate::numerics::{DataMatrix, RngStream};
use crate::projection::{gen_columns_with, sparsity_of, ProjectionMatrix, SparsitySpec};
use crate::selection::{lars_entries, select_first_p};
use crate::spline::{
    curvature_gram, expand_view, gen_spline_columns, CurvatureOperator, NcsBasis, SplineCoeffs,
    DEFAULT_DEGREES_OF_FREEDOM, DEFAULT_GRID_POINTS,
};

pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_INITIAL_SPARSITY: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Linear,
    /// Additive natural-spline components with curvature budget `lambda`
    /// and `q` basis functions per predictor.
    Spline { lambda: f64, q: usize },
}

impl Mode {
    pub fn spline(lambda: f64) -> Self {
        Mode::Spline {
            lambda,
            q: DEFAULT_DEGREES_OF_FREEDOM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityPolicy {
    /// MASS: the next target is the sparsity of the columns just selected.
    Adaptive,
    /// MFSS: the target never changes. A value of exactly 0 generates fully
    /// dense columns.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassConfig {
    pub p: usize,
    pub iterations: usize,
    pub xi0: f64,
    pub alpha: f64,
    pub mode: Mode,
    pub policy: SparsityPolicy,
    /// Bank size at the first iteration; `None` means `min(ceil(n/2), dim - 1)`.
    pub l_start: Option<usize>,
    /// Bank size at the last iteration; `None` means `2p`.
    pub l_end: Option<usize>,
    pub seed: u64,
}

impl MassConfig {
    pub fn new(p: usize, seed: u64) -> Self {
        Self {
            p,
            iterations: DEFAULT_ITERATIONS,
            xi0: DEFAULT_INITIAL_SPARSITY,
            alpha: DEFAULT_ALPHA,
            mode: Mode::Linear,
            policy: SparsityPolicy::Adaptive,
            l_start: None,
            l_end: None,
            seed,
        }
    }

    pub fn mfss(p: usize, xi: f64, seed: u64) -> Self {
        Self {
            policy: SparsityPolicy::Fixed(xi),
            ..Self::new(p, seed)
        }
    }

    /// Resolves the bank-size schedule for `n` training rows and a search
    /// space of dimension `dim` (predictors, or expanded spline features).
    pub fn schedule(&self, n: usize, dim: usize) -> Result<LSchedule> {
        if self.p == 0 {
            return param("target dimension p must be at least 1");
        }
        if self.iterations == 0 {
            return param("MASS needs at least one iteration");
        }
        let l_start = self.l_start.unwrap_or_else(|| n.div_ceil(2).min(dim.saturating_sub(1)));
        let l_end = self.l_end.unwrap_or(2 * self.p);
        if !(self.p < l_end && l_end <= l_start && l_start < dim) {
            return param(format!(
                "bank sizes must satisfy p < L_end <= L_start < dim; got p = {}, L_end = {l_end}, L_start = {l_start}, dim = {dim}",
                self.p
            ));
        }
        Ok(LSchedule {
            l_start,
            l_end,
            p: self.p,
            iterations: self.iterations,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return param(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.xi0) {
            return param(format!("initial sparsity {} outside [0, 1]", self.xi0));
        }
        if let SparsityPolicy::Fixed(xi) = self.policy {
            if !(0.0..=1.0).contains(&xi) {
                return param(format!("fixed sparsity {xi} outside [0, 1]"));
            }
        }
        if let Mode::Spline { lambda, q } = self.mode {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return param(format!("curvature budget must be non-negative, got {lambda}"));
            }
            if q < 3 {
                return param(format!("spline basis needs q >= 3, got {q}"));
            }
        }
        Ok(())
    }
}

/// Linear ramp of bank sizes from `l_start` (iteration 1) to `l_end`
/// (iteration `I`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LSchedule {
    pub l_start: usize,
    pub l_end: usize,
    pub p: usize,
    pub iterations: usize,
}

impl LSchedule {
    pub fn at(&self, iter: usize) -> usize {
        l_schedule(iter, self)
    }
}

pub fn l_schedule(iter: usize, s: &LSchedule) -> usize {
    let t = if s.iterations <= 1 {
        0.0
    } else {
        (iter.clamp(1, s.iterations) - 1) as f64 / (s.iterations - 1) as f64
    };
    let l = s.l_start as f64 + t * (s.l_end as f64 - s.l_start as f64);
    (l.round() as usize).max(s.p + 1)
}

/// Sparsity target for the next round of candidates.
pub fn next_sparsity(selected_sparsity: f64, policy: SparsityPolicy) -> f64 {
    match policy {
        SparsityPolicy::Adaptive => selected_sparsity,
        SparsityPolicy::Fixed(xi) => xi,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub l: usize,
    /// Deviance of the logistic fit on the training projection.
    pub deviance: f64,
    /// Mean sparsity of the selected directions.
    pub xi_bar: f64,
    pub test_mcr: Option<f64>,
    /// Fewer than `p` directions entered the selection path.
    pub shortfall: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MassTrace {
    pub entries: Vec<TraceEntry>,
}

impl MassTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn deviance(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.deviance).collect()
    }

    pub fn xi_bar(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.xi_bar).collect()
    }

    pub fn test_mcr(&self) -> Option<Vec<f64>> {
        self.entries.iter().map(|e| e.test_mcr).collect()
    }

    pub fn shortfalls(&self) -> usize {
        self.entries.iter().filter(|e| e.shortfall).count()
    }
}

/// Standardization and spline basis fitted on training predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFeatures {
    pub mean: Array1<f64>,
    pub sd: Array1<f64>,
    pub basis: NcsBasis,
}

impl SplineFeatures {
    /// Standardizes with training moments; the basis spans the pooled range
    /// of the standardized training values.
    pub fn fit(x: ArrayView2<'_, f64>, q: usize) -> Result<Self> {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).ok_or(Error::Empty {
            rows: x.nrows(),
            cols: x.ncols(),
        })?;
        let sd = x.var_axis(Axis(0), if n > 1.0 { 1.0 } else { 0.0 }).mapv(f64::sqrt);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in x.rows() {
            for (k, v) in row.iter().enumerate() {
                if sd[k] > 0.0 {
                    let s = (v - mean[k]) / sd[k];
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        if !(hi > lo) {
            return Err(Error::Contract("every predictor is constant; no spline domain".into()));
        }
        Ok(Self {
            mean,
            sd,
            basis: NcsBasis::new((lo, hi), q)?,
        })
    }

    pub fn expand(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape {
                op: "spline expansion",
                left: x.dim(),
                right: (1, self.mean.len()),
            });
        }
        let mut s = &x - &self.mean;
        for (k, mut col) in s.axis_iter_mut(Axis(1)).enumerate() {
            let sd = self.sd[k];
            if sd > 0.0 {
                col.mapv_inplace(|v| v / sd);
            } else {
                col.fill(0.0);
            }
        }
        expand_view(s.view(), &self.basis)
    }
}

/// The learned reduction.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Directions {
    Linear(ProjectionMatrix),
    Spline {
        coeffs: SplineCoeffs,
        features: SplineFeatures,
    },
}

impl Directions {
    pub fn mean_sparsity(&self) -> f64 {
        match self {
            Directions::Linear(a) => a.mean_sparsity(),
            Directions::Spline { coeffs, .. } => coeffs.mean_sparsity(),
        }
    }

    /// Maps predictors (same columns as the training data) into the reduced space.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Directions::Linear(a) => crate::projection::project_view(x, a.entries().view()),
            Directions::Spline { coeffs, features } => Ok(features.expand(x)?.dot(coeffs.theta())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MassResult {
    pub directions: Directions,
    pub z_final: DataMatrix,
    pub model: LogisticModel,
    pub trace: MassTrace,
}

impl MassResult {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        predict_classes(&self.model, self.directions.transform(x)?.view())
    }
}

/// Held-out data used only to report test MCR along the trace.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [f64],
}

pub fn run_mass(x: &DataMatrix, y: &[f64], config: &MassConfig, eval: Option<EvalSet<'_>>) -> Result<MassResult> {
    run_mass_observed(x, y, config, eval, |_, _| {})
}

/// Candidate directions in whichever representation the mode uses: columns
/// of `A` (`d x L`) or of `Theta` (`q d x L`).
struct Bank {
    coef: Array2<f64>,
    sparsity: Vec<f64>,
}

struct Search<'a> {
    design: Array2<f64>,
    eval_design: Option<Array2<f64>>,
    mode: Mode,
    curvature: Option<CurvatureOperator>,
    predictors: usize,
    config: &'a MassConfig,
}

impl Search<'_> {
    fn fresh(&self, count: usize, xi_bar: f64, rng: &mut RngStream) -> Result<Bank> {
        let mut draw: Box<dyn FnMut(&mut RngStream) -> f64> = if xi_bar == 0.0
            && matches!(self.config.policy, SparsityPolicy::Fixed(_))
        {
            Box::new(|_| 0.0)
        } else {
            let spec = SparsitySpec::new(xi_bar, self.config.alpha)?;
            let (a, b) = spec.beta_params();
            let beta = rand_distr::Beta::new(a, b).map_err(|e| Error::Parameter(e.to_string()))?;
            Box::new(move |r| rand_distr::Distribution::sample(&beta, r))
        };
        match (self.mode, &self.curvature) {
            (Mode::Spline { lambda, .. }, Some(op)) => {
                let block = gen_spline_columns(self.predictors, count, lambda, op, &mut draw, rng)?;
                let q = op.q();
                let sparsity = block
                    .theta
                    .axis_iter(Axis(1))
                    .map(|c| crate::spline::block_sparsity(c, q))
                    .collect();
                Ok(Bank {
                    coef: block.theta,
                    sparsity,
                })
            }
            _ => {
                let block = gen_columns_with(self.predictors, count, &mut draw, rng)?;
                let sparsity = block
                    .columns
                    .axis_iter(Axis(1))
                    .map(|c| sparsity_of(c.insert_axis(Axis(1))))
                    .collect();
                Ok(Bank {
                    coef: block.columns,
                    sparsity,
                })
            }
        }
    }
}

/// Like [`run_mass`], calling `observe(iteration, z)` with the training
/// projection after every iteration's selection.
pub fn run_mass_observed<F>(
    x: &DataMatrix,
    y: &[f64],
    config: &MassConfig,
    eval: Option<EvalSet<'_>>,
    mut observe: F,
) -> Result<MassResult>
where
    F: FnMut(usize, &Array2<f64>),
{
    config.validate()?;
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::Shape {
            op: "run_mass",
            left: (n, d),
            right: (y.len(), 1),
        });
    }
    check_labels(y)?;
    if let Some(ev) = &eval {
        if ev.x.ncols() != d || ev.y.len() != ev.x.nrows() {
            return Err(Error::Shape {
                op: "run_mass evaluation set",
                left: ev.x.dim(),
                right: (ev.y.len(), d),
            });
        }
    }

    let (design, features, curvature) = match config.mode {
        Mode::Linear => (x.as_array().clone(), None, None),
        Mode::Spline { q, .. } => {
            let f = SplineFeatures::fit(x.view(), q)?;
            let op = curvature_gram(&f.basis, DEFAULT_GRID_POINTS)?;
            (f.expand(x.view())?, Some(f), Some(op))
        }
    };
    let eval_design = match (&eval, &features) {
        (Some(ev), Some(f)) => Some(f.expand(ev.x)?),
        (Some(ev), None) => Some(ev.x.to_owned()),
        (None, _) => None,
    };
    let schedule = config.schedule(n, design.ncols())?;
    let search = Search {
        design,
        eval_design,
        mode: config.mode,
        curvature,
        predictors: d,
        config,
    };

    let mut rng = RngStream::new(config.seed);
    let p = config.p;
    let mut xi_bar = match config.policy {
        SparsityPolicy::Adaptive => config.xi0,
        SparsityPolicy::Fixed(xi) => xi,
    };

    let initial = search.fresh(schedule.l_start, xi_bar, &mut rng)?;
    let (mut kept, _) = select(&search.design, initial, p, y)?;
    xi_bar = next_sparsity(mean(&kept.sparsity), config.policy);

    let mut trace = MassTrace::default();
    let mut last_z = Array2::<f64>::zeros((n, p));
    for iter in 1..=config.iterations {
        let l = schedule.at(iter);
        let fresh = search.fresh(l - p, xi_bar, &mut rng)?;
        let bank = Bank {
            coef: concatenate(Axis(1), &[kept.coef.view(), fresh.coef.view()])
                .expect("bank blocks share their row count"),
            sparsity: kept.sparsity.iter().chain(&fresh.sparsity).copied().collect(),
        };
        let (chosen, shortfall) = select(&search.design, bank, p, y)?;
        kept = chosen;
        let selected_sparsity = mean(&kept.sparsity);
        xi_bar = next_sparsity(selected_sparsity, config.policy);

        let z = search.design.dot(&kept.coef);
        let fit = fit_logistic(z.view(), y)?;
        let test_mcr = match (&search.eval_design, &eval) {
            (Some(ed), Some(ev)) => {
                let zt = ed.dot(&kept.coef);
                Some(mcr(&predict_classes(&fit, zt.view())?, ev.y)?)
            }
            _ => None,
        };
        trace.entries.push(TraceEntry {
            iteration: iter,
            l,
            deviance: fit.deviance,
            xi_bar: selected_sparsity,
            test_mcr,
            shortfall,
        });
        observe(iter, &z);
        last_z = z;
    }

    let model = fit_logistic(last_z.view(), y)?;
    let directions = match features {
        None => Directions::Linear(ProjectionMatrix::from_unit_columns(kept.coef)),
        Some(features) => {
            let lambda = match config.mode {
                Mode::Spline { lambda, .. } => lambda,
                Mode::Linear => unreachable!("features exist only in spline mode"),
            };
            let q = features.basis.q();
            Directions::Spline {
                coeffs: SplineCoeffs::new(kept.coef, lambda, q)?,
                features,
            }
        }
    };
    Ok(MassResult {
        directions,
        z_final: DataMatrix::new(last_z)?,
        model,
        trace,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Picks the first `p` bank columns to enter the LARS path. A shortfall is
/// topped up with the remaining bank columns in bank order.
fn select(design: &Array2<f64>, bank: Bank, p: usize, y: &[f64]) -> Result<(Bank, bool)> {
    let z = design.dot(&bank.coef);
    let path = lars_entries(z.view(), y, p)?;
    let sel = select_first_p(&path, p)?;
    let mut idx = sel.indices;
    if sel.shortfall {
        for j in 0..bank.coef.ncols() {
            if idx.len() == p {
                break;
            }
            if !idx.contains(&j) {
                idx.push(j);
            }
        }
        if idx.len() < p {
            return Err(Error::Selection(format!(
                "bank of {} columns cannot supply {p} directions",
                bank.coef.ncols()
            )));
        }
    }
    Ok((
        Bank {
            coef: bank.coef.select(Axis(1), &idx),
            sparsity: idx.iter().map(|&j| bank.sparsity[j]).collect(),
        },
        sel.shortfall,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_mvnormal;
    use rand::Rng;

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let s = LSchedule {
            l_start: 50,
            l_end: 10,
            p: 5,
            iterations: 500,
        };
        assert_eq!(s.at(1), 50);
        assert_eq!(s.at(500), 10);
        assert!((s.at(250) as i64 - 30).abs() <= 1);
        let tight = LSchedule {
            l_start: 7,
            l_end: 2,
            p: 5,
            iterations: 10,
        };
        assert_eq!(tight.at(10), 6);
    }

    #[test]
    fn default_schedule_is_clamped_below_dimension() {
        let cfg = MassConfig::new(5, 0);
        let s = cfg.schedule(100, 50).unwrap();
        assert_eq!((s.l_start, s.l_end), (49, 10));
        let s = cfg.schedule(60, 50).unwrap();
        assert_eq!(s.l_start, 30);
        assert!(cfg.schedule(100, 10).is_err());
    }

    #[test]
    fn next_sparsity_contract() {
        let a = ProjectionMatrix::selector(50, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(next_sparsity(a.mean_sparsity(), SparsityPolicy::Adaptive), 0.98);
        assert_eq!(next_sparsity(0.0, SparsityPolicy::Adaptive), 0.0);
        assert_eq!(next_sparsity(0.77, SparsityPolicy::Fixed(0.3)), 0.3);
    }

    fn toy(seed: u64, n: usize, d: usize) -> (DataMatrix, Vec<f64>) {
        let mut rng = RngStream::new(seed);
        let x = sample_mvnormal(n, d, 1.0, 0.0, &mut rng).unwrap();
        let y = (0..n)
            .map(|i| {
                let eta = 2.0 * x[[i, 0]] - 2.0 * x[[i, 1]];
                if rng.random::<f64>() < crate::classify::sigmoid(eta) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn identical_inputs_give_identical_results() {
        let (x, y) = toy(1, 60, 12);
        let mut cfg = MassConfig::new(2, 9);
        cfg.iterations = 30;
        let a = run_mass(&x, &y, &cfg, None).unwrap();
        let b = run_mass(&x, &y, &cfg, None).unwrap();
        assert_eq!(a.directions, b.directions);
        assert_eq!(a.trace, b.trace);
        cfg.seed = 10;
        let c = run_mass(&x, &y, &cfg, None).unwrap();
        assert_ne!(a.directions, c.directions);
    }

    #[test]
    fn fixed_policy_keeps_generation_target() {
        let (x, y) = toy(2, 60, 12);
        let mut cfg = MassConfig::mfss(2, 0.0, 3);
        cfg.iterations = 20;
        let r = run_mass(&x, &y, &cfg, None).unwrap();
        assert_eq!(r.trace.len(), 20);
        assert!(r.trace.xi_bar().iter().all(|v| *v == 0.0));
        assert_eq!(r.directions.mean_sparsity(), 0.0);
    }

    #[test]
    fn adaptive_trace_in_unit_interval_and_l_follows_schedule() {
        let (x, y) = toy(3, 60, 12);
        let mut cfg = MassConfig::new(2, 4);
        cfg.iterations = 25;
        let r = run_mass(&x, &y, &cfg, None).unwrap();
        let s = cfg.schedule(60, 12).unwrap();
        for e in &r.trace.entries {
            assert!((0.0..=1.0).contains(&e.xi_bar));
            assert_eq!(e.l, s.at(e.iteration));
            assert!(e.deviance >= 0.0);
        }
    }

    #[test]
    fn final_projection_matches_directions() {
        let (x, y) = toy(4, 50, 10);
        let mut cfg = MassConfig::new(3, 5);
        cfg.iterations = 15;
        let r = run_mass(&x, &y, &cfg, None).unwrap();
        let z = r.directions.transform(x.view()).unwrap();
        assert_eq!(z, *r.z_final.as_array());
        let Directions::Linear(a) = &r.directions else { panic!() };
        for c in a.entries().axis_iter(Axis(1)) {
            assert!((c.dot(&c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_set_never_changes_selection() {
        let (x, y) = toy(5, 60, 12);
        let (xt, yt) = toy(6, 200, 12);
        let mut cfg = MassConfig::new(2, 7);
        cfg.iterations = 20;
        let plain = run_mass(&x, &y, &cfg, None).unwrap();
        let traced = run_mass(&x, &y, &cfg, Some(EvalSet { x: xt.view(), y: &yt })).unwrap();
        assert_eq!(plain.directions, traced.directions);
        assert!(traced.trace.test_mcr().is_some());
        assert!(plain.trace.test_mcr().is_none());
    }

    #[test]
    fn spline_mode_runs_and_respects_budget() {
        let (x, y) = toy(7, 60, 6);
        let mut cfg = MassConfig::mfss(2, 0.3, 8);
        cfg.mode = Mode::spline(5.0);
        cfg.iterations = 10;
        let r = run_mass(&x, &y, &cfg, None).unwrap();
        let Directions::Spline { coeffs, features } = &r.directions else { panic!() };
        let op = curvature_gram(&features.basis, DEFAULT_GRID_POINTS).unwrap();
        let q = coeffs.q();
        for c in coeffs.theta().axis_iter(Axis(1)) {
            for k in 0..coeffs.predictors() {
                let block = c.slice(ndarray::s![k * q..(k + 1) * q]);
                if block.iter().any(|v| *v != 0.0) {
                    assert!(op.curvature(block) <= 5.0 * (1.0 + 1e-6));
                }
            }
        }
        assert_eq!(r.z_final.dim(), (60, 2));
    }

    #[test]
    fn rejects_bad_configuration() {
        let (x, y) = toy(8, 40, 8);
        let mut cfg = MassConfig::new(0, 1);
        assert!(run_mass(&x, &y, &cfg, None).is_err());
        cfg.p = 2;
        cfg.iterations = 0;
        assert!(run_mass(&x, &y, &cfg, None).is_err());
        cfg.iterations = 5;
        cfg.alpha = -1.0;
        assert!(run_mass(&x, &y, &cfg, None).is_err());
        let cfg = MassConfig::new(2, 1);
        assert!(run_mass(&x, &y[..10], &cfg, None).is_err());
        let bad = vec![2.0; 40];
        assert!(run_mass(&x, &bad, &cfg, None).is_err());
    }
}
