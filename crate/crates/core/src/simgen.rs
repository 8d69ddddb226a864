//! Generators for the five simulation studies. Every dataset keeps the
//! generating truth so Bayes rates can be computed on the test split.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classify::sigmoid;
use crate::error::{param, Error, Result};
use crate::numerics::{sample_gh, sample_mvnormal, DataMatrix, RngStream};
use crate::projection::sparsity_of;
use crate::spline::{
    curvature_gram, expand_view, gen_spline_columns, NcsBasis, SplineCoeffs, DEFAULT_DEGREES_OF_FREEDOM,
    DEFAULT_GRID_POINTS,
};

/// Frequency of the sine link in Studies III and V.
pub const OMEGA_DENSE: f64 = 0.05 * std::f64::consts::PI;
/// Frequency of the sine link in Study IV.
pub const OMEGA_CONTAMINATED: f64 = 0.005 * std::f64::consts::PI;
/// Domain of the truth spline basis in Study I.
pub const TRUTH_SPLINE_DOMAIN: (f64, f64) = (-3.0, 3.0);
/// Accepted window for the population Bayes rate of uniformly drawn
/// coefficients (Study I).
pub const BAYES_WINDOW: (f64, f64) = (0.05, 0.25);
/// Population Bayes rates the coefficient scale is tuned to.
pub const BAYES_TARGET_II2: f64 = 0.112;
pub const BAYES_TARGET_III: f64 = 0.082;
pub const BAYES_TARGET_IV: f64 = 0.068;
pub const BAYES_TARGET_V: f64 = BAYES_TARGET_III;
/// Rows drawn to evaluate a population Bayes rate.
pub const POPULATION_ROWS: usize = 20_000;
const MAX_BETA_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Study {
    /// Nonlinear additive truth with curvature `lambda0` and block sparsity `xi0`.
    I { lambda0: f64, xi0: f64 },
    /// Sparse selector truth on the major (scenario 1) or minor (scenario 2) columns.
    II { scenario: u8 },
    III,
    IV,
    V,
}

impl Study {
    pub fn default_sizes(&self) -> Sizes {
        match self {
            Study::V => Sizes {
                n_train: 100,
                n_test: 1000,
                d: 1000,
            },
            _ => Sizes {
                n_train: 100,
                n_test: 1000,
                d: 50,
            },
        }
    }

    /// Short tag used on the command line and in file names.
    pub fn tag(&self) -> String {
        match self {
            Study::I { lambda0, .. } if *lambda0 == 5.0 => "I".into(),
            Study::I { lambda0, .. } => format!("I{lambda0}"),
            Study::II { scenario } => format!("II{scenario}"),
            Study::III => "III".into(),
            Study::IV => "IV".into(),
            Study::V => "V".into(),
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for Study {
    type Err = Error;

    /// Accepts `I`, `I10` (curvature 10), `II1`, `II2`, `III`, `IV`, `V`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        match t.as_str() {
            "I" => Ok(Study::I { lambda0: 5.0, xi0: 0.3 }),
            "II1" | "II-1" => Ok(Study::II { scenario: 1 }),
            "II2" | "II-2" => Ok(Study::II { scenario: 2 }),
            "III" => Ok(Study::III),
            "IV" => Ok(Study::IV),
            "V" => Ok(Study::V),
            _ => {
                if let Some(rest) = t.strip_prefix('I') {
                    if let Ok(lambda0) = rest.trim_start_matches([':', '-']).parse::<f64>() {
                        if lambda0 >= 0.0 {
                            return Ok(Study::I { lambda0, xi0: 0.3 });
                        }
                    }
                }
                param(format!("unknown study '{s}'; expected I, I<lambda>, II1, II2, III, IV or V"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkKind {
    /// `P(y = 1 | z) = sigmoid(z' beta)`.
    Logit,
    /// `P(y = 1 | z) = sigmoid(sin(omega z)' beta)`.
    SineLogit { omega: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub kind: LinkKind,
    pub beta: Vec<f64>,
}

impl LinkSpec {
    pub fn new(kind: LinkKind, beta: Vec<f64>) -> Result<Self> {
        if let LinkKind::SineLogit { omega } = kind {
            if !(omega > 0.0) {
                return param(format!("sine link frequency must be positive, got {omega}"));
            }
        }
        Ok(Self { kind, beta })
    }

    pub fn eta(&self, z: ArrayView1<'_, f64>) -> f64 {
        match self.kind {
            LinkKind::Logit => z.iter().zip(&self.beta).map(|(a, b)| a * b).sum(),
            LinkKind::SineLogit { omega } => z.iter().zip(&self.beta).map(|(a, b)| (omega * a).sin() * b).sum(),
        }
    }

    pub fn probabilities(&self, z0: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if z0.ncols() != self.beta.len() {
            return Err(Error::Shape {
                op: "link probabilities",
                left: z0.dim(),
                right: (self.beta.len(), 1),
            });
        }
        Ok(z0.rows().into_iter().map(|r| sigmoid(self.eta(r))).collect())
    }
}

/// Bernoulli labels with success probability given by the link.
pub fn logistic_labels(z0: ArrayView2<'_, f64>, spec: &LinkSpec, rng: &mut RngStream) -> Result<Vec<f64>> {
    Ok(spec
        .probabilities(z0)?
        .into_iter()
        .map(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
        .collect())
}

/// Expected Bayes error `E min(P, 1 - P)` over the rows of `z0`.
pub fn population_bayes_rate(z0: ArrayView2<'_, f64>, spec: &LinkSpec) -> Result<f64> {
    let p = spec.probabilities(z0)?;
    Ok(p.iter().map(|q| q.min(1.0 - q)).sum::<f64>() / p.len().max(1) as f64)
}

/// The map from predictors to the true reduced space.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum TrueMap {
    Linear(Array2<f64>),
    Spline { coeffs: SplineCoeffs, basis: NcsBasis },
}

impl TrueMap {
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            TrueMap::Linear(a) => crate::projection::project_view(x, a.view()),
            TrueMap::Spline { coeffs, basis } => Ok(expand_view(x, basis)?.dot(coeffs.theta())),
        }
    }

    /// Element sparsity of `A0`, or block sparsity of `Theta0`.
    pub fn sparsity(&self) -> f64 {
        match self {
            TrueMap::Linear(a) => sparsity_of(a.view()),
            TrueMap::Spline { coeffs, .. } => coeffs.mean_sparsity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub map: TrueMap,
    pub link: LinkSpec,
    pub p0: usize,
    pub lambda0: Option<f64>,
    pub xi0: f64,
    pub z0_train: Array2<f64>,
    pub z0_test: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SimDataset {
    pub study: Option<Study>,
    pub x_train: DataMatrix,
    pub y_train: Vec<f64>,
    pub x_test: DataMatrix,
    pub y_test: Vec<f64>,
    pub truth: Option<Truth>,
    /// Entries clamped while drawing g-and-h predictors.
    pub clamped: usize,
}

/// Predictor distribution of a study, used both for the data and for the
/// population sample behind Bayes-rate calibration.
struct Design {
    study: Study,
    d: usize,
}

/// Informative predictors in Study V.
const STUDY_V_INFORMATIVE: usize = 50;

impl Design {
    fn draw(&self, n: usize, rng: &mut RngStream) -> Result<(Array2<f64>, usize)> {
        let d = self.d;
        match self.study {
            Study::I { .. } => Ok((sample_mvnormal(n, d, 1.0, 0.0, rng)?.into_inner(), 0)),
            Study::II { .. } => {
                let mut x = sample_mvnormal(n, d, 1.0, 0.5, rng)?.into_inner();
                x.slice_mut(s![.., ..5.min(d)]).mapv_inplace(|v| v * 10.0);
                Ok((x, 0))
            }
            Study::III => Ok((sample_mvnormal(n, d, 1.0, 0.5, rng)?.into_inner(), 0)),
            Study::IV => {
                let gh = sample_gh(n, d, 0.5, 0.5, 0.5, rng)?;
                Ok((gh.data.into_inner(), gh.clamped))
            }
            Study::V => {
                let info = sample_mvnormal(n, STUDY_V_INFORMATIVE, 1.0, 0.5, rng)?.into_inner();
                let noise = sample_mvnormal(n, d - STUDY_V_INFORMATIVE, 0.5, 0.0, rng)?.into_inner();
                Ok((concatenate(Axis(1), &[info.view(), noise.view()]).expect("row counts agree"), 0))
            }
        }
    }
}

fn uniform_beta(p0: usize, half: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..p0).map(|_| rng.random_range(-half..half)).collect()
}

fn dense_map(d: usize, informative: usize, p0: usize, rng: &mut RngStream) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((d, p0));
    for k in 0..informative {
        for j in 0..p0 {
            a[[k, j]] = StandardNormal.sample(rng);
        }
    }
    a
}

/// Draws `beta ~ U(-half, half)^p0` until the population Bayes rate lands in
/// [`BAYES_WINDOW`].
fn accepted_uniform_beta(kind: LinkKind, z_pop: ArrayView2<'_, f64>, half: f64, rng: &mut RngStream) -> Result<LinkSpec> {
    for _ in 0..MAX_BETA_DRAWS {
        let link = LinkSpec::new(kind, uniform_beta(z_pop.ncols(), half, rng))?;
        let rate = population_bayes_rate(z_pop, &link)?;
        if (BAYES_WINDOW.0..=BAYES_WINDOW.1).contains(&rate) {
            return Ok(link);
        }
    }
    Err(Error::Generation(format!(
        "no coefficient draw in {MAX_BETA_DRAWS} attempts gave a Bayes rate inside {BAYES_WINDOW:?}"
    )))
}

/// Draws a direction `u ~ U(-1, 1)^p0` and scales it so the population Bayes
/// rate equals `target`.
fn calibrated_beta(kind: LinkKind, z_pop: ArrayView2<'_, f64>, target: f64, rng: &mut RngStream) -> Result<LinkSpec> {
    let u = uniform_beta(z_pop.ncols(), 1.0, rng);
    let rate_at = |c: f64| -> Result<f64> {
        let link = LinkSpec::new(kind, u.iter().map(|v| v * c).collect())?;
        population_bayes_rate(z_pop, &link)
    };
    // The rate is non-increasing in the scale; bisect on log scale.
    let (mut lo, mut hi) = (-6.0f64, 8.0f64);
    if rate_at(hi.exp())? > target {
        return Err(Error::Generation(format!("Bayes rate {target} is unreachable for this truth")));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = (0.5 * (lo + hi)).exp();
    LinkSpec::new(kind, u.iter().map(|v| v * c).collect())
}

/// Generates one train/test pair for `study`.
pub fn gen_sim(study: Study, sizes: Sizes, rng: &mut RngStream) -> Result<SimDataset> {
    let Sizes { n_train, n_test, d } = sizes;
    if n_train == 0 || n_test == 0 {
        return param("train and test sizes must be positive");
    }
    let min_d = match study {
        Study::V => STUDY_V_INFORMATIVE + 1,
        Study::II { .. } => 10,
        _ => 5,
    };
    if d < min_d {
        return param(format!("study {study} needs at least {min_d} predictors, got {d}"));
    }
    if let Study::II { scenario } = study {
        if scenario != 1 && scenario != 2 {
            return param(format!("study II has scenarios 1 and 2, not {scenario}"));
        }
    }
    let design = Design { study, d };
    let mut truth_rng = rng.child("truth");
    let mut pop_rng = rng.child("population");
    let mut data_rng = rng.child("data");

    let (map, p0, lambda0, xi0) = match study {
        Study::I { lambda0, xi0 } => {
            let basis = NcsBasis::new(TRUTH_SPLINE_DOMAIN, DEFAULT_DEGREES_OF_FREEDOM)?;
            let op = curvature_gram(&basis, DEFAULT_GRID_POINTS)?;
            let block = gen_spline_columns(d, 2, lambda0, &op, |_| xi0, &mut truth_rng)?;
            let coeffs = SplineCoeffs::new(block.theta, lambda0, basis.q())?;
            (TrueMap::Spline { coeffs, basis }, 2, Some(lambda0), xi0)
        }
        Study::II { scenario } => {
            let rows: Vec<usize> = if scenario == 1 {
                (0..5).collect()
            } else {
                rand::seq::index::sample(&mut truth_rng, d - 5, 5).into_iter().map(|i| i + 5).collect()
            };
            let a = crate::projection::ProjectionMatrix::selector(d, &rows)?;
            (TrueMap::Linear(a.entries().clone()), 5, None, 0.0)
        }
        Study::III | Study::IV => (TrueMap::Linear(dense_map(d, d, 5, &mut truth_rng)), 5, None, 0.0),
        Study::V => (
            TrueMap::Linear(dense_map(d, STUDY_V_INFORMATIVE, 5, &mut truth_rng)),
            5,
            None,
            0.0,
        ),
    };
    let xi0 = if matches!(study, Study::I { .. }) { xi0 } else { map.sparsity() };

    let link = match study {
        Study::II { scenario: 1 } => LinkSpec::new(LinkKind::Logit, uniform_beta(p0, 0.5, &mut truth_rng))?,
        _ => {
            let z_pop = match (&map, study) {
                // Only the informative block reaches Z0; skip drawing the noise.
                (TrueMap::Linear(a), Study::V) => {
                    let info = sample_mvnormal(POPULATION_ROWS, STUDY_V_INFORMATIVE, 1.0, 0.5, &mut pop_rng)?;
                    info.dot(&a.slice(s![..STUDY_V_INFORMATIVE, ..]))
                }
                _ => {
                    let (x_pop, _) = design.draw(POPULATION_ROWS, &mut pop_rng)?;
                    map.apply(x_pop.view())?
                }
            };
            match study {
                Study::I { .. } => accepted_uniform_beta(LinkKind::Logit, z_pop.view(), 2.0, &mut truth_rng)?,
                Study::III => calibrated_beta(
                    LinkKind::SineLogit { omega: OMEGA_DENSE },
                    z_pop.view(),
                    BAYES_TARGET_III,
                    &mut truth_rng,
                )?,
                Study::IV => calibrated_beta(
                    LinkKind::SineLogit {
                        omega: OMEGA_CONTAMINATED,
                    },
                    z_pop.view(),
                    BAYES_TARGET_IV,
                    &mut truth_rng,
                )?,
                Study::V => calibrated_beta(
                    LinkKind::SineLogit { omega: OMEGA_DENSE },
                    z_pop.view(),
                    BAYES_TARGET_V,
                    &mut truth_rng,
                )?,
                Study::II { .. } => calibrated_beta(LinkKind::Logit, z_pop.view(), BAYES_TARGET_II2, &mut truth_rng)?,
            }
        }
    };

    let (x_train, c1) = design.draw(n_train, &mut data_rng)?;
    let (x_test, c2) = design.draw(n_test, &mut data_rng)?;
    let z0_train = map.apply(x_train.view())?;
    let z0_test = map.apply(x_test.view())?;
    let y_train = logistic_labels(z0_train.view(), &link, &mut data_rng)?;
    let y_test = logistic_labels(z0_test.view(), &link, &mut data_rng)?;

    Ok(SimDataset {
        study: Some(study),
        x_train: DataMatrix::new(x_train)?,
        y_train,
        x_test: DataMatrix::new(x_test)?,
        y_test,
        truth: Some(Truth {
            map,
            link,
            p0,
            lambda0,
            xi0,
            z0_train,
            z0_test,
        }),
        clamped: c1 + c2,
    })
}

impl SimDataset {
    /// Builds a dataset without generating truth, e.g. from external files.
    pub fn from_parts(x_train: DataMatrix, y_train: Vec<f64>, x_test: DataMatrix, y_test: Vec<f64>) -> Result<Self> {
        if x_train.nrows() != y_train.len() || x_test.nrows() != y_test.len() {
            return param("label counts do not match predictor rows");
        }
        if x_train.ncols() != x_test.ncols() {
            return Err(Error::Shape {
                op: "train/test predictors",
                left: x_train.dim(),
                right: x_test.dim(),
            });
        }
        crate::classify::check_labels(&y_train)?;
        crate::classify::check_labels(&y_test)?;
        Ok(Self {
            study: None,
            x_train,
            y_train,
            x_test,
            y_test,
            truth: None,
            clamped: 0,
        })
    }

    /// Writes `<stem>_train.csv` and `<stem>_test.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (split, x, y) in [("train", &self.x_train, &self.y_train), ("test", &self.x_test, &self.y_test)] {
            let file = std::fs::File::create(dir.join(format!("{stem}_{split}.csv")))?;
            write_split(std::io::BufWriter::new(file), x.view(), y)?;
        }
        Ok(())
    }

    /// Reads a pair of files written by [`SimDataset::write_csv`].
    pub fn read_csv(train: &Path, test: &Path) -> Result<Self> {
        let (xtr, ytr) = read_split(train)?;
        let (xte, yte) = read_split(test)?;
        Self::from_parts(xtr, ytr, xte, yte)
    }
}

/// One row per observation, predictors `x1..xd` then the label `y`.
pub fn write_split<W: Write>(mut w: W, x: ArrayView2<'_, f64>, y: &[f64]) -> std::io::Result<()> {
    let header: Vec<String> = (1..=x.ncols()).map(|k| format!("x{k}")).collect();
    writeln!(w, "{},y", header.join(","))?;
    for (row, label) in x.rows().into_iter().zip(y) {
        for v in row {
            write!(w, "{v},")?;
        }
        writeln!(w, "{label}")?;
    }
    w.flush()
}

pub fn read_split(path: &Path) -> Result<(DataMatrix, Vec<f64>)> {
    let io = |e: std::io::Error| Error::Parameter(format!("{}: {e}", path.display()));
    let file = std::fs::File::open(path).map_err(io)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parameter(format!("{} is empty", path.display())))?
        .map_err(io)?;
    let width = header.split(',').count();
    if width < 2 {
        return param(format!("{} needs at least one predictor and a label", path.display()));
    }
    let mut values = Vec::new();
    let mut y = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return param(format!(
                "{} line {}: expected {width} fields, found {}",
                path.display(),
                i + 2,
                fields.len()
            ));
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::Parameter(format!("{} line {}: '{f}' is not a number", path.display(), i + 2))
            })?;
            if k + 1 == width {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let x = DataMatrix::from_shape_vec(y.len(), width - 1, values)?;
    Ok((x, y))
}
