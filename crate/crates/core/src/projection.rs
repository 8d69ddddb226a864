//! Sparse random projection directions: generation, normalization and
//! application.
//!
//! A candidate direction is built entry by entry as a standard normal times
//! a Bernoulli keep-mask, where each column carries its own sparsity level
//! drawn from a Beta distribution centred on the current target. Columns are
//! rescaled to unit Euclidean norm as soon as they are generated.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{param, Error, Result};
use crate::numerics::{DataMatrix, RngStream};

/// Lower clamp applied to the target sparsity before Beta parameters are formed.
pub const MIN_TARGET_SPARSITY: f64 = 0.01;
/// Upper clamp applied to the target sparsity before Beta parameters are formed.
pub const MAX_TARGET_SPARSITY: f64 = 0.99;
/// Attempts allowed to draw a column that is not identically zero.
pub const MAX_COLUMN_ATTEMPTS: usize = 100;

/// Target mean sparsity and Beta concentration for fresh columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsitySpec {
    target: f64,
    alpha: f64,
}

impl SparsitySpec {
    pub fn new(target: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&target) {
            return param(format!("target sparsity must lie in [0, 1], got {target}"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return param(format!("Beta concentration must be positive, got {alpha}"));
        }
        Ok(Self { target, alpha })
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The target after clamping into `[0.01, 0.99]`.
    pub fn clamped_target(&self) -> f64 {
        self.target.clamp(MIN_TARGET_SPARSITY, MAX_TARGET_SPARSITY)
    }

    /// `(alpha, alpha (1 - t) / t)` for the clamped target `t`; the Beta mean is `t`.
    pub fn beta_params(&self) -> (f64, f64) {
        let t = self.clamped_target();
        (self.alpha, self.alpha * (1.0 - t) / t)
    }

    fn distribution(&self) -> Beta<f64> {
        let (a, b) = self.beta_params();
        Beta::new(a, b).expect("Beta parameters are positive after clamping")
    }
}

/// Per-column sparsity levels, each drawn from the spec's Beta distribution.
pub fn draw_column_sparsities(count: usize, spec: &SparsitySpec, rng: &mut RngStream) -> Vec<f64> {
    let beta = spec.distribution();
    (0..count).map(|_| beta.sample(rng)).collect()
}

/// A block of freshly generated unit-norm columns, `d x count`, together with
/// the sparsity level each column was drawn at.
#[derive(Debug, Clone)]
pub struct ColumnBlock {
    pub columns: Array2<f64>,
    pub drawn_sparsity: Vec<f64>,
}

/// Generates `count` candidate columns of length `d` whose sparsity levels
/// follow `spec`.
pub fn gen_candidate_columns(
    d: usize,
    count: usize,
    spec: &SparsitySpec,
    rng: &mut RngStream,
) -> Result<ColumnBlock> {
    let beta = spec.distribution();
    gen_columns_with(d, count, |r| beta.sample(r), rng)
}

/// Generates columns using an arbitrary source of per-column sparsity
/// levels. A constant `0.0` source yields fully dense columns.
pub fn gen_columns_with<F>(d: usize, count: usize, mut sparsity: F, rng: &mut RngStream) -> Result<ColumnBlock>
where
    F: FnMut(&mut RngStream) -> f64,
{
    if d == 0 || count == 0 {
        return param(format!("cannot generate a {d}x{count} column block"));
    }
    let mut columns = Array2::<f64>::zeros((d, count));
    let mut drawn = Vec::with_capacity(count);
    let mut buf = vec![0.0; d];
    for j in 0..count {
        let mut ok = false;
        for _ in 0..MAX_COLUMN_ATTEMPTS {
            let xi = sparsity(rng);
            let keep = 1.0 - xi;
            let mut norm2 = 0.0;
            for v in buf.iter_mut() {
                *v = if rng.random::<f64>() < keep {
                    let u: f64 = StandardNormal.sample(rng);
                    u
                } else {
                    0.0
                };
                norm2 += *v * *v;
            }
            if norm2 > 0.0 {
                let inv = 1.0 / norm2.sqrt();
                for (k, v) in buf.iter().enumerate() {
                    columns[[k, j]] = v * inv;
                }
                drawn.push(xi);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Generation(format!(
                "column {j} was identically zero in {MAX_COLUMN_ATTEMPTS} attempts; check the sparsity clamp"
            )));
        }
    }
    Ok(ColumnBlock {
        columns,
        drawn_sparsity: drawn,
    })
}

/// Fraction of entries that are exactly zero.
pub fn sparsity_of(m: ArrayView2<'_, f64>) -> f64 {
    let total = m.len();
    if total == 0 {
        return 0.0;
    }
    m.iter().filter(|v| **v == 0.0).count() as f64 / total as f64
}

/// A `d x p` matrix of unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    entries: Array2<f64>,
    col_sparsity: Vec<f64>,
    mean_sparsity: f64,
}

impl ProjectionMatrix {
    /// Wraps `entries`, checking that every column has unit norm.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Empty {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        for (j, col) in entries.axis_iter(Axis(1)).enumerate() {
            let n = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::Contract(format!("column {j} has norm {n}, expected 1")));
            }
        }
        Ok(Self::from_unit_columns(entries))
    }

    pub(crate) fn from_unit_columns(entries: Array2<f64>) -> Self {
        let col_sparsity = entries
            .axis_iter(Axis(1))
            .map(|c| c.iter().filter(|v| **v == 0.0).count() as f64 / c.len() as f64)
            .collect();
        let mean_sparsity = sparsity_of(entries.view());
        Self {
            entries,
            col_sparsity,
            mean_sparsity,
        }
    }

    /// Selector onto the given rows of a `d`-dimensional space: column `j`
    /// is the unit vector `e_{rows[j]}`.
    pub fn selector(d: usize, rows: &[usize]) -> Result<Self> {
        let mut a = Array2::<f64>::zeros((d, rows.len()));
        for (j, &r) in rows.iter().enumerate() {
            if r >= d {
                return param(format!("selector row {r} out of range for dimension {d}"));
            }
            a[[r, j]] = 1.0;
        }
        Self::new(a)
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn col_sparsity(&self) -> &[f64] {
        &self.col_sparsity
    }

    pub fn mean_sparsity(&self) -> f64 {
        self.mean_sparsity
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// Keeps the listed columns, in the listed order, bit for bit.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_unit_columns(self.entries.select(Axis(1), idx))
    }
}

/// `Z = X A`.
pub fn project(x: &DataMatrix, a: &ProjectionMatrix) -> Result<DataMatrix> {
    DataMatrix::new(project_view(x.view(), a.entries().view())?)
}

pub(crate) fn project_view(x: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != a.nrows() {
        return Err(Error::Shape {
            op: "project",
            left: x.dim(),
            right: a.dim(),
        });
    }
    Ok(x.dot(&a))
}
