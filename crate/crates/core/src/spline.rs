//! Natural cubic spline expansion for the nonlinear variant.
//!
//! Every component function `f_{j,k}` is a combination of `q` natural cubic
//! spline basis functions with no intercept, so `f_{j,k}(0) = 0`. The
//! curvature `int f''^2` is discretized on a grid into a quadratic form
//! `theta^T Gamma theta`; its eigenbasis separates the single linear (slope)
//! direction from the `q - 1` curvature directions, which lets a raw
//! coefficient block be rescaled onto the curvature budget exactly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, Error, Result};
use crate::numerics::{svd, DataMatrix, RngStream};
use crate::projection::MAX_COLUMN_ATTEMPTS;

/// Basis size used when none is given.
pub const DEFAULT_DEGREES_OF_FREEDOM: usize = 6;
/// Grid resolution used for the curvature Gram matrix when none is given.
pub const DEFAULT_GRID_POINTS: usize = 200;
/// How far outside the domain (in domain widths) evaluation is still allowed.
pub const DOMAIN_SLACK: f64 = 3.0;

/// Natural cubic spline basis with `q` functions on `q + 1` equally spaced
/// knots spanning the domain.
///
/// The functions are the cardinal splines of the knots (the natural cubic
/// spline equal to one at its own knot and zero at the others), shifted so
/// every function vanishes at zero. The cardinal whose knot lies closest to
/// zero is dropped, since the shifted family sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NcsBasis {
    q: usize,
    knots: Vec<f64>,
    lo: f64,
    hi: f64,
    /// Knot index of each retained cardinal.
    keep: Vec<usize>,
    /// Second derivatives at the knots, one row per cardinal.
    moments: Array2<f64>,
    offsets: Vec<f64>,
}

/// Builds a `q`-function basis on `domain`.
pub fn build_ncs_basis(domain: (f64, f64), q: usize) -> Result<NcsBasis> {
    NcsBasis::new(domain, q)
}

impl NcsBasis {
    pub fn new(domain: (f64, f64), q: usize) -> Result<Self> {
        let (lo, hi) = domain;
        if q < 3 {
            return param(format!("natural spline basis needs q >= 3, got {q}"));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return param(format!("degenerate basis domain [{lo}, {hi}]"));
        }
        let k = q + 1;
        let h = (hi - lo) / q as f64;
        let knots: Vec<f64> = (0..k).map(|i| lo + h * i as f64).collect();
        let moments = cardinal_moments(k, h);
        let mut basis = Self {
            q,
            knots,
            lo,
            hi,
            keep: Vec::new(),
            moments,
            offsets: vec![0.0; q],
        };
        let at_zero: Vec<f64> = (0..k).map(|c| basis.cardinal(c, 0.0)).collect();
        let drop = (0..k)
            .max_by(|&a, &b| at_zero[a].total_cmp(&at_zero[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        basis.keep = (0..k).filter(|&c| c != drop).collect();
        basis.offsets = basis.keep.iter().map(|&c| at_zero[c]).collect();
        Ok(basis)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn spacing(&self) -> f64 {
        self.knots[1] - self.knots[0]
    }

    /// Interval index `i` with `t` in `[knot_i, knot_{i+1}]`, or `None` outside.
    fn interval(&self, t: f64) -> Option<usize> {
        if t < self.lo || t > self.hi {
            return None;
        }
        let i = ((t - self.lo) / self.spacing()).floor() as usize;
        Some(i.min(self.q - 1))
    }

    fn cardinal(&self, c: usize, t: f64) -> f64 {
        let h = self.spacing();
        let last = self.knots.len() - 1;
        let m = self.moments.row(c);
        let y = |i: usize| if i == c { 1.0 } else { 0.0 };
        match self.interval(t) {
            Some(i) => {
                let a = (self.knots[i + 1] - t) / h;
                let b = (t - self.knots[i]) / h;
                a * y(i) + b * y(i + 1) + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
            }
            None if t < self.lo => {
                let slope = (y(1) - y(0)) / h - h * m[1] / 6.0;
                y(0) + slope * (t - self.lo)
            }
            None => {
                let slope = (y(last) - y(last - 1)) / h + h * m[last - 1] / 6.0;
                y(last) + slope * (t - self.hi)
            }
        }
    }

    fn cardinal_second(&self, c: usize, t: f64) -> f64 {
        let h = self.spacing();
        let m = self.moments.row(c);
        match self.interval(t) {
            Some(i) => {
                let a = (self.knots[i + 1] - t) / h;
                a * m[i] + (1.0 - a) * m[i + 1]
            }
            None => 0.0,
        }
    }

    /// Centred basis values `b(t) - b(0)`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (m, &c) in self.keep.iter().enumerate() {
            out[m] = self.cardinal(c, t) - self.offsets[m];
        }
    }

    pub fn eval_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.q];
        self.eval(t, &mut out);
        out
    }

    /// Second derivatives `b''(t)`.
    pub fn eval_second(&self, t: f64, out: &mut [f64]) {
        for (m, &c) in self.keep.iter().enumerate() {
            out[m] = self.cardinal_second(c, t);
        }
    }

    pub fn eval_second_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.q];
        self.eval_second(t, &mut out);
        out
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let w = self.hi - self.lo;
        if t < self.lo - DOMAIN_SLACK * w || t > self.hi + DOMAIN_SLACK * w {
            return Err(Error::Domain {
                value: t,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Equally spaced midpoint grid of `t` points over the domain.
    pub fn grid(&self, t: usize) -> Vec<f64> {
        let w = (self.hi - self.lo) / t as f64;
        (0..t).map(|l| self.lo + (l as f64 + 0.5) * w).collect()
    }
}

/// Knot second derivatives of every cardinal natural spline on `k` knots
/// with spacing `h`: solves `M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i-1} - 2 y_i + y_{i+1}) / h^2`
/// with `M_0 = M_{k-1} = 0` by the Thomas algorithm.
fn cardinal_moments(k: usize, h: f64) -> Array2<f64> {
    let interior = k - 2;
    let mut out = Array2::<f64>::zeros((k, k));
    for c in 0..k {
        let y = |i: usize| if i == c { 1.0 } else { 0.0 };
        let mut diag = vec![4.0; interior];
        let mut rhs: Vec<f64> = (1..k - 1)
            .map(|i| 6.0 * (y(i - 1) - 2.0 * y(i) + y(i + 1)) / (h * h))
            .collect();
        for i in 1..interior {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; interior];
        for i in (0..interior).rev() {
            let upper = if i + 1 < interior { m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - upper) / diag[i];
        }
        for i in 0..interior {
            out[[c, i + 1]] = m[i];
        }
    }
    out
}

/// `X* = (B(x_1) | ... | B(x_d))`, an `n x (q d)` matrix.
pub fn expand_features(x: &DataMatrix, basis: &NcsBasis) -> Result<DataMatrix> {
    DataMatrix::new(expand_view(x.view(), basis)?)
}

pub(crate) fn expand_view(x: ArrayView2<'_, f64>, basis: &NcsBasis) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    let q = basis.q;
    let mut out = Array2::<f64>::zeros((n, q * d));
    let mut buf = vec![0.0; q];
    for i in 0..n {
        for k in 0..d {
            let t = x[[i, k]];
            basis.check_domain(t)?;
            basis.eval(t, &mut buf);
            for (m, v) in buf.iter().enumerate() {
                out[[i, k * q + m]] = *v;
            }
        }
    }
    Ok(out)
}

/// Discretized curvature form `Gamma = (1/T) sum_l b''(t_l) b''(t_l)^T` and its
/// eigen-decomposition `Gamma = U diag(D) U^T`, with the zero (slope)
/// direction stored last.
#[derive(Debug, Clone)]
pub struct CurvatureOperator {
    gram: Array2<f64>,
    u: Array2<f64>,
    d: Vec<f64>,
    grid: Vec<f64>,
    upsilon: f64,
}

impl CurvatureOperator {
    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.d
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Slope of the null-direction function `(b(t)^T U)_q` against `t`.
    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn q(&self) -> usize {
        self.d.len()
    }

    /// `theta^T Gamma theta` for one `q`-block.
    pub fn curvature(&self, block: ArrayView1<'_, f64>) -> f64 {
        block.dot(&self.gram.dot(&block))
    }
}

pub fn curvature_gram(basis: &NcsBasis, t: usize) -> Result<CurvatureOperator> {
    let q = basis.q;
    if t < 10 * q {
        return param(format!("curvature grid needs at least {} points, got {t}", 10 * q));
    }
    let grid = basis.grid(t);
    let mut gram = Array2::<f64>::zeros((q, q));
    let mut b2 = vec![0.0; q];
    for &tl in &grid {
        basis.eval_second(tl, &mut b2);
        for i in 0..q {
            for j in 0..q {
                gram[[i, j]] += b2[i] * b2[j];
            }
        }
    }
    gram /= t as f64;
    // exact symmetry
    for i in 0..q {
        for j in (i + 1)..q {
            let m = 0.5 * (gram[[i, j]] + gram[[j, i]]);
            gram[[i, j]] = m;
            gram[[j, i]] = m;
        }
    }

    let dec = svd(gram.view())?;
    let mut d = dec.s.to_vec();
    let cutoff = 1e-10 * d[0];
    let near_zero = d.iter().filter(|s| **s < cutoff).count();
    if near_zero != 1 {
        return Err(Error::BasisDegenerate { near_zero });
    }
    d[q - 1] = 0.0;
    let mut u = dec.v;

    let mut bvals = vec![0.0; q];
    let mut num = 0.0;
    let mut den = 0.0;
    for &tl in &grid {
        basis.eval(tl, &mut bvals);
        let g: f64 = (0..q).map(|i| bvals[i] * u[[i, q - 1]]).sum();
        num += tl * g;
        den += tl * tl;
    }
    let mut upsilon = num / den;
    if upsilon < 0.0 {
        u.column_mut(q - 1).mapv_inplace(|v| -v);
        upsilon = -upsilon;
    }
    Ok(CurvatureOperator {
        gram,
        u,
        d,
        grid,
        upsilon,
    })
}

/// Rescales one raw coefficient column (`d` blocks of `q`) so that every
/// nonzero block has curvature exactly `lambda` and the slope components
/// satisfy `sum_k upsilon^2 theta*_{k,q}^2 = 1`.
///
/// Returns `Ok(None)` when every slope component is zero; the caller should
/// draw a fresh column.
pub fn constrain_and_standardize(
    theta_raw: ArrayView1<'_, f64>,
    lambda: f64,
    op: &CurvatureOperator,
) -> Result<Option<Array1<f64>>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return param(format!("curvature budget must be a finite non-negative number, got {lambda}"));
    }
    let q = op.q();
    if theta_raw.len() % q != 0 {
        return param(format!("coefficient length {} is not a multiple of q = {q}", theta_raw.len()));
    }
    let blocks = theta_raw.len() / q;
    let mut rotated = Array2::<f64>::zeros((blocks, q));
    let mut active = vec![false; blocks];
    for (k, on) in active.iter_mut().enumerate() {
        let block = theta_raw.slice(ndarray::s![k * q..(k + 1) * q]);
        if block.iter().all(|v| *v == 0.0) {
            continue;
        }
        *on = true;
        let mut star = op.u.t().dot(&block);
        let curv: f64 = (0..q - 1).map(|i| op.d[i] * star[i] * star[i]).sum();
        if lambda == 0.0 {
            star.slice_mut(ndarray::s![..q - 1]).fill(0.0);
        } else if curv > 0.0 {
            let scale = (lambda / curv).sqrt();
            star.slice_mut(ndarray::s![..q - 1]).mapv_inplace(|v| v * scale);
        }
        rotated.row_mut(k).assign(&star);
    }
    let ups2 = op.upsilon * op.upsilon;
    let total: f64 = (0..blocks)
        .filter(|&k| active[k])
        .map(|k| ups2 * rotated[[k, q - 1]].powi(2))
        .sum();
    if !(total > 0.0) {
        return Ok(None);
    }
    let inv = 1.0 / total.sqrt();
    let mut out = Array1::<f64>::zeros(theta_raw.len());
    for k in (0..blocks).filter(|&k| active[k]) {
        rotated[[k, q - 1]] *= inv;
        let back = op.u.dot(&rotated.row(k));
        out.slice_mut(ndarray::s![k * q..(k + 1) * q]).assign(&back);
    }
    Ok(Some(out))
}

/// `(q d) x p` coefficient matrix of a nonlinear projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCoeffs {
    theta: Array2<f64>,
    lambda: f64,
    q: usize,
    col_sparsity: Vec<f64>,
    mean_sparsity: f64,
}

impl SplineCoeffs {
    pub fn new(theta: Array2<f64>, lambda: f64, q: usize) -> Result<Self> {
        if q == 0 || theta.nrows() % q != 0 {
            return param(format!("{} coefficient rows do not split into blocks of {q}", theta.nrows()));
        }
        let col_sparsity: Vec<f64> = theta
            .axis_iter(Axis(1))
            .map(|c| block_sparsity(c, q))
            .collect();
        let mean_sparsity = if col_sparsity.is_empty() {
            0.0
        } else {
            col_sparsity.iter().sum::<f64>() / col_sparsity.len() as f64
        };
        Ok(Self {
            theta,
            lambda,
            q,
            col_sparsity,
            mean_sparsity,
        })
    }

    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn predictors(&self) -> usize {
        self.theta.nrows() / self.q
    }

    /// Fraction of all-zero blocks, per column.
    pub fn col_sparsity(&self) -> &[f64] {
        &self.col_sparsity
    }

    pub fn mean_sparsity(&self) -> f64 {
        self.mean_sparsity
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let theta = self.theta.select(Axis(1), idx);
        let col_sparsity: Vec<f64> = idx.iter().map(|&j| self.col_sparsity[j]).collect();
        let mean_sparsity = col_sparsity.iter().sum::<f64>() / col_sparsity.len().max(1) as f64;
        Self {
            theta,
            lambda: self.lambda,
            q: self.q,
            col_sparsity,
            mean_sparsity,
        }
    }
}

/// Fraction of `q`-blocks in `column` that are identically zero; a zero block
/// means the predictor does not enter the component function.
pub fn block_sparsity(column: ArrayView1<'_, f64>, q: usize) -> f64 {
    let blocks = column.len() / q;
    if blocks == 0 {
        return 0.0;
    }
    let zero = (0..blocks)
        .filter(|&k| column.slice(ndarray::s![k * q..(k + 1) * q]).iter().all(|v| *v == 0.0))
        .count();
    zero as f64 / blocks as f64
}

/// Freshly generated constrained coefficient columns.
#[derive(Debug, Clone)]
pub struct SplineBlock {
    pub theta: Array2<f64>,
    pub drawn_sparsity: Vec<f64>,
}

/// Draws `count` coefficient columns over `d` predictors. Each predictor's
/// block is zeroed with probability `xi_j` (drawn per column from
/// `sparsity`), the rest filled with standard normals, then the column is
/// passed through [`constrain_and_standardize`].
pub fn gen_spline_columns<F>(
    d: usize,
    count: usize,
    lambda: f64,
    op: &CurvatureOperator,
    mut sparsity: F,
    rng: &mut RngStream,
) -> Result<SplineBlock>
where
    F: FnMut(&mut RngStream) -> f64,
{
    if d == 0 || count == 0 {
        return param(format!("cannot generate {count} spline columns over {d} predictors"));
    }
    let q = op.q();
    let mut theta = Array2::<f64>::zeros((q * d, count));
    let mut drawn = Vec::with_capacity(count);
    let mut raw = Array1::<f64>::zeros(q * d);
    for j in 0..count {
        let mut done = false;
        for _ in 0..MAX_COLUMN_ATTEMPTS {
            let xi = sparsity(rng);
            let keep = 1.0 - xi;
            raw.fill(0.0);
            for k in 0..d {
                if rng.random::<f64>() < keep {
                    for m in 0..q {
                        raw[k * q + m] = StandardNormal.sample(rng);
                    }
                }
            }
            if let Some(col) = constrain_and_standardize(raw.view(), lambda, op)? {
                theta.column_mut(j).assign(&col);
                drawn.push(xi);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Generation(format!(
                "spline column {j} had no slope component in {MAX_COLUMN_ATTEMPTS} attempts"
            )));
        }
    }
    Ok(SplineBlock {
        theta,
        drawn_sparsity: drawn,
    })
}
