use ndarray::{Array1, Array2, ArrayView2};
use std::ops::Deref;

use crate::error::{Error, Result};

/// Dense `n x d` predictor matrix, one observation per row. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Array2<f64>);

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::Empty { rows, cols });
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self(values))
    }

    pub fn from_shape_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let arr = Array2::from_shape_vec((rows, cols), values).map_err(|_| Error::Shape {
            op: "from_shape_vec",
            left: (rows, cols),
            right: (rows * cols, 1),
        })?;
        Self::new(arr)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl Deref for DataMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

impl From<DataMatrix> for Array2<f64> {
    fn from(m: DataMatrix) -> Self {
        m.0
    }
}

/// Thin singular value decomposition `M = U diag(s) V^T`.
///
/// For an `m x n` input with `k = min(m, n)`, `u` is `m x k`, `v` is `n x k`
/// and `s` holds the `k` singular values in non-increasing order. When
/// `m >= n`, `v` is a full orthogonal matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.s;
        us.dot(&self.v.t())
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Singular vectors are sign-normalized so the largest-magnitude entry of
/// every right singular vector is positive, which makes results independent
/// of rotation order quirks.
pub fn svd(m: ArrayView2<'_, f64>) -> Result<Svd> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Empty { rows, cols });
    }
    if rows < cols {
        let t = svd(m.t())?;
        let mut out = Svd { u: t.v, s: t.s, v: t.u };
        normalize_signs(&mut out);
        return Ok(out);
    }

    // Column-major working copies.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let (alpha, beta, gamma) = col_products(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure {
            what: "Jacobi SVD",
            rows,
            cols,
        });
    }

    let norms: Vec<f64> = a.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let smax = norms[order[0]];
    let floor = smax * (rows as f64) * f64::EPSILON;
    let mut u = Array2::<f64>::zeros((rows, cols));
    let mut vm = Array2::<f64>::zeros((cols, cols));
    let mut s = Array1::<f64>::zeros(cols);
    let mut missing = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        let sk = norms[src];
        for r in 0..cols {
            vm[[r, k]] = v[src][r];
        }
        if sk > floor && sk > 0.0 {
            s[k] = sk;
            for r in 0..rows {
                u[[r, k]] = a[src][r] / sk;
            }
        } else {
            s[k] = if sk > 0.0 { sk } else { 0.0 };
            missing.push(k);
        }
    }
    complete_orthonormal(&mut u, &missing);
    let mut out = Svd { u, s, v: vm };
    normalize_signs(&mut out);
    Ok(out)
}

fn col_products(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in x.iter().zip(y) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let ci = &mut lo[i];
    let cj = &mut hi[0];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column (Gram-Schmidt against the standard basis).
fn complete_orthonormal(u: &mut Array2<f64>, missing: &[usize]) {
    let (rows, cols) = u.dim();
    let mut filled: Vec<bool> = vec![true; cols];
    for &k in missing {
        filled[k] = false;
    }
    for &k in missing {
        let mut best: Option<Vec<f64>> = None;
        for e in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in (0..cols).filter(|&j| filled[j]) {
                    let dot: f64 = (0..rows).map(|r| u[[r, j]] * cand[r]).sum();
                    for r in 0..rows {
                        cand[r] -= dot * u[[r, j]];
                    }
                }
            }
            let nrm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-6 {
                best = Some(cand.into_iter().map(|x| x / nrm).collect());
                break;
            }
        }
        if let Some(col) = best {
            for r in 0..rows {
                u[[r, k]] = col[r];
            }
            filled[k] = true;
        }
    }
}

fn normalize_signs(svd: &mut Svd) {
    let k = svd.s.len();
    for j in 0..k {
        let col = svd.v.column(j);
        let mut best = 0usize;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() + 1e-12 {
                best = i;
            }
        }
        if col[best] < 0.0 {
            svd.v.column_mut(j).mapv_inplace(|x| -x);
            svd.u.column_mut(j).mapv_inplace(|x| -x);
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, c) = a.dim();
    if n != c {
        return Err(Error::Shape {
            op: "cholesky",
            left: (n, c),
            right: (c, n),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NumericalFailure {
                what: "Cholesky factorization (matrix not positive definite)",
                rows: n,
                cols: n,
            });
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Column means of a matrix.
pub fn column_means(m: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = m.nrows() as f64;
    m.sum_axis(ndarray::Axis(0)) / n
}

/// Pearson correlation; zero when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    let r = sxy / (sxx * syy).sqrt();
    r.clamp(-1.0, 1.0)
}
