//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Centres each column and scales it to unit Euclidean norm; centres `y`.
pub fn standardize(z: ArrayView2<'_, f64>, y: &[f64]) -> (Array2<f64>, Array1<f64>) {
    let mut xs = z.to_owned();
    for mut col in xs.axis_iter_mut(Axis(1)) {
        let mean = col.mean().unwrap_or(0.0);
        col.mapv_inplace(|v| v - mean);
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        }
    }
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    (xs, y.iter().map(|v| v - ym).collect())
}

/// Cyclic coordinate descent for `0.5 |y - X b|^2 + lambda |b|_1` on a design
/// with unit-norm columns.
pub fn lasso_cd(x: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Array1<f64> {
    let m = x.ncols();
    let mut b = Array1::<f64>::zeros(m);
    let mut r = y.clone();
    for _ in 0..200_000 {
        let mut delta = 0.0f64;
        for j in 0..m {
            let xj = x.column(j);
            let rho = xj.dot(&r) + b[j];
            let new = rho.signum() * (rho.abs() - lambda).max(0.0);
            let step = new - b[j];
            if step != 0.0 {
                r.scaled_add(-step, &xj);
                b[j] = new;
                delta = delta.max(step.abs());
            }
        }
        if delta < 1e-13 {
            break;
        }
    }
    b
}

/// Indices with a coefficient larger than `tol` in magnitude.
pub fn support(b: &Array1<f64>, tol: f64) -> Vec<usize> {
    (0..b.len()).filter(|&j| b[j].abs() > tol).collect()
}

/// Size of the symmetric difference of two index sets.
pub fn set_distance(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|i| !b.contains(i)).count() + b.iter().filter(|i| !a.contains(i)).count()
}

/// Linear interpolation of a piecewise-linear coefficient path at `lambda`.
pub fn path_at(lambdas: &[f64], coefs: &[Array1<f64>], lambda: f64) -> Array1<f64> {
    for k in 0..lambdas.len() - 1 {
        let (hi, lo) = (lambdas[k], lambdas[k + 1]);
        if lambda <= hi && lambda >= lo {
            let w = if hi > lo { (hi - lambda) / (hi - lo) } else { 0.0 };
            return &coefs[k] * (1.0 - w) + &coefs[k + 1] * w;
        }
    }
    coefs[coefs.len() - 1].clone()
}

/// `(1/n)` squared residual of the columns of `target` after projecting onto
/// the span of an intercept and the columns of `basis`.
pub fn span_residual(target: ArrayView2<'_, f64>, basis: ArrayView2<'_, f64>) -> f64 {
    let n = basis.nrows();
    let mut q: Vec<Array1<f64>> = vec![Array1::from_elem(n, 1.0 / (n as f64).sqrt())];
    for c in basis.columns() {
        let mut v = c.to_owned();
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for b in &q {
                let d = v.dot(b);
                v.scaled_add(-d, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 * (n as f64).sqrt() {
            q.push(v / norm);
        }
    }
    let mut total = 0.0;
    for c in target.columns() {
        let mut v = c.to_owned();
        for b in &q {
            let d = v.dot(b);
            v.scaled_add(-d, b);
        }
        total += v.dot(&v);
    }
    total / n as f64
}
