//! Least angle regression with the lasso modification, used to pick the
//! first `p` candidate directions to enter the path.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{param, Error, Result};
use crate::numerics::{cholesky, cholesky_solve};

/// Residual variance (after projecting on the active set) below which a
/// column is treated as collinear and excluded.
const COLLINEAR_TOL: f64 = 1e-10;
/// Relative closeness at which an inactive correlation counts as tied with
/// the active maximum.
const TIE_TOL: f64 = 1e-9;

/// Piecewise-linear LARS-lasso path.
#[derive(Debug, Clone, PartialEq)]
pub struct LarsPath {
    /// Column indices in order of first activation.
    pub entry_order: Vec<usize>,
    /// Coefficients (standardized scale) at each breakpoint, starting from zero.
    pub coef_path: Vec<Array1<f64>>,
    /// Residual sum of squares at each breakpoint.
    pub rss_path: Vec<f64>,
    /// Maximal absolute correlation at each breakpoint; the lasso penalty at
    /// which `coef_path[k]` is the lasso solution.
    pub lambda_path: Vec<f64>,
    /// Columns skipped for having zero variance.
    pub constant: Vec<usize>,
    /// Columns excluded because they were collinear with the active set.
    pub collinear: Vec<usize>,
    /// Active set at the end of the path.
    pub final_active: Vec<usize>,
    /// Number of lasso drop events.
    pub drops: usize,
}

/// Runs LARS-lasso for at most `max_steps` steps. Columns are centred and
/// scaled to unit norm internally and `y` is centred.
pub fn lars_path(z: ArrayView2<'_, f64>, y: &[f64], max_steps: usize) -> Result<LarsPath> {
    run(z, y, max_steps, usize::MAX)
}

/// Runs LARS-lasso until `wanted` distinct columns have entered the path or
/// the path ends.
pub fn lars_entries(z: ArrayView2<'_, f64>, y: &[f64], wanted: usize) -> Result<LarsPath> {
    run(z, y, usize::MAX, wanted)
}

/// The first `p` entries of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    /// Set when fewer than `p` columns ever entered the path.
    pub shortfall: bool,
}

pub fn select_first_p(path: &LarsPath, p: usize) -> Result<Selection> {
    if p == 0 {
        return param("cannot select zero variables");
    }
    let take = p.min(path.entry_order.len());
    Ok(Selection {
        indices: path.entry_order[..take].to_vec(),
        shortfall: take < p,
    })
}

fn run(z: ArrayView2<'_, f64>, y: &[f64], max_steps: usize, wanted: usize) -> Result<LarsPath> {
    let (n, m) = z.dim();
    if y.len() != n {
        return Err(Error::Shape {
            op: "lars_path",
            left: (n, m),
            right: (y.len(), 1),
        });
    }
    if n < 2 || m == 0 {
        return param(format!("LARS needs at least two rows and one column, got {n}x{m}"));
    }

    let mut xs = z.to_owned();
    let mut constant = Vec::new();
    let mut excluded = vec![false; m];
    for (j, mut col) in xs.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let scale = z.column(j).iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale * (n as f64).sqrt() {
            col.fill(0.0);
            constant.push(j);
            excluded[j] = true;
        } else {
            col.mapv_inplace(|v| v / norm);
        }
    }
    if constant.len() == m {
        return Err(Error::Selection("every candidate column is constant".into()));
    }

    let ymean = y.iter().sum::<f64>() / n as f64;
    let yc = Array1::from_iter(y.iter().map(|v| v - ymean));
    let mut corr = xs.t().dot(&yc);
    let mut beta = Array1::<f64>::zeros(m);
    let mut fitted = Array1::<f64>::zeros(n);
    let eligible = m - constant.len();
    let max_active = (n - 1).min(eligible);

    let c0 = max_abs(&corr, |j| !excluded[j]);
    let mut path = LarsPath {
        entry_order: Vec::new(),
        coef_path: vec![beta.clone()],
        rss_path: vec![yc.dot(&yc)],
        lambda_path: vec![c0],
        constant,
        collinear: Vec::new(),
        final_active: Vec::new(),
        drops: 0,
    };
    if c0 <= 0.0 {
        return Ok(path);
    }

    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; m];
    let mut entered = vec![false; m];
    let mut next: Option<usize> = None;
    let mut just_dropped: Option<usize> = None;
    let mut steps = 0usize;

    loop {
        // Admissions: the variable that triggered the last breakpoint, then
        // anything tied with the current maximal correlation.
        let cmax = if active.is_empty() {
            max_abs(&corr, |j| !excluded[j])
        } else {
            active.iter().map(|&a| corr[a].abs()).fold(0.0, f64::max)
        };
        let mut candidates: Vec<usize> = next.take().into_iter().collect();
        for j in 0..m {
            if excluded[j] || in_active[j] || Some(j) == just_dropped || candidates.contains(&j) {
                continue;
            }
            if corr[j].abs() >= cmax * (1.0 - TIE_TOL) {
                candidates.push(j);
            }
        }
        for j in candidates {
            if active.len() >= max_active {
                break;
            }
            if is_collinear(&xs, &active, j) {
                excluded[j] = true;
                path.collinear.push(j);
                continue;
            }
            active.push(j);
            in_active[j] = true;
            if !entered[j] {
                entered[j] = true;
                path.entry_order.push(j);
            }
        }
        just_dropped = None;

        if active.is_empty() || path.entry_order.len() >= wanted || steps >= max_steps {
            break;
        }
        let c_now = active.iter().map(|&a| corr[a].abs()).fold(0.0, f64::max);
        if c_now <= 1e-13 * c0 {
            break;
        }

        // Equiangular direction.
        let xa = xs.select(Axis(1), &active);
        let gram = xa.t().dot(&xa);
        let signs = Array1::from_iter(active.iter().map(|&a| corr[a].signum()));
        let l = cholesky(gram.view()).map_err(|_| Error::Selection("active Gram matrix became singular".into()))?;
        let g_inv_s = cholesky_solve(&l, &signs);
        let aa = 1.0 / signs.dot(&g_inv_s).sqrt();
        let w = &g_inv_s * aa;
        let u = xa.dot(&w);
        let a = xs.t().dot(&u);

        let mut gamma = c_now / aa;
        let mut entering: Option<usize> = None;
        let room = active.len() < max_active;
        if room {
            for j in 0..m {
                if excluded[j] || in_active[j] {
                    continue;
                }
                for (num, den) in [(c_now - corr[j], aa - a[j]), (c_now + corr[j], aa + a[j])] {
                    if den <= 1e-11 * aa {
                        continue;
                    }
                    let g = num / den;
                    if g > 1e-12 * gamma.max(1e-300) && g < gamma {
                        gamma = g;
                        entering = Some(j);
                    }
                }
            }
        }
        let mut dropping: Option<usize> = None;
        for (i, &j) in active.iter().enumerate() {
            if w[i] == 0.0 {
                continue;
            }
            let g = -beta[j] / w[i];
            if g > 1e-12 * gamma && g < gamma {
                gamma = g;
                dropping = Some(i);
                entering = None;
            }
        }

        fitted.scaled_add(gamma, &u);
        for (i, &j) in active.iter().enumerate() {
            beta[j] += gamma * w[i];
        }
        corr.scaled_add(-gamma, &a);
        steps += 1;

        if let Some(i) = dropping {
            let j = active.remove(i);
            in_active[j] = false;
            beta[j] = 0.0;
            path.drops += 1;
            just_dropped = Some(j);
        }
        let resid = &yc - &fitted;
        path.coef_path.push(beta.clone());
        path.rss_path.push(resid.dot(&resid));
        path.lambda_path.push((c_now - gamma * aa).max(0.0));

        match (entering, dropping) {
            (Some(j), _) => next = Some(j),
            (None, Some(_)) => {}
            (None, None) => break,
        }
    }
    path.final_active = active;
    Ok(path)
}

fn max_abs(v: &Array1<f64>, keep: impl Fn(usize) -> bool) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(j, _)| keep(*j))
        .fold(0.0, |m, (_, x)| m.max(x.abs()))
}

fn is_collinear(xs: &Array2<f64>, active: &[usize], j: usize) -> bool {
    if active.is_empty() {
        return false;
    }
    let xa = xs.select(Axis(1), active);
    let gram = xa.t().dot(&xa);
    let g = xa.t().dot(&xs.column(j));
    match cholesky(gram.view()) {
        Ok(l) => {
            let coef = cholesky_solve(&l, &g);
            1.0 - g.dot(&coef) < COLLINEAR_TOL
        }
        Err(_) => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{svd, RngStream};
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, m: usize, rng: &mut RngStream) -> Array2<f64> {
        Array2::from_shape_fn((n, m), |_| StandardNormal.sample(rng))
    }

    fn labels(n: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect()
    }

    /// Orthonormal, mean-zero columns via SVD of a centred Gaussian matrix.
    fn orthonormal_design(n: usize, m: usize, rng: &mut RngStream) -> Array2<f64> {
        let mut g = gaussian(n, m, rng);
        let means = g.mean_axis(Axis(0)).unwrap();
        g -= &means;
        svd(g.view()).unwrap().u
    }

    #[test]
    fn single_predictor() {
        let mut rng = RngStream::new(1);
        let z = gaussian(20, 1, &mut rng);
        let y = labels(20, &mut rng);
        let path = lars_path(z.view(), &y, 5).unwrap();
        assert_eq!(path.entry_order, vec![0]);
    }

    #[test]
    fn orthonormal_design_enters_by_marginal_correlation() {
        let mut rng = RngStream::new(2);
        for _ in 0..20 {
            let z = orthonormal_design(40, 8, &mut rng);
            let y = labels(40, &mut rng);
            let ya = Array1::from(y.clone());
            let score = z.t().dot(&ya);
            let mut want: Vec<usize> = (0..8).collect();
            want.sort_by(|&a, &b| score[b].abs().total_cmp(&score[a].abs()));
            let path = lars_path(z.view(), &y, 8).unwrap();
            assert_eq!(path.entry_order, want);
            let sel = select_first_p(&path, 1).unwrap();
            assert_eq!(sel.indices, vec![want[0]]);
        }
    }

    #[test]
    fn duplicate_strongest_column_enters_once_lowest_index_first() {
        let mut rng = RngStream::new(3);
        let mut z = gaussian(30, 5, &mut rng);
        let y = labels(30, &mut rng);
        let ya = Array1::from(y.clone());
        let first = lars_path(z.view(), &y, 4).unwrap().entry_order[0];
        // append a copy of the strongest column
        let dup = z.column(first).to_owned();
        let mut wide = Array2::<f64>::zeros((30, 6));
        wide.slice_mut(ndarray::s![.., ..5]).assign(&z);
        wide.column_mut(5).assign(&dup);
        z = wide;
        let _ = ya;
        let path = lars_path(z.view(), &y, 5).unwrap();
        assert_eq!(path.entry_order[0], first);
        assert!(!path.entry_order.contains(&5));
        assert_eq!(path.collinear, vec![5]);

        // duplicate placed before the original: the lower index wins
        let mut front = Array2::<f64>::zeros((30, 6));
        front.column_mut(0).assign(&dup);
        front.slice_mut(ndarray::s![.., 1..]).assign(&z.slice(ndarray::s![.., ..5]));
        let path = lars_path(front.view(), &y, 5).unwrap();
        assert_eq!(path.entry_order[0], 0);
        assert!(!path.entry_order.contains(&(first + 1)));
    }

    #[test]
    fn shortfall_flagged() {
        let path = LarsPath {
            entry_order: vec![4, 1, 7],
            coef_path: vec![],
            rss_path: vec![],
            lambda_path: vec![],
            constant: vec![],
            collinear: vec![],
            final_active: vec![],
            drops: 0,
        };
        let sel = select_first_p(&path, 5).unwrap();
        assert_eq!(sel.indices, vec![4, 1, 7]);
        assert!(sel.shortfall);
        let all = select_first_p(&path, 3).unwrap();
        assert!(!all.shortfall);
        assert!(select_first_p(&path, 0).is_err());
    }

    #[test]
    fn constant_columns_skipped() {
        let mut rng = RngStream::new(4);
        let mut z = gaussian(25, 4, &mut rng);
        z.column_mut(2).fill(3.5);
        let y = labels(25, &mut rng);
        let path = lars_path(z.view(), &y, 4).unwrap();
        assert_eq!(path.constant, vec![2]);
        assert!(!path.entry_order.contains(&2));

        let all_const = Array2::<f64>::ones((10, 3));
        assert!(matches!(lars_path(all_const.view(), &y[..10], 3), Err(Error::Selection(_))));
    }

    #[test]
    fn entries_mode_stops_early() {
        let mut rng = RngStream::new(5);
        let z = gaussian(60, 30, &mut rng);
        let y = labels(60, &mut rng);
        let full = lars_path(z.view(), &y, 59).unwrap();
        let head = lars_entries(z.view(), &y, 5).unwrap();
        assert_eq!(head.entry_order.len(), 5);
        assert_eq!(head.entry_order[..], full.entry_order[..5]);
    }

    #[test]
    fn full_path_reaches_least_squares() {
        let mut rng = RngStream::new(6);
        let z = gaussian(40, 6, &mut rng);
        let y = labels(40, &mut rng);
        let path = lars_path(z.view(), &y, 100).unwrap();
        // least squares on the standardized design
        let mut xs = z.clone();
        for mut c in xs.axis_iter_mut(Axis(1)) {
            let m = c.mean().unwrap();
            c.mapv_inplace(|v| v - m);
            let nrm = c.dot(&c).sqrt();
            c.mapv_inplace(|v| v / nrm);
        }
        let ym = y.iter().sum::<f64>() / 40.0;
        let yc = Array1::from_iter(y.iter().map(|v| v - ym));
        let l = cholesky(xs.t().dot(&xs).view()).unwrap();
        let ols = cholesky_solve(&l, &xs.t().dot(&yc));
        let last = path.coef_path.last().unwrap();
        for (a, b) in last.iter().zip(ols.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn rss_non_increasing_and_no_duplicates(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let z = gaussian(30, 10, &mut rng);
            let y = labels(30, &mut rng);
            let path = lars_path(z.view(), &y, 29).unwrap();
            for w in path.rss_path.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12);
            }
            let mut seen = path.entry_order.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), path.entry_order.len());
        }

        #[test]
        fn invariant_to_label_and_column_rescaling(seed in any::<u64>(), ys in 0.1f64..20.0, cs in 0.1f64..20.0) {
            let mut rng = RngStream::new(seed);
            let z = gaussian(30, 8, &mut rng);
            let y = labels(30, &mut rng);
            let base = lars_path(z.view(), &y, 8).unwrap();
            let scaled_y: Vec<f64> = y.iter().map(|v| v * ys).collect();
            prop_assert_eq!(&lars_path(z.view(), &scaled_y, 8).unwrap().entry_order, &base.entry_order);
            let mut z2 = z.clone();
            z2.column_mut(3).mapv_inplace(|v| v * cs);
            prop_assert_eq!(&lars_path(z2.view(), &y, 8).unwrap().entry_order, &base.entry_order);
        }
    }
}
