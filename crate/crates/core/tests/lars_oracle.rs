//! LARS-lasso against an independently written coordinate-descent lasso.

mod support;

use mass::{lars_path, RngStream};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use support::{lasso_cd, path_at, set_distance, standardize, support as active};

fn gaussian(n: usize, m: usize, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, m), || rng.sample::<f64, _>(StandardNormal))
}

fn labels(z: &Array2<f64>, rng: &mut RngStream) -> Vec<f64> {
    let w: Vec<f64> = (0..z.ncols()).map(|_| rng.random_range(-1.5..1.5)).collect();
    z.rows()
        .into_iter()
        .map(|r| {
            let eta: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            if rng.random::<f64>() < p { 1.0 } else { 0.0 }
        })
        .collect()
}

fn gram_schmidt(mut g: Array2<f64>) -> Array2<f64> {
    let (n, m) = g.dim();
    let ones = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    for j in 0..m {
        let mut v = g.column(j).to_owned();
        for _ in 0..2 {
            let d = v.dot(&ones);
            v.scaled_add(-d, &ones);
            for k in 0..j {
                let d = v.dot(&g.column(k));
                v.scaled_add(-d, &g.column(k).to_owned());
            }
        }
        let norm = v.dot(&v).sqrt();
        g.column_mut(j).assign(&(v / norm));
    }
    g
}

#[test]
fn active_sets_match_coordinate_descent() {
    let mut rng = RngStream::new(808);
    let mut agree = 0;
    let mut exact = 0;
    for _ in 0..100 {
        let z = gaussian(30, 8, &mut rng);
        let y = labels(&z, &mut rng);
        if y.iter().all(|v| *v == y[0]) {
            continue;
        }
        let path = lars_path(z.view(), &y, usize::MAX).unwrap();
        let (xs, yc) = standardize(z.view(), &y);
        let lambda = path.lambda_path[0] * rng.random_range(0.05..0.9);
        let lars = path_at(&path.lambda_path, &path.coef_path, lambda);
        let cd = lasso_cd(&xs, &yc, lambda);
        let (a, b) = (active(&lars, 1e-8), active(&cd, 1e-8));
        if set_distance(&a, &b) <= 1 {
            agree += 1;
        }
        if a == b {
            exact += 1;
            for j in 0..8 {
                assert!((lars[j] - cd[j]).abs() < 1e-6, "coefficient {j}: {} vs {}", lars[j], cd[j]);
            }
        }
    }
    assert!(agree >= 95, "{agree}/100 within one variable");
    assert!(exact >= 90, "{exact}/100 identical");
}

#[test]
fn orthonormal_entry_order_is_marginal_ranking() {
    let mut rng = RngStream::new(909);
    for _ in 0..100 {
        let z = gram_schmidt(gaussian(40, 8, &mut rng));
        let y = labels(&z, &mut rng);
        let ya = Array1::from(y.clone());
        let score = z.t().dot(&ya);
        let mut want: Vec<usize> = (0..8).collect();
        want.sort_by(|&a, &b| score[b].abs().total_cmp(&score[a].abs()));
        let path = lars_path(z.view(), &y, 8).unwrap();
        assert_eq!(path.entry_order, want);
    }
}

#[test]
fn full_path_ends_at_least_squares() {
    let mut rng = RngStream::new(1010);
    let z = gaussian(30, 6, &mut rng);
    let y = labels(&z, &mut rng);
    let path = lars_path(z.view(), &y, usize::MAX).unwrap();
    let (xs, yc) = standardize(z.view(), &y);
    let cd = lasso_cd(&xs, &yc, 1e-12);
    let last = path.coef_path.last().unwrap();
    for j in 0..6 {
        assert!((last[j] - cd[j]).abs() < 1e-6);
    }
}
