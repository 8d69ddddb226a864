//! Planted-subspace recovery: when the true subspace is identifiable from the
//! labels the selected directions approach it.

mod support;

use mass::{logistic_labels, run_mass_observed, sample_mvnormal, LinkKind, LinkSpec, MassConfig, RngStream};
use ndarray::Array2;
use support::span_residual;

fn ratio(seed: u64, p0: usize, iterations: usize) -> f64 {
    let mut rng = RngStream::new(seed);
    let x = sample_mvnormal(200, 30, 1.0, 0.0, &mut rng).unwrap();
    let mut a0 = Array2::<f64>::zeros((30, p0));
    for j in 0..p0 {
        a0[[3 + 7 * j, j]] = 1.0;
        a0[[4 + 7 * j, j]] = -0.5;
    }
    let z0 = x.as_array().dot(&a0);
    let beta = (0..p0).map(|j| if j % 2 == 0 { 2.0 } else { -2.0 }).collect();
    let spec = LinkSpec::new(LinkKind::Logit, beta).unwrap();
    let y = logistic_labels(z0.view(), &spec, &mut rng).unwrap();
    let mut cfg = MassConfig::new(p0, 1000 + seed);
    cfg.iterations = iterations;
    let (mut first, mut last) = (f64::NAN, f64::NAN);
    run_mass_observed(&x, &y, &cfg, None, |it, z| {
        if it == 1 {
            first = span_residual(z0.view(), z.view());
        }
        if it == iterations {
            last = span_residual(z0.view(), z.view());
        }
    })
    .unwrap();
    last / first
}

#[test]
fn single_direction_is_recovered() {
    let mut r: Vec<f64> = (0..9).map(|s| ratio(s, 1, 300)).collect();
    r.sort_by(f64::total_cmp);
    assert!(r[4] < 0.5, "median ratio {}", r[4]);
}
