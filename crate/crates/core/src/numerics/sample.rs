use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{cholesky, DataMatrix};
use super::rng::RngStream;
use crate::error::{param, Result};

/// Largest magnitude a g-and-h draw may take before it is clamped.
pub const GH_CLAMP: f64 = 1e12;

/// Rows drawn i.i.d. from `N(0, S)` with compound-symmetric `S`:
/// `S_kk = var`, `S_kl = var * offdiag_corr`.
pub fn sample_mvnormal(
    n: usize,
    d: usize,
    var: f64,
    offdiag_corr: f64,
    rng: &mut RngStream,
) -> Result<DataMatrix> {
    let raw = correlated_normals(n, d, var, offdiag_corr, rng)?;
    DataMatrix::new(raw)
}

fn correlated_normals(
    n: usize,
    d: usize,
    var: f64,
    offdiag_corr: f64,
    rng: &mut RngStream,
) -> Result<Array2<f64>> {
    if !(var > 0.0) || !var.is_finite() {
        return param(format!("variance must be positive, got {var}"));
    }
    if !(0.0..1.0).contains(&offdiag_corr) {
        return param(format!("off-diagonal correlation must lie in [0, 1), got {offdiag_corr}"));
    }
    if n == 0 || d == 0 {
        return param(format!("cannot sample an empty {n}x{d} matrix"));
    }
    if offdiag_corr == 0.0 {
        // The Cholesky factor is sqrt(var) I.
        let sd = var.sqrt();
        return Ok(Array2::from_shape_simple_fn((n, d), || {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        }));
    }
    let sigma = Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            var
        } else {
            var * offdiag_corr
        }
    });
    let l = cholesky(sigma.view()).map_err(|_| {
        crate::Error::Parameter(format!(
            "compound-symmetric covariance (var {var}, corr {offdiag_corr}, d {d}) is not positive definite"
        ))
    })?;
    let mut out = Array2::<f64>::zeros((n, d));
    let mut z = vec![0.0; d];
    for i in 0..n {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(rng);
        }
        for r in 0..d {
            let mut acc = 0.0;
            for k in 0..=r {
                acc += l[[r, k]] * z[k];
            }
            out[[i, r]] = acc;
        }
    }
    Ok(out)
}

/// The univariate g-and-h transform of a standard normal quantity.
pub fn gh_transform(z: f64, g: f64, h: f64) -> f64 {
    let tail = (h * z * z / 2.0).exp();
    if g == 0.0 {
        z * tail
    } else {
        (g * z).exp_m1() / g * tail
    }
}

/// A g-and-h sample together with the number of entries that had to be clamped.
#[derive(Debug, Clone)]
pub struct GhSample {
    pub data: DataMatrix,
    pub clamped: usize,
}

/// Correlated g-and-h predictors: compound-symmetric standard normals pushed
/// marginally through [`gh_transform`].
pub fn sample_gh(
    n: usize,
    d: usize,
    g: f64,
    h: f64,
    offdiag_corr: f64,
    rng: &mut RngStream,
) -> Result<GhSample> {
    if !(h >= 0.0) {
        return param(format!("h must be non-negative, got {h}"));
    }
    if !g.is_finite() || !h.is_finite() {
        return param("g and h must be finite");
    }
    let mut z = correlated_normals(n, d, 1.0, offdiag_corr, rng)?;
    let mut clamped = 0usize;
    z.mapv_inplace(|v| {
        let t = gh_transform(v, g, h);
        if !t.is_finite() || t.abs() > GH_CLAMP {
            clamped += 1;
            if t.is_nan() {
                0.0
            } else {
                t.clamp(-GH_CLAMP, GH_CLAMP)
            }
        } else {
            t
        }
    });
    Ok(GhSample {
        data: DataMatrix::new(z)?,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::pearson;

    fn col(m: &DataMatrix, j: usize) -> Vec<f64> {
        m.column(j).to_vec()
    }

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
    }

    #[test]
    fn independent_case_has_null_covariance() {
        let mut rng = RngStream::new(1);
        let m = sample_mvnormal(100_000, 4, 1.0, 0.0, &mut rng).unwrap();
        for i in 0..4 {
            let ci = col(&m, i);
            assert!(mean(&ci).abs() < 0.02);
            assert!((var(&ci) - 1.0).abs() < 0.05);
            for j in (i + 1)..4 {
                let cj = col(&m, j);
                let mi = mean(&ci);
                let mj = mean(&cj);
                let cov = ci.iter().zip(&cj).map(|(a, b)| (a - mi) * (b - mj)).sum::<f64>()
                    / (ci.len() as f64 - 1.0);
                assert!(cov.abs() < 0.02, "cov({i},{j}) = {cov}");
            }
        }
    }

    #[test]
    fn compound_symmetric_mean_pairwise_correlation() {
        let mut rng = RngStream::new(2);
        let d = 50;
        let m = sample_mvnormal(100_000, d, 1.0, 0.5, &mut rng).unwrap();
        let cols: Vec<Vec<f64>> = (0..d).map(|j| col(&m, j)).collect();
        let mut total = 0.0;
        let mut count = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                total += pearson(&cols[i], &cols[j]);
                count += 1.0;
            }
        }
        let avg = total / count;
        assert!((avg - 0.5).abs() < 0.02, "mean pairwise corr {avg}");
        for c in &cols {
            assert!(mean(c).abs() < 0.02);
            assert!((var(c) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_mvnormal(20, 5, 2.0, 0.3, &mut RngStream::new(9)).unwrap();
        let b = sample_mvnormal(20, 5, 2.0, 0.3, &mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = RngStream::new(0);
        assert!(sample_mvnormal(5, 5, 0.0, 0.1, &mut rng).is_err());
        assert!(sample_mvnormal(5, 5, 1.0, 1.0, &mut rng).is_err());
        assert!(sample_gh(5, 5, 0.5, -0.1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn gh_fixes_zero() {
        for (g, h) in [(0.0, 0.0), (0.5, 0.5), (-1.0, 0.2), (2.0, 0.0)] {
            assert_eq!(gh_transform(0.0, g, h), 0.0);
        }
    }

    #[test]
    fn gh_zero_zero_is_standard_normal() {
        let mut rng = RngStream::new(4);
        let s = sample_gh(100_000, 1, 0.0, 0.0, 0.0, &mut rng).unwrap();
        let mut x = col(&s.data, 0);
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, v) in x.iter().enumerate() {
            let cdf = 0.5 * (1.0 + erf(v / std::f64::consts::SQRT_2));
            ks = ks.max((cdf - i as f64 / n).abs()).max((cdf - (i + 1) as f64 / n).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
        assert_eq!(s.clamped, 0);
    }

    #[test]
    fn gh_half_half_is_strongly_skewed() {
        let mut rng = RngStream::new(5);
        let s = sample_gh(100_000, 1, 0.5, 0.5, 0.0, &mut rng).unwrap();
        let x = col(&s.data, 0);
        let m = mean(&x);
        let n = x.len() as f64;
        let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        assert!(skew > 2.0, "skewness {skew}");
    }

    // Abramowitz-Stegun 7.1.26 is too coarse for a 0.01 KS bound near the
    // centre, so use the series/continued-fraction pair instead.
    fn erf(x: f64) -> f64 {
        let ax = x.abs();
        let r = if ax < 2.5 {
            let mut term = ax;
            let mut sum = ax;
            let x2 = ax * ax;
            let mut k = 0.0;
            loop {
                k += 1.0;
                term *= -x2 / k;
                let add = term / (2.0 * k + 1.0);
                sum += add;
                if add.abs() < 1e-17 {
                    break;
                }
            }
            2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            // erfc continued fraction
            let mut f = 0.0;
            for k in (1..60).rev() {
                f = (k as f64 / 2.0) / (ax + f);
            }
            1.0 - (-ax * ax).exp() / std::f64::consts::PI.sqrt() / (ax + f)
        };
        if x < 0.0 {
            -r
        } else {
            r
        }
    }
}
