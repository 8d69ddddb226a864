//! Logistic regression fitted by iteratively reweighted least squares, and
//! misclassification metrics.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{param, Error, Result};
use crate::numerics::{cholesky, cholesky_solve};
use crate::simgen::SimDataset;

/// Diagonal loading added to the IRLS normal equations.
pub const RIDGE_FLOOR: f64 = 1e-8;
pub const MAX_IRLS_ITERATIONS: usize = 100;
pub const DEVIANCE_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Intercept first, then one slope per column.
    pub coef: Array1<f64>,
    pub converged: bool,
    pub deviance: f64,
    pub iterations: usize,
    pub ridge_floor: f64,
}

impl LogisticModel {
    pub fn intercept(&self) -> f64 {
        self.coef[0]
    }

    pub fn slopes(&self) -> ndarray::ArrayView1<'_, f64> {
        self.coef.slice(ndarray::s![1..])
    }

    pub fn linear_predictor(&self, z: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if z.ncols() + 1 != self.coef.len() {
            return Err(Error::Shape {
                op: "logistic predict",
                left: z.dim(),
                right: (self.coef.len() - 1, 1),
            });
        }
        Ok(z.dot(&self.slopes()) + self.intercept())
    }

    pub fn predict_proba(&self, z: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.linear_predictor(z)?.mapv(sigmoid))
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binomial deviance of 0/1 labels under linear predictors `eta`.
pub fn deviance_of(eta: &Array1<f64>, y: &[f64]) -> f64 {
    2.0 * eta
        .iter()
        .zip(y)
        .map(|(&e, &t)| if t > 0.5 { softplus(-e) } else { softplus(e) })
        .sum::<f64>()
}

pub fn check_labels(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| *v != 0.0 && *v != 1.0) {
        Some(i) => param(format!("label {} at row {i} is not 0 or 1", y[i])),
        None => Ok(()),
    }
}

fn with_intercept(z: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, p) = z.dim();
    let mut x = Array2::<f64>::ones((n, p + 1));
    x.slice_mut(ndarray::s![.., 1..]).assign(&z);
    x
}

/// Fits `P(y = 1 | z) = sigmoid(b0 + z' b)`.
///
/// Separable data do not fail: the ridge floor keeps every Newton system
/// solvable and the fit stops after [`MAX_IRLS_ITERATIONS`] with
/// `converged = false` and the best iterate.
pub fn fit_logistic(z: ArrayView2<'_, f64>, y: &[f64]) -> Result<LogisticModel> {
    let (n, p) = z.dim();
    if n == 0 {
        return Err(Error::Empty { rows: n, cols: p });
    }
    if y.len() != n {
        return Err(Error::Shape {
            op: "fit_logistic",
            left: z.dim(),
            right: (y.len(), 1),
        });
    }
    check_labels(y)?;
    let x = with_intercept(z);
    let k = p + 1;
    let yv = Array1::from(y.to_vec());
    let mut beta = Array1::<f64>::zeros(k);
    let mut eta = Array1::<f64>::zeros(n);
    let mut dev = deviance_of(&eta, y);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_IRLS_ITERATIONS {
        iterations += 1;
        let prob = eta.mapv(sigmoid);
        let w = prob.mapv(|q| q * (1.0 - q));
        let grad = x.t().dot(&(&yv - &prob));
        let xw = &x * &w.view().insert_axis(ndarray::Axis(1));
        let mut h = x.t().dot(&xw);
        let mut ridge = RIDGE_FLOOR;
        let chol = loop {
            for i in 0..k {
                h[[i, i]] += ridge;
            }
            match cholesky(h.view()) {
                Ok(l) => break l,
                Err(_) if ridge < 1.0 => {
                    for i in 0..k {
                        h[[i, i]] -= ridge;
                    }
                    ridge *= 100.0;
                }
                Err(_) => {
                    return Err(Error::NumericalFailure {
                        what: "IRLS normal equations",
                        rows: k,
                        cols: k,
                    })
                }
            }
        };
        let step = cholesky_solve(&chol, &grad);

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &(&step * scale);
            let cand_eta = x.dot(&cand);
            let cand_dev = deviance_of(&cand_eta, y);
            if cand_dev.is_finite() && cand_dev <= dev {
                accepted = Some((cand, cand_eta, cand_dev));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_eta, cand_dev)) = accepted else {
            // No descent along the Newton direction: we are at the optimum to
            // working precision.
            converged = true;
            break;
        };
        let change = (dev - cand_dev).abs() / (cand_dev.abs() + 0.1);
        beta = cand;
        eta = cand_eta;
        dev = cand_dev;
        if change < DEVIANCE_TOL {
            converged = true;
            break;
        }
    }

    Ok(LogisticModel {
        coef: beta,
        converged,
        deviance: dev,
        iterations,
        ridge_floor: RIDGE_FLOOR,
    })
}

/// Class 1 when the fitted probability is at least 0.5.
pub fn predict_classes(model: &LogisticModel, z: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(model
        .predict_proba(z)?
        .iter()
        .map(|&q| if q >= 0.5 { 1.0 } else { 0.0 })
        .collect())
}

/// Fraction of positions where `pred` and `truth` disagree.
pub fn mcr(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return param("misclassification rate of an empty label vector");
    }
    if pred.len() != truth.len() {
        return Err(Error::Shape {
            op: "mcr",
            left: (pred.len(), 1),
            right: (truth.len(), 1),
        });
    }
    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Misclassification rate, on the test split, of the rule that thresholds the
/// true generating probability at 0.5.
pub fn bayes_rate_estimate(data: &SimDataset) -> Result<f64> {
    let truth = data
        .truth
        .as_ref()
        .ok_or_else(|| Error::Contract("dataset carries no generating truth".into()))?;
    let prob = truth.link.probabilities(truth.z0_test.view())?;
    let rule: Vec<f64> = prob.iter().map(|&q| if q >= 0.5 { 1.0 } else { 0.0 }).collect();
    mcr(&rule, &data.y_test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn null_fit_on_balanced_labels() {
        let mut rng = RngStream::new(1);
        let n = 10_000;
        let z = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let m = fit_logistic(z.view(), &y).unwrap();
        assert!(m.converged);
        assert!(m.intercept().abs() < 0.05);
        // slope standard error is about 2 / sqrt(n)
        let se = 2.0 / (n as f64).sqrt();
        for b in m.slopes() {
            assert!(b.abs() < 3.0 * se, "slope {b}");
        }
    }

    #[test]
    fn intercept_only_deviance_is_2n_ln2() {
        let z = Array2::<f64>::zeros((40, 0));
        let y: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let m = fit_logistic(z.view(), &y).unwrap();
        assert!((m.deviance - 80.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!(m.intercept().abs() < 1e-9);
    }

    #[test]
    fn two_point_design_matches_closed_form() {
        // z = -1 with 10% ones, z = +1 with 90% ones
        let mut z = Vec::new();
        let mut y = Vec::new();
        for r in 0..100 {
            z.push(-1.0);
            y.push(if r < 10 { 1.0 } else { 0.0 });
            z.push(1.0);
            y.push(if r < 10 { 0.0 } else { 1.0 });
        }
        let z = Array2::from_shape_vec((200, 1), z).unwrap();
        let m = fit_logistic(z.view(), &y).unwrap();
        let logit = (0.9f64 / 0.1).ln();
        assert!(m.intercept().abs() < 1e-8);
        assert!((m.slopes()[0] - logit).abs() < 1e-7);
    }

    #[test]
    fn separable_data_return_best_iterate() {
        let z = array![[-2.0], [-1.0], [1.0], [2.0]];
        let y = [0.0, 0.0, 1.0, 1.0];
        let m = fit_logistic(z.view(), &y).unwrap();
        assert!(m.deviance.is_finite());
        assert!(m.deviance < 1e-3);
        assert_eq!(predict_classes(&m, z.view()).unwrap(), y.to_vec());
    }

    #[test]
    fn prediction_examples() {
        let m = LogisticModel {
            coef: array![-1.0, 2.0],
            converged: true,
            deviance: 0.0,
            iterations: 1,
            ridge_floor: RIDGE_FLOOR,
        };
        // sigmoid(-1 + 2 * 0.9236) = 0.7
        let z = array![[(0.7f64 / 0.3).ln() / 2.0 + 0.5], [0.0], [0.5]];
        assert_eq!(predict_classes(&m, z.view()).unwrap(), vec![1.0, 0.0, 1.0]);
        let zeros = Array2::<f64>::zeros((5, 1));
        assert_eq!(predict_classes(&m, zeros.view()).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn mcr_examples() {
        let a = [0.0, 1.0, 1.0, 0.0];
        let b: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
        assert_eq!(mcr(&a, &a).unwrap(), 0.0);
        assert_eq!(mcr(&a, &b).unwrap(), 1.0);
        let t = vec![0.0; 50];
        let mut p = t.clone();
        p[17] = 1.0;
        assert_eq!(mcr(&p, &t).unwrap(), 0.02);
        assert!(mcr(&[], &[]).is_err());
    }

    #[test]
    fn non_binary_labels_rejected() {
        let z = Array2::<f64>::zeros((3, 1));
        assert!(fit_logistic(z.view(), &[0.0, 0.5, 1.0]).is_err());
    }

    fn random_problem(seed: u64, n: usize, p: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = RngStream::new(seed);
        let z = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y = (0..n)
            .map(|i| {
                let eta: f64 = (0..p).map(|k| z[[i, k]] * beta[k]).sum::<f64>() + 0.3;
                if rng.random::<f64>() < sigmoid(eta) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (z, y)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn score_equations_hold(seed in any::<u64>()) {
            let (z, y) = random_problem(seed, 200, 3);
            let m = fit_logistic(z.view(), &y).unwrap();
            prop_assume!(m.converged && m.slopes().iter().all(|b| b.abs() < 20.0));
            let prob = m.predict_proba(z.view()).unwrap();
            let x = with_intercept(z.view());
            let resid = Array1::from(y.clone()) - prob;
            let g = x.t().dot(&resid);
            prop_assert!(g.iter().all(|v| v.abs() < 1e-6 * 200.0), "{g:?}");
        }

        #[test]
        fn mcr_is_symmetric(a in proptest::collection::vec(0u8..2, 1..60), seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = a.iter().map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
            prop_assert_eq!(mcr(&a, &b).unwrap(), mcr(&b, &a).unwrap());
        }
    }
}
