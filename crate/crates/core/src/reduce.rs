//! Preliminary reduction to an intermediate dimension: PCA, sure
//! independence screening (SIS), and SIS over principal component scores.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{param, Error, Result};
use crate::numerics::{column_means, fnv1a, pearson, svd, DataMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionKind {
    None,
    Pca,
    Sis,
    PcaSis,
}

impl ReductionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ReductionKind::None => "none",
            ReductionKind::Pca => "pca",
            ReductionKind::Sis => "sis",
            ReductionKind::PcaSis => "pca_sis",
        }
    }
}

impl std::str::FromStr for ReductionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" | "fd" => Ok(ReductionKind::None),
            "pca" => Ok(ReductionKind::Pca),
            "sis" => Ok(ReductionKind::Sis),
            "pca_sis" | "pcasis" => Ok(ReductionKind::PcaSis),
            other => param(format!("unknown reduction kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReductionMap {
    Identity,
    /// Centre with `center`, then multiply by the `d x m` loading matrix.
    Loadings { center: Array1<f64>, loadings: Array2<f64> },
    /// Keep these predictor columns, in this order.
    Indices(Vec<usize>),
}

/// A fitted reduction. Only training-set statistics are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub kind: ReductionKind,
    pub m: usize,
    pub map: ReductionMap,
    /// Fingerprint of the training matrix the map was fitted on.
    pub fitted_on: u64,
    /// Set when the requested dimension exceeded the numerical rank and was lowered.
    pub rank_limited: bool,
}

impl Reduction {
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match &self.map {
            ReductionMap::Identity => Ok(x.to_owned()),
            ReductionMap::Indices(idx) => {
                if let Some(&bad) = idx.iter().find(|&&j| j >= x.ncols()) {
                    return param(format!("screened column {bad} out of range for {} columns", x.ncols()));
                }
                Ok(x.select(Axis(1), idx))
            }
            ReductionMap::Loadings { center, loadings } => {
                if x.ncols() != loadings.nrows() {
                    return Err(Error::Shape {
                        op: "apply reduction",
                        left: x.dim(),
                        right: loadings.dim(),
                    });
                }
                Ok((&x - center).dot(loadings))
            }
        }
    }

    /// Applies the map to the training data it was fitted on, refusing any
    /// other matrix.
    pub fn apply_train(&self, x: &DataMatrix) -> Result<DataMatrix> {
        let fp = fingerprint(x.view());
        if fp != self.fitted_on {
            return Err(Error::Contract(format!(
                "reduction was fitted on data {:016x} but applied as training data to {fp:016x}",
                self.fitted_on
            )));
        }
        DataMatrix::new(self.apply(x.view())?)
    }

    pub fn fit(kind: ReductionKind, x: &DataMatrix, y: &[f64], m: usize) -> Result<Self> {
        match kind {
            ReductionKind::None => Ok(identity(x)),
            ReductionKind::Pca => pca_reduce(x, m),
            ReductionKind::Sis => sis_reduce(x, y, m),
            ReductionKind::PcaSis => pca_sis_reduce(x, y, m),
        }
    }
}

/// Stable 64-bit hash of a matrix's shape and bit patterns.
pub fn fingerprint(x: ArrayView2<'_, f64>) -> u64 {
    let mut bytes = Vec::with_capacity(16 + 8 * x.len());
    bytes.extend_from_slice(&(x.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(x.ncols() as u64).to_le_bytes());
    for v in x.iter() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fnv1a(&bytes)
}

/// `m = round(2n / ln n)`.
pub fn intermediate_dim(n: usize) -> Result<usize> {
    if n < 8 {
        return param(format!("intermediate dimension rule needs n >= 8, got {n}"));
    }
    let nf = n as f64;
    Ok((2.0 * nf / nf.ln()).round() as usize)
}

pub fn identity(x: &DataMatrix) -> Reduction {
    Reduction {
        kind: ReductionKind::None,
        m: x.ncols(),
        map: ReductionMap::Identity,
        fitted_on: fingerprint(x.view()),
        rank_limited: false,
    }
}

struct Pca {
    center: Array1<f64>,
    loadings: Array2<f64>,
    rank: usize,
}

fn full_pca(x: &DataMatrix) -> Result<Pca> {
    let center = column_means(x.view());
    let centred = x.as_array() - &center;
    let dec = svd(centred.view())?;
    let s0 = dec.s[0];
    let rank = if s0 > 0.0 {
        dec.s.iter().filter(|s| **s > 1e-10 * s0).count()
    } else {
        0
    };
    Ok(Pca {
        center,
        loadings: dec.v,
        rank,
    })
}

/// Projects on the top `m` principal axes of the column-centred data.
pub fn pca_reduce(x: &DataMatrix, m: usize) -> Result<Reduction> {
    if m == 0 || m > x.nrows().min(x.ncols()) {
        return param(format!(
            "PCA target dimension {m} must lie in 1..={}",
            x.nrows().min(x.ncols())
        ));
    }
    let pca = full_pca(x)?;
    if pca.rank == 0 {
        return Err(Error::Contract("cannot run PCA on constant data".into()));
    }
    let keep = m.min(pca.rank);
    let idx: Vec<usize> = (0..keep).collect();
    Ok(Reduction {
        kind: ReductionKind::Pca,
        m: keep,
        map: ReductionMap::Loadings {
            center: pca.center,
            loadings: pca.loadings.select(Axis(1), &idx),
        },
        fitted_on: fingerprint(x.view()),
        rank_limited: keep < m,
    })
}

/// Indices of the `m` largest absolute correlations, ties by lower index.
fn screen(columns: ArrayView2<'_, f64>, y: &[f64], m: usize) -> Vec<usize> {
    let scores: Vec<f64> = columns
        .axis_iter(Axis(1))
        .map(|c| pearson(&c.to_vec(), y).abs())
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(m);
    order
}

/// Keeps the `m` predictors most correlated (in absolute value) with `y`.
pub fn sis_reduce(x: &DataMatrix, y: &[f64], m: usize) -> Result<Reduction> {
    check_labels(x, y)?;
    if m == 0 || m > x.ncols() {
        return param(format!("SIS target dimension {m} must lie in 1..={}", x.ncols()));
    }
    Ok(Reduction {
        kind: ReductionKind::Sis,
        m,
        map: ReductionMap::Indices(screen(x.view(), y, m)),
        fitted_on: fingerprint(x.view()),
        rank_limited: false,
    })
}

/// Full PCA followed by SIS over the component scores.
pub fn pca_sis_reduce(x: &DataMatrix, y: &[f64], m: usize) -> Result<Reduction> {
    check_labels(x, y)?;
    if m == 0 || m > x.nrows() {
        return param(format!("PCA-SIS target dimension {m} must lie in 1..={}", x.nrows()));
    }
    let pca = full_pca(x)?;
    if pca.rank == 0 {
        return Err(Error::Contract("cannot run PCA on constant data".into()));
    }
    let comps: Vec<usize> = (0..pca.rank).collect();
    let loadings = pca.loadings.select(Axis(1), &comps);
    let scores = (x.as_array() - &pca.center).dot(&loadings);
    let keep = m.min(pca.rank);
    let chosen = screen(scores.view(), y, keep);
    Ok(Reduction {
        kind: ReductionKind::PcaSis,
        m: keep,
        map: ReductionMap::Loadings {
            center: pca.center,
            loadings: loadings.select(Axis(1), &chosen),
        },
        fitted_on: fingerprint(x.view()),
        rank_limited: keep < m,
    })
}

fn check_labels(x: &DataMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::Shape {
            op: "screening",
            left: x.dim(),
            right: (y.len(), 1),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = RngStream::new(seed);
        Array2::from_shape_fn((n, m), |_| StandardNormal.sample(&mut rng))
    }

    fn labels(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed);
        (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn intermediate_dimension_rule() {
        assert_eq!(intermediate_dim(150).unwrap(), 60);
        assert_eq!(intermediate_dim(38).unwrap(), 21);
        assert_eq!(intermediate_dim(100).unwrap(), 43);
        assert!(intermediate_dim(7).is_err());
    }

    #[test]
    fn two_dimensional_subspace_is_recovered() {
        let basis = gaussian(2, 6, 1);
        let coef = gaussian(40, 2, 2);
        let x = DataMatrix::new(coef.dot(&basis)).unwrap();
        let red = pca_reduce(&x, 2).unwrap();
        let scores = red.apply_train(&x).unwrap();
        let ReductionMap::Loadings { center, loadings } = &red.map else { panic!() };
        let back = scores.dot(&loadings.t()) + center;
        let err = (&back - x.as_array()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-8);
    }

    #[test]
    fn component_variances_non_increasing_and_uncorrelated() {
        let x = DataMatrix::new(gaussian(60, 8, 3) * array![5.0, 1.0, 3.0, 0.5, 2.0, 1.0, 4.0, 0.1]).unwrap();
        let red = pca_reduce(&x, 8).unwrap();
        let s = red.apply_train(&x).unwrap();
        let cov = s.t().dot(&*s) / 59.0;
        for i in 0..8 {
            if i > 0 {
                assert!(cov[[i, i]] <= cov[[i - 1, i - 1]]);
            }
            for j in 0..8 {
                if i != j {
                    assert!(cov[[i, j]].abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn toy_scores_match_direct_svd() {
        let x = DataMatrix::new(array![
            [2.0, 0.0, 1.0, -1.0],
            [1.0, 1.0, 0.0, 2.0],
            [0.0, 3.0, -1.0, 1.0],
            [4.0, -1.0, 2.0, 0.0],
            [1.0, 2.0, 2.0, 1.0]
        ])
        .unwrap();
        let red = pca_reduce(&x, 2).unwrap();
        let scores = red.apply_train(&x).unwrap();
        let centred = x.as_array() - &x.mean_axis(Axis(0)).unwrap();
        let dec = svd(centred.view()).unwrap();
        for k in 0..2 {
            let want = &dec.u.column(k) * dec.s[k];
            let got = scores.column(k);
            let sign = if want.dot(&got) < 0.0 { -1.0 } else { 1.0 };
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - sign * b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_deficient_target_is_lowered() {
        let basis = gaussian(2, 6, 4);
        let x = DataMatrix::new(gaussian(20, 2, 5).dot(&basis)).unwrap();
        let red = pca_reduce(&x, 4).unwrap();
        assert_eq!(red.m, 2);
        assert!(red.rank_limited);
    }

    #[test]
    fn sis_ranks_duplicated_label_first() {
        let y = labels(50, 6);
        let mut x = gaussian(50, 10, 7);
        x.column_mut(6).assign(&Array1::from(y.clone()));
        let red = sis_reduce(&DataMatrix::new(x).unwrap(), &y, 3).unwrap();
        let ReductionMap::Indices(idx) = &red.map else { panic!() };
        assert_eq!(idx[0], 6);
    }

    #[test]
    fn sis_keeps_everything_when_m_is_d() {
        let y = labels(40, 8);
        let x = DataMatrix::new(gaussian(40, 7, 9)).unwrap();
        let red = sis_reduce(&x, &y, 7).unwrap();
        let ReductionMap::Indices(idx) = &red.map else { panic!() };
        let mut sorted = idx.clone();
        sorted.sort();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
        let r: Vec<f64> = idx.iter().map(|&j| pearson(&x.column(j).to_vec(), &y).abs()).collect();
        assert!(r.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_variance_predictor_scores_zero() {
        let y = labels(30, 10);
        let mut x = gaussian(30, 3, 11);
        x.column_mut(0).fill(2.0);
        let red = sis_reduce(&DataMatrix::new(x).unwrap(), &y, 3).unwrap();
        let ReductionMap::Indices(idx) = &red.map else { panic!() };
        assert_eq!(idx[2], 0);
    }

    #[test]
    fn pca_sis_picks_response_aligned_component() {
        // Three columns with decreasing variance; labels follow the third axis.
        let mut rng = RngStream::new(12);
        let n = 200;
        let mut x = Array2::<f64>::zeros((n, 3));
        let mut y = vec![0.0; n];
        for i in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = StandardNormal.sample(&mut rng);
            x[[i, 0]] = 10.0 * a;
            x[[i, 1]] = 4.0 * b;
            x[[i, 2]] = c;
            y[i] = if c > 0.0 { 1.0 } else { 0.0 };
        }
        let x = DataMatrix::new(x).unwrap();
        let red = pca_sis_reduce(&x, &y, 1).unwrap();
        let ReductionMap::Loadings { loadings, .. } = &red.map else { panic!() };
        assert!(loadings[[2, 0]].abs() > 0.99);
    }

    #[test]
    fn pca_sis_full_width_spans_pca_subspace() {
        let x = DataMatrix::new(gaussian(12, 20, 13)).unwrap();
        let y = labels(12, 14);
        let a = pca_sis_reduce(&x, &y, 12).unwrap();
        let b = pca_reduce(&x, 11).unwrap();
        let (ReductionMap::Loadings { loadings: la, .. }, ReductionMap::Loadings { loadings: lb, .. }) = (&a.map, &b.map) else {
            panic!()
        };
        assert_eq!(la.ncols(), 11);
        // projector onto each span agrees
        let pa = la.dot(&la.t());
        let pb = lb.dot(&lb.t());
        for (u, v) in pa.iter().zip(pb.iter()) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn applying_to_other_data_as_train_is_refused() {
        let x = DataMatrix::new(gaussian(20, 5, 15)).unwrap();
        let other = DataMatrix::new(gaussian(20, 5, 16)).unwrap();
        let red = pca_reduce(&x, 2).unwrap();
        assert!(matches!(red.apply_train(&other), Err(Error::Contract(_))));
        assert!(red.apply(other.view()).is_ok());
    }

    proptest! {
        #[test]
        fn sis_invariant_under_positive_affine_maps(seed in any::<u64>(), scale in 0.01f64..100.0, shift in -50.0f64..50.0, col in 0usize..6) {
            let y = labels(40, seed ^ 1);
            let x = gaussian(40, 6, seed);
            let mut x2 = x.clone();
            x2.column_mut(col).mapv_inplace(|v| v * scale + shift);
            let a = sis_reduce(&DataMatrix::new(x).unwrap(), &y, 3).unwrap();
            let b = sis_reduce(&DataMatrix::new(x2).unwrap(), &y, 3).unwrap();
            prop_assert_eq!(a.map, b.map);
        }
    }
}
