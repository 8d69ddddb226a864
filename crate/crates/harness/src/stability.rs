//! Agreement between repeated searches on one dataset: average absolute
//! correlation between the first principal component scores of each run's
//! reduced test data.

use ndarray::{Array2, Axis};

use mass::numerics::{pearson, svd};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Mean over run pairs of `|corr(PC1_s, PC1_t)|`.
    pub mean_abs_rho: f64,
    /// Mean share of total variance carried by PC1.
    pub pc1_share: f64,
    /// Mean variance share of every component.
    pub component_share: Vec<f64>,
    pub pairs: usize,
    /// Pairs skipped because a run's PC1 scores were constant.
    pub skipped_pairs: usize,
}

fn pc1(z: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mean = z.mean_axis(Axis(0)).ok_or_else(|| HarnessError::Config("empty reduced matrix".into()))?;
    let c = z - &mean;
    let dec = svd(c.view())?;
    let total: f64 = dec.s.iter().map(|s| s * s).sum();
    let share = dec.s.iter().map(|s| if total > 0.0 { s * s / total } else { 0.0 }).collect();
    let scores = c.dot(&dec.v.column(0)).to_vec();
    Ok((scores, share))
}

pub fn stability_metric(z_list: &[Array2<f64>]) -> Result<StabilityReport> {
    if z_list.len() < 2 {
        return Err(HarnessError::Config("stability needs at least two runs".into()));
    }
    let rows = z_list[0].nrows();
    if z_list.iter().any(|z| z.nrows() != rows) {
        return Err(HarnessError::Config("runs were not evaluated on a common test set".into()));
    }
    let mut scores = Vec::with_capacity(z_list.len());
    let mut shares: Vec<Vec<f64>> = Vec::with_capacity(z_list.len());
    for z in z_list {
        let (s, share) = pc1(z)?;
        scores.push(s);
        shares.push(share);
    }
    let constant: Vec<bool> = scores
        .iter()
        .map(|s| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().all(|v| (v - m).abs() <= 1e-12 * (1.0 + m.abs()))
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0;
    let mut skipped = 0;
    for a in 0..scores.len() {
        for b in (a + 1)..scores.len() {
            if constant[a] || constant[b] {
                skipped += 1;
                continue;
            }
            total += pearson(&scores[a], &scores[b]).abs();
            pairs += 1;
        }
    }
    let width = shares.iter().map(Vec::len).max().unwrap_or(0);
    let component_share: Vec<f64> = (0..width)
        .map(|k| shares.iter().map(|s| s.get(k).copied().unwrap_or(0.0)).sum::<f64>() / shares.len() as f64)
        .collect();
    Ok(StabilityReport {
        mean_abs_rho: if pairs > 0 { total / pairs as f64 } else { f64::NAN },
        pc1_share: component_share.first().copied().unwrap_or(0.0),
        component_share,
        pairs,
        skipped_pairs: skipped,
    })
}
