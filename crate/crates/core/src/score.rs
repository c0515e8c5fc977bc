//! Scoring recovered footprints against generator ground truth.

use crate::error::{BearError, Result};
use crate::matrix::{Matrix, Real};

/// Fraction of a column's ℓ1 mass inside `support`; 0 for an all-zero column.
pub fn confinement<T: Real>(column: &[T], support: &[usize]) -> f64 {
    let total: f64 = column.iter().map(|x| x.abs().as_f64()).sum();
    if total == 0.0 {
        return 0.0;
    }
    support.iter().map(|&i| column[i].abs().as_f64()).sum::<f64>() / total
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "pearson: length mismatch");
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// One estimated component paired with one true component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentMatch {
    pub estimate: usize,
    pub truth: usize,
    /// Confinement of the estimate inside the truth's support.
    pub confinement: f64,
    /// Correlation of the estimated and true traces (when traces were given).
    pub correlation: Option<f64>,
}

/// Greedy maximal-overlap assignment: repeatedly pair the unmatched estimate
/// and truth with the largest confinement. Returns `min(r, k)` matches in
/// truth order.
pub fn match_components<T: Real>(estimate: &Matrix<T>, supports: &[Vec<usize>]) -> Vec<ComponentMatch> {
    let r = estimate.cols();
    let k = supports.len();
    let mut overlap = Vec::with_capacity(r * k);
    for e in 0..r {
        for (t, s) in supports.iter().enumerate() {
            overlap.push((confinement(estimate.col(e), s), e, t));
        }
    }
    // Stable order so ties resolve to the lowest indices.
    overlap.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; r];
    let mut used_t = vec![false; k];
    let mut out = Vec::with_capacity(r.min(k));
    for (c, e, t) in overlap {
        if !used_e[e] && !used_t[t] {
            used_e[e] = true;
            used_t[t] = true;
            out.push(ComponentMatch {
                estimate: e,
                truth: t,
                confinement: c,
                correlation: None,
            });
        }
    }
    out.sort_by_key(|m| m.truth);
    out
}

/// Matched confinement and trace correlation for a set of footprints.
#[derive(Clone, Debug, PartialEq)]
pub struct FootprintScore {
    pub matches: Vec<ComponentMatch>,
}

impl FootprintScore {
    pub fn min_confinement(&self) -> f64 {
        self.matches.iter().map(|m| m.confinement).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_confinement(&self) -> f64 {
        self.matches.iter().map(|m| m.confinement).sum::<f64>() / self.matches.len().max(1) as f64
    }

    pub fn min_correlation(&self) -> Option<f64> {
        self.matches
            .iter()
            .map(|m| m.correlation)
            .try_fold(f64::INFINITY, |acc, c| c.map(|c| acc.min(c)))
    }
}

/// Scores estimated spatial maps (n × r) and, optionally, their traces
/// (r × m) against true maps (n × k) and traces (k × m).
pub fn score_footprints<T: Real>(
    spatial: &Matrix<T>,
    temporal: Option<&Matrix<T>>,
    truth_spatial: &Matrix<T>,
    truth_temporal: Option<&Matrix<T>>,
) -> Result<FootprintScore> {
    if spatial.rows() != truth_spatial.rows() {
        return Err(BearError::Dimension(format!(
            "estimated maps have {} pixels, truth has {}",
            spatial.rows(),
            truth_spatial.rows()
        )));
    }
    let supports: Vec<Vec<usize>> = (0..truth_spatial.cols())
        .map(|k| {
            (0..truth_spatial.rows())
                .filter(|&i| truth_spatial.get(i, k) > T::zero())
                .collect()
        })
        .collect();
    let mut matches = match_components(spatial, &supports);
    if let (Some(est), Some(tru)) = (temporal, truth_temporal) {
        if est.cols() != tru.cols() || est.rows() != spatial.cols() || tru.rows() != truth_spatial.cols() {
            return Err(BearError::Dimension("trace shapes do not match the maps".into()));
        }
        let row = |m: &Matrix<T>, r: usize| -> Vec<f64> { (0..m.cols()).map(|j| m.get(r, j).as_f64()).collect() };
        for m in &mut matches {
            m.correlation = Some(pearson(&row(est, m.estimate), &row(tru, m.truth)));
        }
    }
    Ok(FootprintScore { matches })
}
