//! Label-free hyperparameter selection: Isomap neighbor count by residual
//! variance, SOM size by TCQ, and a knee rule for reading the resulting curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{isomap_fit, som_fit, tcq, FeatureMatrix, SomConfig};

/// Relative change below which a curve counts as stable.
pub const KNEE_THRESHOLD: f64 = 0.02;

/// Score recorded for an Isomap fit whose k-NN graph is disconnected.
pub const DISCONNECTED_SCORE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepMetric {
    ResidualVariance,
    Tcq,
}

impl SweepMetric {
    pub fn lower_is_better(self) -> bool {
        matches!(self, SweepMetric::ResidualVariance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepMetric::ResidualVariance => "residual_variance",
            SweepMetric::Tcq => "tcq",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub metric: SweepMetric,
    /// Strictly ascending.
    pub parameter_values: Vec<usize>,
    pub scores: Vec<f64>,
    /// Parameters whose fit could not be computed (disconnected graph).
    pub flagged: Vec<bool>,
}

impl SweepCurve {
    pub fn new(metric: SweepMetric, parameter_values: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if parameter_values.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                expected: parameter_values.len(),
                found: scores.len(),
            });
        }
        if parameter_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep parameters must be strictly ascending".into()));
        }
        let flagged = vec![false; scores.len()];
        Ok(Self {
            metric,
            parameter_values,
            scores,
            flagged,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn ascending_unique(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Residual variance of an Isomap fit for each neighbor count.
pub fn sweep_isomap_neighbors(x: &FeatureMatrix, k_values: &[usize], m: usize) -> Result<SweepCurve> {
    if k_values.is_empty() {
        return Err(Error::Empty("no neighbor counts to sweep".into()));
    }
    let ks = ascending_unique(k_values);
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k >= x.rows()) {
        return Err(Error::Config(format!("neighbor count {bad} outside 1..{}", x.rows())));
    }
    let results: Vec<Result<(f64, bool)>> = ks
        .par_iter()
        .map(|&k| match isomap_fit(x, k, m) {
            Ok(model) => Ok((model.residual_variance, false)),
            Err(Error::DisconnectedGraph { component_sizes }) => {
                log::warn!("k={k}: disconnected graph {component_sizes:?}, scored {DISCONNECTED_SCORE}");
                Ok((DISCONNECTED_SCORE, true))
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut scores = Vec::with_capacity(ks.len());
    let mut flagged = Vec::with_capacity(ks.len());
    for r in results {
        let (s, f) = r?;
        scores.push(s);
        flagged.push(f);
    }
    let mut curve = SweepCurve::new(SweepMetric::ResidualVariance, ks, scores)?;
    curve.flagged = flagged;
    Ok(curve)
}

/// TCQ of an `s x s` SOM for each size `s`, all trained with the same config.
pub fn sweep_som_sizes(x: &FeatureMatrix, sizes: &[usize], config: &SomConfig) -> Result<SweepCurve> {
    if sizes.is_empty() {
        return Err(Error::Empty("no SOM sizes to sweep".into()));
    }
    let sizes = ascending_unique(sizes);
    if sizes[0] < 2 {
        return Err(Error::Config("SOM sizes must be at least 2".into()));
    }
    let scores: Vec<Result<f64>> = sizes
        .par_iter()
        .map(|&s| {
            let grid = som_fit(x, s, s, config)?;
            Ok(tcq(&grid, x)?.tcq)
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    SweepCurve::new(SweepMetric::Tcq, sizes, scores)
}

fn relative_change(from: f64, to: f64) -> f64 {
    if from == to {
        0.0
    } else if from == 0.0 {
        f64::INFINITY
    } else {
        ((to - from) / from).abs()
    }
}

/// Smallest parameter after which the next two relative score changes both stay
/// below [`KNEE_THRESHOLD`]; falls back to the best-scoring parameter.
pub fn pick_knee(curve: &SweepCurve) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::Config(format!(
            "knee rule needs at least 3 points, got {}",
            curve.len()
        )));
    }
    let s = &curve.scores;
    for i in 0..s.len() - 2 {
        if relative_change(s[i], s[i + 1]) < KNEE_THRESHOLD && relative_change(s[i + 1], s[i + 2]) < KNEE_THRESHOLD {
            return Ok(curve.parameter_values[i]);
        }
    }
    let lower = curve.metric.lower_is_better();
    let best = (0..s.len())
        .reduce(|b, i| {
            let better = if lower { s[i] < s[b] } else { s[i] > s[b] };
            if better {
                i
            } else {
                b
            }
        })
        .expect("non-empty curve");
    Ok(curve.parameter_values[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(scores: &[f64]) -> SweepCurve {
        let params = (1..=scores.len()).map(|i| i * 4).collect();
        SweepCurve::new(SweepMetric::ResidualVariance, params, scores.to_vec()).unwrap()
    }

    #[test]
    fn knee_on_stabilizing_curve() {
        assert_eq!(pick_knee(&curve(&[0.9, 0.5, 0.3, 0.295, 0.294])).unwrap(), 12);
    }

    #[test]
    fn knee_falls_back_to_best() {
        assert_eq!(pick_knee(&curve(&[0.9, 0.6, 0.4, 0.2, 0.1])).unwrap(), 20);
        let mut tcq = curve(&[0.2, 0.5, 0.9, 0.4]);
        tcq.metric = SweepMetric::Tcq;
        assert_eq!(pick_knee(&tcq).unwrap(), 12);
    }

    #[test]
    fn constant_curve_is_immediately_stable() {
        assert_eq!(pick_knee(&curve(&[0.3; 4])).unwrap(), 4);
        assert_eq!(pick_knee(&curve(&[0.0; 3])).unwrap(), 4);
    }

    #[test]
    fn knee_needs_three_points() {
        assert!(pick_knee(&curve(&[0.1, 0.2])).is_err());
    }

    #[test]
    fn curve_invariants() {
        assert!(SweepCurve::new(SweepMetric::Tcq, vec![2, 2], vec![0.1, 0.2]).is_err());
        assert!(SweepCurve::new(SweepMetric::Tcq, vec![2, 3], vec![0.1]).is_err());
    }

    #[test]
    fn empty_sweeps_error() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(sweep_isomap_neighbors(&x, &[], 1), Err(Error::Empty(_))));
        assert!(matches!(
            sweep_som_sizes(&x, &[], &SomConfig::default()),
            Err(Error::Empty(_))
        ));
        assert!(sweep_isomap_neighbors(&x, &[3], 1).is_err());
    }

    #[test]
    fn single_k_gives_single_point() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i) as f64 * 0.01]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let c = sweep_isomap_neighbors(&x, &[3], 1).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.scores[0].is_finite());
    }

    #[test]
    fn disconnected_fits_are_flagged() {
        let mut rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        rows.extend((0..5).map(|i| vec![1000.0 + i as f64]));
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let c = sweep_isomap_neighbors(&x, &[2, 6], 1).unwrap();
        assert_eq!(c.flagged, vec![true, false]);
        assert_eq!(c.scores[0], DISCONNECTED_SCORE);
    }
}
