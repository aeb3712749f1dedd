//! Importance-ranked feature fusion: rank concatenated dimensions by random
//! forest importance, then grow a feature prefix and track accuracy and
//! family composition at each step.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate_classifier, rf_train, ForestConfig, SomVoter};
use crate::features::{DescriptorId, Provenance};
use crate::manifold::{som_fit, FeatureMatrix, SomConfig};

pub const DEFAULT_MAX_DIMS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionEvaluator {
    /// Square SOM of the given side, classified by neuron majority vote.
    SomVote {
        size: usize,
    },
    Forest,
}

impl FusionEvaluator {
    pub fn name(self) -> String {
        match self {
            FusionEvaluator::SomVote { size } => format!("som{size}_vote"),
            FusionEvaluator::Forest => "rf".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub evaluators: Vec<FusionEvaluator>,
    pub step: usize,
    pub max_dims: usize,
    pub som: SomConfig,
    pub forest: ForestConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            evaluators: vec![FusionEvaluator::SomVote { size: 30 }, FusionEvaluator::Forest],
            step: 1,
            max_dims: DEFAULT_MAX_DIMS,
            som: SomConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionStep {
    pub dims_used: usize,
    pub evaluator_scores: BTreeMap<String, f64>,
    pub family_counts: BTreeMap<DescriptorId, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionTrace {
    /// Concatenated-dimension indices by descending importance.
    pub ranking: Vec<usize>,
    pub steps: Vec<FusionStep>,
}

impl FusionTrace {
    /// Highest score an evaluator reached over all steps.
    pub fn best_score(&self, evaluator: &str) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.evaluator_scores.get(evaluator).copied())
            .reduce(f64::max)
    }
}

/// Indices sorted by forest importance, descending; ties keep the lower index first.
pub fn rank_dimensions(concat_train: &FeatureMatrix, labels: &[String], forest: &ForestConfig) -> Result<Vec<usize>> {
    let model = rf_train(concat_train, labels, forest)?;
    let imp = &model.importances;
    let mut ranking: Vec<usize> = (0..imp.len()).collect();
    ranking.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    Ok(ranking)
}

/// Refits `evaluator` on `train` and returns its test accuracy.
pub fn evaluator_accuracy(
    evaluator: FusionEvaluator,
    train: &FeatureMatrix,
    train_labels: &[String],
    test: &FeatureMatrix,
    test_labels: &[String],
    config: &FusionConfig,
) -> Result<f64> {
    let report = match evaluator {
        FusionEvaluator::SomVote { size } => {
            let grid = som_fit(train, size, size, &config.som)?;
            let voter = SomVoter::new(grid, train, train_labels)?;
            evaluate_classifier(&voter, test, test_labels)?
        }
        FusionEvaluator::Forest => {
            let model = rf_train(train, train_labels, &config.forest)?;
            evaluate_classifier(&model, test, test_labels)?
        }
    };
    Ok(report.accuracy)
}

fn step_sizes(step: usize, max_dims: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=max_dims / step).map(|i| i * step).collect();
    if sizes.last() != Some(&max_dims) {
        sizes.push(max_dims);
    }
    sizes
}

/// Evaluates every ranking prefix of `step`, `2 step`, ... dimensions up to `max_dims`
/// (the last prefix is always exactly `max_dims`).
pub fn stepwise_curve(
    ranking: &[usize],
    provenance: &Provenance,
    train: &FeatureMatrix,
    train_labels: &[String],
    test: &FeatureMatrix,
    test_labels: &[String],
    config: &FusionConfig,
) -> Result<FusionTrace> {
    let d = train.cols();
    if test.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: test.cols(),
        });
    }
    if provenance.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: provenance.dim(),
        });
    }
    let mut seen = vec![false; d];
    if ranking.len() != d || ranking.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::Config(
            "ranking must be a permutation of the feature dimensions".into(),
        ));
    }
    if config.step == 0 || config.max_dims == 0 || config.max_dims > d {
        return Err(Error::Config(format!(
            "need step >= 1 and 1 <= max_dims <= {d}, got step {} max_dims {}",
            config.step, config.max_dims
        )));
    }
    if config.evaluators.is_empty() {
        return Err(Error::Config("no fusion evaluators given".into()));
    }

    let steps = step_sizes(config.step, config.max_dims)
        .into_par_iter()
        .map(|n| {
            let cols = &ranking[..n];
            let (tr, te) = (train.select_cols(cols), test.select_cols(cols));
            let mut scores = BTreeMap::new();
            for &e in &config.evaluators {
                scores.insert(
                    e.name(),
                    evaluator_accuracy(e, &tr, train_labels, &te, test_labels, config)?,
                );
            }
            let mut family_counts = BTreeMap::new();
            for &c in cols {
                let (family, _) = provenance.lookup(c).expect("index within provenance");
                *family_counts.entry(family).or_insert(0) += 1;
            }
            log::debug!("fusion prefix {n}: {scores:?}");
            Ok(FusionStep {
                dims_used: n,
                evaluator_scores: scores,
                family_counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FusionTrace {
        ranking: ranking.to_vec(),
        steps,
    })
}

/// Accuracy of each evaluator on each whole descriptor block of the concatenation.
pub fn family_scores(
    provenance: &Provenance,
    train: &FeatureMatrix,
    train_labels: &[String],
    test: &FeatureMatrix,
    test_labels: &[String],
    config: &FusionConfig,
) -> Result<BTreeMap<DescriptorId, BTreeMap<String, f64>>> {
    let mut out = BTreeMap::new();
    let mut offset = 0;
    for &(family, len) in &provenance.segments {
        let cols: Vec<usize> = (offset..offset + len).collect();
        offset += len;
        let (tr, te) = (train.select_cols(&cols), test.select_cols(&cols));
        let mut scores = BTreeMap::new();
        for &e in &config.evaluators {
            scores.insert(
                e.name(),
                evaluator_accuracy(e, &tr, train_labels, &te, test_labels, config)?,
            );
        }
        out.insert(family, scores);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fixture(seed: u64, n: usize, d: usize, signal: &[usize]) -> (FeatureMatrix, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let cls = i % 2;
            let mut r: Vec<f64> = (0..d).map(|_| noise.sample(&mut rng)).collect();
            for &s in signal {
                r[s] = cls as f64 * 5.0 + 0.2 * noise.sample(&mut rng);
            }
            rows.push(r);
            labels.push(format!("c{cls}"));
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), labels)
    }

    fn small_config() -> FusionConfig {
        FusionConfig {
            evaluators: vec![FusionEvaluator::SomVote { size: 4 }, FusionEvaluator::Forest],
            step: 2,
            max_dims: 6,
            forest: ForestConfig {
                n_trees: 15,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn planted_dims_rank_first() {
        let (x, labels) = fixture(1, 160, 12, &[5, 9]);
        let forest = ForestConfig::default();
        let r = rank_dimensions(&x, &labels, &forest).unwrap();
        assert_eq!(r.len(), 12);
        let mut top = r[..2].to_vec();
        top.sort();
        assert_eq!(top, vec![5, 9]);
        assert_eq!(r, rank_dimensions(&x, &labels, &forest).unwrap());
    }

    #[test]
    fn trace_invariants() {
        let (x, labels) = fixture(2, 80, 8, &[1]);
        let prov = Provenance {
            segments: vec![(DescriptorId::HsvHist, 4), (DescriptorId::Gist, 4)],
        };
        let (train, test) = (
            x.select_rows(&(0..60).collect::<Vec<_>>()),
            x.select_rows(&(60..80).collect::<Vec<_>>()),
        );
        let cfg = small_config();
        let ranking = rank_dimensions(&train, &labels[..60], &cfg.forest).unwrap();
        let trace = stepwise_curve(&ranking, &prov, &train, &labels[..60], &test, &labels[60..], &cfg).unwrap();
        assert_eq!(
            trace.steps.iter().map(|s| s.dims_used).collect::<Vec<_>>(),
            vec![2, 4, 6]
        );
        let mut prev: BTreeMap<DescriptorId, usize> = BTreeMap::new();
        for s in &trace.steps {
            assert_eq!(s.family_counts.values().sum::<usize>(), s.dims_used);
            for (f, c) in &prev {
                assert!(s.family_counts.get(f).copied().unwrap_or(0) >= *c);
            }
            prev = s.family_counts.clone();
            assert!(s.evaluator_scores.values().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn full_prefix_matches_raw_forest() {
        let (x, labels) = fixture(3, 60, 5, &[0]);
        let prov = Provenance::single(DescriptorId::Concat, 5);
        let cfg = FusionConfig {
            evaluators: vec![FusionEvaluator::Forest],
            step: 5,
            max_dims: 5,
            forest: ForestConfig {
                n_trees: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let identity: Vec<usize> = (0..5).collect();
        let trace = stepwise_curve(&identity, &prov, &x, &labels, &x, &labels, &cfg).unwrap();
        let raw = evaluator_accuracy(FusionEvaluator::Forest, &x, &labels, &x, &labels, &cfg).unwrap();
        assert_eq!(trace.steps.last().unwrap().evaluator_scores["rf"], raw);
    }

    #[test]
    fn bad_inputs() {
        let (x, labels) = fixture(4, 20, 3, &[0]);
        let prov = Provenance::single(DescriptorId::Concat, 3);
        let cfg = FusionConfig {
            max_dims: 3,
            ..small_config()
        };
        assert!(stepwise_curve(&[0, 0, 1], &prov, &x, &labels, &x, &labels, &cfg).is_err());
        let too_many = FusionConfig { max_dims: 4, ..cfg };
        assert!(stepwise_curve(&[0, 1, 2], &prov, &x, &labels, &x, &labels, &too_many).is_err());
    }

    #[test]
    fn step_sizes_end_at_max() {
        assert_eq!(step_sizes(1, 3), vec![1, 2, 3]);
        assert_eq!(step_sizes(5, 12), vec![5, 10, 12]);
        assert_eq!(step_sizes(5, 3), vec![3]);
    }
}
