//! Random forest of Gini CART trees with impurity-decrease importances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_index, Classifier};
use crate::error::{Error, Result};
use crate::manifold::{check_dim, FeatureMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`, at least 1.
    pub max_features: Option<usize>,
    /// Nodes with fewer samples become leaves.
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    fn features_per_split(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class: usize,
        n_samples: usize,
        gini: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        gini: f64,
    },
}

impl TreeNode {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { n_samples, .. } | TreeNode::Split { n_samples, .. } => *n_samples,
        }
    }
}

/// Nodes are stored flat; index 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => n = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<String>,
    pub dim: usize,
    pub n_trees: usize,
    pub max_features: usize,
    pub trees: Vec<DecisionTree>,
    /// Non-negative, sums to 1.
    pub importances: Vec<f64>,
    pub config: ForestConfig,
}

impl ForestModel {
    /// Tree votes per class.
    pub fn votes(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dim, x.len())?;
        let mut votes = vec![0; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(x)] += 1;
        }
        Ok(votes)
    }

    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        let votes = self.votes(x)?;
        Ok((0..votes.len()).fold(0, |b, i| if votes[i] > votes[b] { i } else { b }))
    }
}

impl Classifier for ForestModel {
    fn predict(&self, x: &[f64]) -> Result<String> {
        Ok(self.classes[self.predict_index(x)?].clone())
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    (0..counts.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b })
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// Weighted child impurity, `n_l * gini_l + n_r * gini_r`.
    child_impurity: f64,
}

struct TreeBuilder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    min_samples_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    importances: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split_on(&self, idx: &[usize], feature: usize, total: &[usize], best: &mut Option<SplitChoice>) {
        let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x.row(i)[feature], self.y[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = pairs.len();
        let mut left = vec![0usize; self.n_classes];
        for s in 0..n - 1 {
            left[pairs[s].1] += 1;
            if pairs[s].0 == pairs[s + 1].0 {
                continue;
            }
            let nl = s + 1;
            let nr = n - nl;
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let imp = nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr);
            if best.as_ref().is_none_or(|b| imp < b.child_impurity - 1e-12) {
                let mut threshold = 0.5 * (pairs[s].0 + pairs[s + 1].0);
                // guard against the midpoint rounding onto the upper value
                if threshold >= pairs[s + 1].0 {
                    threshold = pairs[s].0;
                }
                *best = Some(SplitChoice {
                    feature,
                    threshold,
                    child_impurity: imp,
                });
            }
        }
    }

    fn find_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<SplitChoice> {
        let d = self.x.cols();
        let mut tried = vec![false; d];
        let mut best = None;
        let mut candidates = sample(&mut self.rng, d, self.max_features).into_vec();
        candidates.sort_unstable();
        for &f in &candidates {
            tried[f] = true;
            self.best_split_on(idx, f, counts, &mut best);
        }
        if best.is_none() {
            // every sampled feature is constant here; widen the search
            for f in (0..d).filter(|&f| !tried[f]) {
                self.best_split_on(idx, f, counts, &mut best);
                if best.is_some() {
                    break;
                }
            }
        }
        best
    }

    fn build(mut self, root: Vec<usize>) -> (DecisionTree, Vec<f64>) {
        let mut stack = vec![(0usize, root)];
        self.nodes.push(TreeNode::Leaf {
            class: 0,
            n_samples: 0,
            gini: 0.0,
        });
        while let Some((id, idx)) = stack.pop() {
            let n = idx.len();
            let counts = self.counts(&idx);
            let g = gini(&counts, n);
            let leaf = TreeNode::Leaf {
                class: majority(&counts),
                n_samples: n,
                gini: g,
            };
            let split = if g > 0.0 && n >= self.min_samples_split {
                self.find_split(&idx, &counts)
            } else {
                None
            };
            let Some(split) = split else {
                self.nodes[id] = leaf;
                continue;
            };
            self.importances[split.feature] += n as f64 * g - split.child_impurity;
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| self.x.row(i)[split.feature] <= split.threshold);
            let left = self.nodes.len();
            let right = left + 1;
            for _ in 0..2 {
                self.nodes.push(TreeNode::Leaf {
                    class: 0,
                    n_samples: 0,
                    gini: 0.0,
                });
            }
            self.nodes[id] = TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
                n_samples: n,
                gini: g,
            };
            stack.push((right, r));
            stack.push((left, l));
        }
        (DecisionTree { nodes: self.nodes }, self.importances)
    }
}

/// Trains `n_trees` bootstrap CART trees; tree `t` draws from its own RNG stream.
pub fn rf_train(x: &FeatureMatrix, labels: &[String], config: &ForestConfig) -> Result<ForestModel> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: labels.len(),
        });
    }
    if config.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    if x.cols() == 0 {
        return Err(Error::Config("forest needs at least one feature".into()));
    }
    let (classes, y) = class_index(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let d = x.cols();
    let n = x.rows();
    let max_features = config.features_per_split(d);
    let grown: Vec<(DecisionTree, Vec<f64>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            TreeBuilder {
                x,
                y: &y,
                n_classes: classes.len(),
                max_features,
                min_samples_split: config.min_samples_split.max(2),
                rng,
                nodes: Vec::new(),
                importances: vec![0.0; d],
            }
            .build(boot)
        })
        .collect();

    let mut importances = vec![0.0; d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        importances.iter_mut().zip(&imp).for_each(|(a, b)| *a += b);
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        importances = vec![1.0 / d as f64; d];
    }
    Ok(ForestModel {
        classes,
        dim: d,
        n_trees: config.n_trees,
        max_features,
        trees,
        importances,
        config: config.clone(),
    })
}

pub fn rf_predict(model: &ForestModel, x: &[f64]) -> Result<String> {
    model.predict(x)
}

pub fn rf_importances(model: &ForestModel) -> &[f64] {
    &model.importances
}
