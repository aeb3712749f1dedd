//! Majority-vote classification rules over manifold outputs.

use std::collections::BTreeMap;

use super::Classifier;
use crate::error::{Error, Result};
use crate::manifold::{sq_dist, FeatureMatrix, IsomapModel, PcaModel, SomGrid};

/// Mode of `ordered` labels (nearest first); ties resolve to the tied class
/// that appears first, i.e. the class of the nearest tied member.
fn vote<'a>(ordered: impl Iterator<Item = &'a str> + Clone) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in ordered.clone() {
        *counts.entry(l).or_default() += 1;
    }
    let best = *counts.values().max()?;
    ordered.into_iter().find(|l| counts[l] == best)
}

fn nearest_order(points: &[Vec<f64>], x: &[f64]) -> Vec<usize> {
    let mut d: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, p)| (i, sq_dist(p, x))).collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    d.into_iter().map(|(i, _)| i).collect()
}

/// Label held by most of the `k` training embeddings nearest to `point`.
pub fn knn_majority_vote(
    train_embedding: &[Vec<f64>],
    train_labels: &[String],
    point: &[f64],
    k: usize,
) -> Result<String> {
    if train_embedding.is_empty() {
        return Err(Error::Empty("k-NN vote needs training points".into()));
    }
    if train_labels.len() != train_embedding.len() {
        return Err(Error::DimensionMismatch {
            expected: train_embedding.len(),
            found: train_labels.len(),
        });
    }
    if k == 0 || k > train_embedding.len() {
        return Err(Error::Config(format!(
            "k must be in 1..={}, got {k}",
            train_embedding.len()
        )));
    }
    if let Some(p) = train_embedding.iter().find(|p| p.len() != point.len()) {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: point.len(),
        });
    }
    let order = nearest_order(train_embedding, point);
    let winner = vote(order[..k].iter().map(|&i| train_labels[i].as_str())).expect("k >= 1");
    Ok(winner.to_string())
}

/// Maps input vectors into an output space where votes are taken.
pub trait Embedder {
    fn embed(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Embedder for PcaModel {
    fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transform(x)
    }
}

impl Embedder for IsomapModel {
    fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transform(x)
    }
}

/// k-NN vote in the output space of a fitted PCA or Isomap model.
pub struct ManifoldVoter<E> {
    model: E,
    embedding: Vec<Vec<f64>>,
    labels: Vec<String>,
    k: usize,
}

impl<E: Embedder> ManifoldVoter<E> {
    pub fn new(model: E, train: &FeatureMatrix, labels: &[String], k: usize) -> Result<Self> {
        let embedding = train.iter_rows().map(|r| model.embed(r)).collect::<Result<Vec<_>>>()?;
        Self::from_embedding(model, embedding, labels, k)
    }

    /// Uses an already computed training embedding.
    pub fn from_embedding(model: E, embedding: Vec<Vec<f64>>, labels: &[String], k: usize) -> Result<Self> {
        if embedding.is_empty() {
            return Err(Error::Empty("k-NN vote needs training points".into()));
        }
        if labels.len() != embedding.len() {
            return Err(Error::DimensionMismatch {
                expected: embedding.len(),
                found: labels.len(),
            });
        }
        let k = k.min(embedding.len());
        Ok(Self {
            model,
            embedding,
            labels: labels.to_vec(),
            k,
        })
    }

    pub fn model(&self) -> &E {
        &self.model
    }

    pub fn embedding(&self) -> &[Vec<f64>] {
        &self.embedding
    }
}

impl<E: Embedder> Classifier for ManifoldVoter<E> {
    fn predict(&self, x: &[f64]) -> Result<String> {
        let y = self.model.embed(x)?;
        knn_majority_vote(&self.embedding, &self.labels, &y, self.k)
    }
}

/// Training frames grouped by the SOM neuron they activate.
#[derive(Clone, Debug)]
pub struct NeuronAssignments {
    /// Training row indices per neuron.
    members: Vec<Vec<usize>>,
    labels: Vec<String>,
    train: FeatureMatrix,
}

impl NeuronAssignments {
    pub fn build(grid: &SomGrid, train: &FeatureMatrix, labels: &[String]) -> Result<Self> {
        if labels.len() != train.rows() {
            return Err(Error::DimensionMismatch {
                expected: train.rows(),
                found: labels.len(),
            });
        }
        let mut members = vec![Vec::new(); grid.neurons()];
        for (i, b) in grid.bmus(train)?.into_iter().enumerate() {
            members[b].push(i);
        }
        Ok(Self {
            members,
            labels: labels.to_vec(),
            train: train.clone(),
        })
    }

    pub fn hits(&self, neuron: usize) -> usize {
        self.members[neuron].len()
    }

    /// Label counts of the training frames that activated `neuron`.
    pub fn label_counts(&self, neuron: usize) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for &i in &self.members[neuron] {
            *counts.entry(self.labels[i].clone()).or_default() += 1;
        }
        counts
    }

    /// Majority label of each neuron; `None` for neurons without hits.
    pub fn majority_labels(&self) -> Vec<Option<String>> {
        (0..self.members.len())
            .map(|n| {
                let counts = self.label_counts(n);
                let best = counts.values().max().copied()?;
                counts.into_iter().find(|(_, c)| *c == best).map(|(l, _)| l)
            })
            .collect()
    }
}

/// Mode of the training labels that share the BMU of `x`.
///
/// A neuron without training hits defers to the nearest neuron that has hits,
/// nearest on the grid first and then by codebook distance to `x`.
pub fn som_majority_vote(grid: &SomGrid, assignments: &NeuronAssignments, x: &[f64]) -> Result<String> {
    let bmu = grid.bmu(x)?;
    let neuron = if assignments.hits(bmu) > 0 {
        bmu
    } else {
        (0..grid.neurons())
            .filter(|&n| assignments.hits(n) > 0)
            .map(|n| (n, grid.grid_dist_sq(bmu, n), sq_dist(x, grid.weights(n))))
            .min_by(|a, b| a.1.cmp(&b.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
            .map(|(n, _, _)| n)
            .ok_or_else(|| Error::Untrained("no SOM neuron has training hits".into()))?
    };
    let mut members: Vec<(usize, f64)> = assignments.members[neuron]
        .iter()
        .map(|&i| (i, sq_dist(assignments.train.row(i), x)))
        .collect();
    members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let winner = vote(members.iter().map(|&(i, _)| assignments.labels[i].as_str())).expect("neuron has hits");
    Ok(winner.to_string())
}

/// SOM used as a classifier through neuron-level majority votes.
pub struct SomVoter {
    grid: SomGrid,
    assignments: NeuronAssignments,
}

impl SomVoter {
    pub fn new(grid: SomGrid, train: &FeatureMatrix, labels: &[String]) -> Result<Self> {
        let assignments = NeuronAssignments::build(&grid, train, labels)?;
        Ok(Self { grid, assignments })
    }

    pub fn grid(&self) -> &SomGrid {
        &self.grid
    }

    pub fn assignments(&self) -> &NeuronAssignments {
        &self.assignments
    }
}

impl Classifier for SomVoter {
    fn predict(&self, x: &[f64]) -> Result<String> {
        som_majority_vote(&self.grid, &self.assignments, x)
    }
}
