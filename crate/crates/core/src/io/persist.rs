//! JSON model files: `{kind, version, seed, shapes, model}`.
//!
//! Matrices are stored flat with their shapes recorded beside them; loading
//! checks kind, version and that every array has the recorded shape.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ForestModel, LinearSvmModel, TreeNode};
use crate::handswitch::MultiModelDetector;
use crate::manifold::{IsomapModel, PcaModel, SomGrid};

pub const FORMAT_VERSION: u32 = 1;

pub type Shapes = BTreeMap<String, Vec<usize>>;

/// A model that can be written to and read from a JSON model file.
pub trait PersistedModel: Serialize + DeserializeOwned {
    const KIND: &'static str;

    /// Declared shape of every array, derived from the model's size fields.
    fn shapes(&self) -> Shapes;

    /// Checks that every array matches its declared shape.
    fn validate(&self) -> Result<()>;
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    kind: String,
    version: u32,
    seed: u64,
    shapes: Shapes,
    model: M,
}

#[derive(Deserialize)]
struct Head {
    kind: String,
    version: u32,
}

fn shape_err(what: &str, expected: usize, found: usize) -> Error {
    Error::Load(format!(
        "shape mismatch in {what}: expected {expected} values, found {found}"
    ))
}

fn expect_len(what: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(shape_err(what, expected, v.len()));
    }
    Ok(())
}

fn shapes<const N: usize>(entries: [(&str, Vec<usize>); N]) -> Shapes {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn model_to_json<M: PersistedModel>(model: &M, seed: u64) -> Result<String> {
    model.validate()?;
    Ok(serde_json::to_string(&Envelope {
        kind: M::KIND.to_string(),
        version: FORMAT_VERSION,
        seed,
        shapes: model.shapes(),
        model,
    })?)
}

/// Parses a model file; returns the model and the seed recorded with it.
pub fn model_from_json<M: PersistedModel>(text: &str) -> Result<(M, u64)> {
    let head: Head = serde_json::from_str(text).map_err(|e| Error::Load(format!("not a model file: {e}")))?;
    if head.kind != M::KIND {
        return Err(Error::Load(format!(
            "model kind '{}' where '{}' was expected",
            head.kind,
            M::KIND
        )));
    }
    if head.version != FORMAT_VERSION {
        return Err(Error::Load(format!("unsupported model version {}", head.version)));
    }
    let env: Envelope<M> =
        serde_json::from_str(text).map_err(|e| Error::Load(format!("malformed {} model: {e}", M::KIND)))?;
    env.model.validate()?;
    let declared = env.model.shapes();
    if declared != env.shapes {
        return Err(Error::Load(format!(
            "recorded shapes {:?} disagree with model shapes {declared:?}",
            env.shapes
        )));
    }
    Ok((env.model, env.seed))
}

pub fn save_model<M: PersistedModel>(path: impl AsRef<Path>, model: &M, seed: u64) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model, seed)?).map_err(|e| Error::io(path, e))
}

pub fn load_model<M: PersistedModel>(path: impl AsRef<Path>) -> Result<(M, u64)> {
    let path = path.as_ref();
    model_from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Kind tag recorded in a model file, without loading the model.
pub fn model_kind(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let head: Head = serde_json::from_str(&text).map_err(|e| Error::Load(format!("not a model file: {e}")))?;
    Ok(head.kind)
}

impl PersistedModel for PcaModel {
    const KIND: &'static str = "pca";

    fn shapes(&self) -> Shapes {
        shapes([
            ("mean", vec![self.dim]),
            ("components", vec![self.n_components, self.dim]),
            ("eigenvalues", vec![self.n_components]),
        ])
    }

    fn validate(&self) -> Result<()> {
        expect_len("pca.mean", &self.mean, self.dim)?;
        expect_len("pca.components", &self.components, self.n_components * self.dim)?;
        expect_len("pca.eigenvalues", &self.eigenvalues, self.n_components)
    }
}

impl PersistedModel for IsomapModel {
    const KIND: &'static str = "isomap";

    fn shapes(&self) -> Shapes {
        let (n, m, d) = (self.n_train, self.n_components, self.dim);
        shapes([
            ("train_points", vec![n, d]),
            ("train_embedding", vec![n, m]),
            ("geodesics", vec![n, n]),
            ("geodesic_sq_col_means", vec![n]),
            ("eigenvalues", vec![m]),
            ("eigenvectors", vec![n, m]),
        ])
    }

    fn validate(&self) -> Result<()> {
        let (n, m, d) = (self.n_train, self.n_components, self.dim);
        expect_len("isomap.train_points", &self.train_points, n * d)?;
        expect_len("isomap.train_embedding", &self.train_embedding, n * m)?;
        expect_len("isomap.geodesics", &self.geodesics, n * n)?;
        expect_len("isomap.geodesic_sq_col_means", &self.geodesic_sq_col_means, n)?;
        expect_len("isomap.eigenvalues", &self.eigenvalues, m)?;
        expect_len("isomap.eigenvectors", &self.eigenvectors, n * m)?;
        if self.k_neighbors == 0 || self.k_neighbors >= n.max(1) {
            return Err(Error::Load(format!(
                "isomap k_neighbors {} invalid for {n} points",
                self.k_neighbors
            )));
        }
        Ok(())
    }
}

impl PersistedModel for SomGrid {
    const KIND: &'static str = "som";

    fn shapes(&self) -> Shapes {
        shapes([("codebook", vec![self.grid_h, self.grid_w, self.dim])])
    }

    fn validate(&self) -> Result<()> {
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(Error::Load("SOM grid has no neurons".into()));
        }
        expect_len("som.codebook", &self.codebook, self.grid_w * self.grid_h * self.dim)
    }
}

impl PersistedModel for LinearSvmModel {
    const KIND: &'static str = "linear_svm";

    fn shapes(&self) -> Shapes {
        let k = if self.classes.len() == 2 { 1 } else { self.classes.len() };
        shapes([
            ("weights", vec![k, self.dim]),
            ("bias", vec![k]),
            ("calibration", vec![k, 2]),
            ("class_weights", vec![self.classes.len()]),
        ])
    }

    fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Load("SVM needs at least two classes".into()));
        }
        let k = if self.classes.len() == 2 { 1 } else { self.classes.len() };
        if self.models.len() != k {
            return Err(Error::Load(format!(
                "SVM has {} hyperplanes, expected {k}",
                self.models.len()
            )));
        }
        for (i, m) in self.models.iter().enumerate() {
            expect_len(&format!("svm.weights[{i}]"), &m.weights, self.dim)?;
        }
        expect_len("svm.class_weights", &self.class_weights, self.classes.len())
    }
}

impl PersistedModel for ForestModel {
    const KIND: &'static str = "random_forest";

    fn shapes(&self) -> Shapes {
        shapes([
            ("trees", vec![self.n_trees]),
            ("importances", vec![self.dim]),
            ("classes", vec![self.classes.len()]),
        ])
    }

    fn validate(&self) -> Result<()> {
        if self.trees.len() != self.n_trees {
            return Err(Error::Load(format!(
                "forest has {} trees, expected {}",
                self.trees.len(),
                self.n_trees
            )));
        }
        expect_len("forest.importances", &self.importances, self.dim)?;
        for (t, tree) in self.trees.iter().enumerate() {
            let n = tree.nodes.len();
            if n == 0 {
                return Err(Error::Load(format!("tree {t} is empty")));
            }
            for node in &tree.nodes {
                let ok = match node {
                    TreeNode::Leaf { class, .. } => *class < self.classes.len(),
                    TreeNode::Split {
                        feature, left, right, ..
                    } => *feature < self.dim && *left < n && *right < n,
                };
                if !ok {
                    return Err(Error::Load(format!(
                        "tree {t} references a missing node, feature or class"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl PersistedModel for MultiModelDetector {
    const KIND: &'static str = "multimodel_detector";

    fn shapes(&self) -> Shapes {
        let mut s = shapes([
            ("locals", vec![self.som.neurons()]),
            ("global.weights", vec![1, self.global_model.dim]),
        ]);
        for (k, v) in self.som.shapes() {
            s.insert(format!("som.{k}"), v);
        }
        s
    }

    fn validate(&self) -> Result<()> {
        self.som.validate()?;
        self.global_model.validate()?;
        if self.locals.len() != self.som.neurons() {
            return Err(Error::Load(format!(
                "{} local detectors for {} neurons",
                self.locals.len(),
                self.som.neurons()
            )));
        }
        for (i, l) in self.locals.iter().enumerate() {
            if l.neuron != i {
                return Err(Error::Load(format!(
                    "local detector {i} is labelled neuron {}",
                    l.neuron
                )));
            }
            if let Some(m) = &l.model {
                m.validate()?;
                if m.dim != self.global_model.dim {
                    return Err(shape_err("local detector weights", self.global_model.dim, m.dim));
                }
            }
        }
        Ok(())
    }
}
