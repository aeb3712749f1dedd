//! Post-learning evaluation: majority-vote rules over manifold outputs,
//! supervised SVM and random-forest baselines, and accuracy reports.

mod forest;
mod report;
mod svm;
mod vote;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::FeatureMatrix;

pub use forest::{rf_importances, rf_predict, rf_train, DecisionTree, ForestConfig, ForestModel, TreeNode};
pub use report::{evaluate_classifier, evaluate_predictions, EvalReport};
pub use svm::{svm_train, BinarySvm, ClassWeighting, LinearSvmModel, SvmConfig};
pub use vote::{knn_majority_vote, som_majority_vote, Embedder, ManifoldVoter, NeuronAssignments, SomVoter};

/// Default number of neighbors consulted by the k-NN vote.
pub const DEFAULT_VOTE_K: usize = 10;

/// Anything that maps a feature vector to a class label.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> Result<String>;
}

impl<F: Fn(&[f64]) -> Result<String>> Classifier for F {
    fn predict(&self, x: &[f64]) -> Result<String> {
        self(x)
    }
}

/// Sorted distinct classes and the class index of every label.
pub(crate) fn class_index(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is in class set"))
        .collect();
    (classes, idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IndoorOutdoor {
    Indoor,
    Outdoor,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "TRAIN",
            Split::Test => "TEST",
        }
    }
}

impl IndoorOutdoor {
    pub fn as_str(self) -> &'static str {
        match self {
            IndoorOutdoor::Indoor => "INDOOR",
            IndoorOutdoor::Outdoor => "OUTDOOR",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for IndoorOutdoor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "TRAIN" => Ok(Split::Train),
            "TEST" => Ok(Split::Test),
            other => Err(format!("split must be TRAIN or TEST, got '{other}'")),
        }
    }
}

impl FromStr for IndoorOutdoor {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "INDOOR" => Ok(IndoorOutdoor::Indoor),
            "OUTDOOR" => Ok(IndoorOutdoor::Outdoor),
            other => Err(format!("indoor_outdoor must be INDOOR or OUTDOOR, got '{other}'")),
        }
    }
}

/// Which manual label a classifier is asked to reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    IndoorOutdoor,
    Location,
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "indoor-outdoor" | "indoor_outdoor" | "io" => Ok(Task::IndoorOutdoor),
            "location" | "loc" => Ok(Task::Location),
            other => Err(format!("unknown task '{other}'")),
        }
    }
}

/// Feature rows with their manual context labels and split.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels_io: Vec<IndoorOutdoor>,
    pub labels_loc: Vec<String>,
    pub split: Vec<Split>,
}

impl LabeledDataset {
    pub fn new(
        features: FeatureMatrix,
        labels_io: Vec<IndoorOutdoor>,
        labels_loc: Vec<String>,
        split: Vec<Split>,
    ) -> Result<Self> {
        let n = features.rows();
        for len in [labels_io.len(), labels_loc.len(), split.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let ds = Self {
            features,
            labels_io,
            labels_loc,
            split,
        };
        for task in [Task::IndoorOutdoor, Task::Location] {
            let train: BTreeSet<String> = ds.labels_for(task, Split::Train).into_iter().collect();
            if let Some(l) = ds
                .labels_for(task, Split::Test)
                .into_iter()
                .find(|l| !train.contains(l))
            {
                return Err(Error::Config(format!(
                    "test label '{l}' never appears in the training split"
                )));
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.split.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn label(&self, task: Task, i: usize) -> String {
        match task {
            Task::IndoorOutdoor => self.labels_io[i].as_str().to_string(),
            Task::Location => self.labels_loc[i].clone(),
        }
    }

    pub fn labels_for(&self, task: Task, split: Split) -> Vec<String> {
        self.indices(split).into_iter().map(|i| self.label(task, i)).collect()
    }

    pub fn features_for(&self, split: Split) -> FeatureMatrix {
        self.features.select_rows(&self.indices(split))
    }

    /// Same rows restricted to the given feature columns.
    pub fn with_columns(&self, cols: &[usize]) -> Self {
        Self {
            features: self.features.select_cols(cols),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(test_loc: &str) -> Result<LabeledDataset> {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        LabeledDataset::new(
            x,
            vec![IndoorOutdoor::Indoor, IndoorOutdoor::Outdoor, IndoorOutdoor::Indoor],
            vec!["a".into(), "b".into(), test_loc.into()],
            vec![Split::Train, Split::Train, Split::Test],
        )
    }

    #[test]
    fn split_helpers() {
        let d = ds("b").unwrap();
        assert_eq!(d.indices(Split::Train), vec![0, 1]);
        assert_eq!(d.labels_for(Task::IndoorOutdoor, Split::Test), vec!["INDOOR"]);
        assert_eq!(d.features_for(Split::Test).row(0), &[2.0]);
    }

    #[test]
    fn unseen_test_label_is_rejected() {
        assert!(matches!(ds("zzz"), Err(Error::Config(_))));
    }

    #[test]
    fn vocabulary_round_trip() {
        for s in ["TRAIN", "TEST"] {
            assert_eq!(s.parse::<Split>().unwrap().as_str(), s);
        }
        assert!("VAL".parse::<Split>().is_err());
        assert_eq!("OUTDOOR".parse::<IndoorOutdoor>().unwrap(), IndoorOutdoor::Outdoor);
    }

    #[test]
    fn class_index_is_sorted() {
        let labels: Vec<String> = ["b", "a", "b"].iter().map(|s| s.to_string()).collect();
        let (c, i) = class_index(&labels);
        assert_eq!(c, vec!["a", "b"]);
        assert_eq!(i, vec![1, 0, 1]);
    }
}
