use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::manifold::FeatureMatrix;

/// Test accuracy with a confusion matrix in row percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted union of true and predicted labels; rows and columns follow it.
    pub classes: Vec<String>,
    pub accuracy: f64,
    /// `confusion[t][p]`: percentage of class-`t` frames predicted as `p`.
    pub confusion: Vec<Vec<f64>>,
    /// Raw counts behind `confusion`.
    pub counts: Vec<Vec<usize>>,
    /// True frames per class.
    pub support: Vec<usize>,
    /// Rows without support (all-zero in `confusion`).
    pub empty_rows: Vec<bool>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.support.iter().sum()
    }
}

/// Builds a report from paired true and predicted labels.
pub fn evaluate_predictions(truth: &[String], predicted: &[String]) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(Error::Empty("evaluation needs a non-empty test split".into()));
    }
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let classes: Vec<String> = truth
        .iter()
        .chain(predicted)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |l: &String| classes.binary_search(l).expect("label in class set");
    let l = classes.len();
    let mut counts = vec![vec![0usize; l]; l];
    for (t, p) in truth.iter().zip(predicted) {
        counts[pos(t)][pos(p)] += 1;
    }
    let support: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let confusion = counts
        .iter()
        .zip(&support)
        .map(|(row, &s)| {
            if s == 0 {
                vec![0.0; l]
            } else {
                row.iter().map(|&c| 100.0 * c as f64 / s as f64).collect()
            }
        })
        .collect();
    let correct: usize = (0..l).map(|i| counts[i][i]).sum();
    Ok(EvalReport {
        accuracy: correct as f64 / truth.len() as f64,
        empty_rows: support.iter().map(|&s| s == 0).collect(),
        classes,
        confusion,
        counts,
        support,
    })
}

/// Runs `classifier` over every test row and compares against `labels`.
pub fn evaluate_classifier<C: Classifier + ?Sized>(
    classifier: &C,
    test: &FeatureMatrix,
    labels: &[String],
) -> Result<EvalReport> {
    if labels.len() != test.rows() {
        return Err(Error::DimensionMismatch {
            expected: test.rows(),
            found: labels.len(),
        });
    }
    let predicted = test
        .iter_rows()
        .map(|r| classifier.predict(r))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(labels, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn perfect_predictor() {
        let t = s(&["a", "b", "c", "a"]);
        let r = evaluate_predictions(&t, &t).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.confusion[i][j], if i == j { 100.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_predictor_on_balanced_split() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let labels = s(&["in", "out", "in", "out"]);
        let constant = |_: &[f64]| -> Result<String> { Ok("in".to_string()) };
        let r = evaluate_classifier(&constant, &x, &labels).unwrap();
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn predicted_only_class_gets_empty_row() {
        let r = evaluate_predictions(&s(&["a", "a"]), &s(&["a", "z"])).unwrap();
        assert_eq!(r.classes, s(&["a", "z"]));
        assert_eq!(r.empty_rows, vec![false, true]);
        assert_eq!(r.confusion[1], vec![0.0, 0.0]);
    }

    #[test]
    fn empty_split_is_error() {
        assert!(matches!(evaluate_predictions(&[], &[]), Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn rows_sum_to_100(pairs in prop::collection::vec((0u8..5, 0u8..5), 1..200)) {
            let t: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
            let p: Vec<String> = pairs.iter().map(|p| p.1.to_string()).collect();
            let r = evaluate_predictions(&t, &p).unwrap();
            for (row, empty) in r.confusion.iter().zip(&r.empty_rows) {
                let sum: f64 = row.iter().sum();
                if *empty {
                    prop_assert_eq!(sum, 0.0);
                } else {
                    prop_assert!((sum - 100.0).abs() < 1e-9);
                }
            }
        }
    }
}
