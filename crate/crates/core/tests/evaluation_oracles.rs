mod common;

use common::*;
use egoctx::evaluation::{
    evaluate_predictions, knn_majority_vote, rf_train, svm_train, Classifier, ForestConfig, ManifoldVoter,
    NeuronAssignments, SomVoter, SvmConfig,
};
use egoctx::manifold::{pca_fit, som_fit, FeatureMatrix, SomConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(seed: u64, per: usize) -> (FeatureMatrix, Vec<String>) {
    let x = three_gaussians(seed, per);
    let labels = (0..x.rows()).map(|i| format!("c{}", i % 3)).collect();
    (x, labels)
}

#[test]
fn knn_vote_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let train: Vec<Vec<f64>> = (0..120)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let labels: Vec<String> = (0..120).map(|i| ["a", "b", "c"][(i * 7) % 3].to_string()).collect();
    for _ in 0..200 {
        let q = [rng.random::<f64>(), rng.random::<f64>()];
        for k in [1, 4, 10] {
            assert_eq!(
                knn_majority_vote(&train, &labels, &q, k).unwrap(),
                brute_force_knn_vote(&train, &labels, &q, k)
            );
        }
    }
}

#[test]
fn pca_voter_separates_blobs() {
    let (x, labels) = blobs(3, 40);
    let voter = ManifoldVoter::new(pca_fit(&x, 2).unwrap(), &x, &labels, 5).unwrap();
    let (probe, truth) = blobs(4, 20);
    let predicted: Vec<String> = probe.iter_rows().map(|r| voter.predict(r).unwrap()).collect();
    assert!(evaluate_predictions(&truth, &predicted).unwrap().accuracy > 0.95);
}

#[test]
fn som_vote_matches_manual_neuron_mode() {
    let (x, labels) = blobs(6, 30);
    let grid = som_fit(&x, 3, 3, &SomConfig::with_seed(6)).unwrap();
    let assignments = NeuronAssignments::build(&grid, &x, &labels).unwrap();
    let majority = assignments.majority_labels();
    let voter = SomVoter::new(grid.clone(), &x, &labels).unwrap();
    for r in x.iter_rows() {
        let bmu = grid.bmu(r).unwrap();
        let counts = assignments.label_counts(bmu);
        let top = counts.values().max().copied().unwrap();
        let got = voter.predict(r).unwrap();
        // the winner is always one of the most frequent labels of the BMU
        assert_eq!(counts[&got], top);
        if counts.values().filter(|&&c| c == top).count() == 1 {
            assert_eq!(Some(got), majority[bmu].clone());
        }
    }
}

#[test]
fn forest_and_svm_learn_blobs() {
    let (x, labels) = blobs(8, 40);
    let (probe, truth) = blobs(9, 20);
    let rf = rf_train(
        &x,
        &labels,
        &ForestConfig {
            n_trees: 25,
            ..ForestConfig::with_seed(1)
        },
    )
    .unwrap();
    let svm = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
    for c in [&rf as &dyn Classifier, &svm] {
        let predicted: Vec<String> = probe.iter_rows().map(|r| c.predict(r).unwrap()).collect();
        assert!(evaluate_predictions(&truth, &predicted).unwrap().accuracy > 0.95);
    }
    let s: f64 = rf.importances.iter().sum();
    assert!((s - 1.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn confusion_rows_sum_to_100(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..80)) {
        let truth: Vec<String> = pairs.iter().map(|p| format!("l{}", p.0)).collect();
        let predicted: Vec<String> = pairs.iter().map(|p| format!("l{}", p.1)).collect();
        let r = evaluate_predictions(&truth, &predicted).unwrap();
        for (i, row) in r.confusion.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if r.support[i] > 0 {
                prop_assert!((s - 100.0).abs() <= 1e-9);
            } else {
                prop_assert_eq!(s, 0.0);
            }
        }
        let correct = pairs.iter().filter(|p| p.0 == p.1).count();
        prop_assert!((r.accuracy - correct as f64 / pairs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn svm_confidences_are_probabilities(seed in 0u64..200) {
        let (x, labels) = blobs(seed, 8);
        let model = svm_train(&x, &labels, &SvmConfig { epochs: 5, ..SvmConfig::default() }).unwrap();
        for r in x.iter_rows() {
            for c in model.class_confidences(r).unwrap() {
                prop_assert!(c > 0.0 && c < 1.0);
            }
        }
    }
}
