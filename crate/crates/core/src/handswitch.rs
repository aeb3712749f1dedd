//! Context-switched hand detection: one HOG-SVM per SOM neuron, with a global
//! HOG-SVM taking over wherever a neuron's local model is degraded.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{svm_train, ClassWeighting, LinearSvmModel, SvmConfig};
use crate::features::{hog_descriptor, DescriptorConfig, FeatureVector, ImageFrame};
use crate::manifold::{check_dim, FeatureMatrix, SomGrid};

pub const HANDS: &str = "YES";
pub const NO_HANDS: &str = "NO";

/// Default grid side of the switching SOM.
pub const DEFAULT_GRID: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandswitchConfig {
    /// Neurons with fewer assigned frames are degraded.
    pub min_train: usize,
    /// Neurons whose local F1 falls below this are degraded.
    pub min_local_f1: f64,
    /// Each training frame trains this many best matching neurons.
    pub assign_k: usize,
    /// Calibrated confidence above which a frame is said to contain hands.
    pub threshold: f64,
    pub svm: SvmConfig,
}

impl Default for HandswitchConfig {
    fn default() -> Self {
        Self {
            min_train: 30,
            min_local_f1: 0.75,
            assign_k: 5,
            threshold: 0.5,
            svm: SvmConfig {
                class_weighting: ClassWeighting::Balanced,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronDetector {
    pub neuron: usize,
    /// `None` when the neuron had too few frames or a single class to train on.
    pub model: Option<LinearSvmModel>,
    pub train_count: usize,
    pub local_f1: f64,
    /// Frames in the local testing set.
    pub lts_count: usize,
    pub degraded: bool,
}

impl NeuronDetector {
    /// Local calibrated confidence; 0 for degraded neurons.
    pub fn confidence(&self, hog: &[f64]) -> Result<f64> {
        match (&self.model, self.degraded) {
            (Some(m), false) => m.confidence_for(hog, HANDS),
            _ => Ok(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiModelDetector {
    pub som: SomGrid,
    pub locals: Vec<NeuronDetector>,
    pub global_model: LinearSvmModel,
    pub min_train: usize,
    pub hog_config: DescriptorConfig,
    pub config: HandswitchConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub has_hands: bool,
    pub confidence: f64,
    pub neuron: usize,
    pub used_local: bool,
}

fn hand_label(h: bool) -> String {
    if h { HANDS } else { NO_HANDS }.to_string()
}

/// Counts for a binary detector with "hands" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl BinaryCounts {
    pub fn add(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn ratio(a: usize, b: usize) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }

    pub fn tpr(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn tnr(&self) -> f64 {
        Self::ratio(self.tn, self.tn + self.fp)
    }

    pub fn precision(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    /// 2PR / (P + R); 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.tpr());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// F1 on a local testing set; a set holding only one class scores 0.
fn local_f1(model: &LinearSvmModel, hog: &FeatureMatrix, hands: &[bool], lts: &[usize], threshold: f64) -> Result<f64> {
    let positives = lts.iter().filter(|&&i| hands[i]).count();
    if positives == 0 || positives == lts.len() {
        return Ok(0.0);
    }
    let mut c = BinaryCounts::default();
    for &i in lts {
        c.add(hands[i], model.confidence_for(hog.row(i), HANDS)? > threshold);
    }
    Ok(c.f1())
}

/// Trains the per-neuron detectors and the global fallback.
///
/// `hog` and `context` are row-aligned: row `i` of each describes training frame `i`.
pub fn train_multimodel(
    hog: &FeatureMatrix,
    hands: &[bool],
    context: &FeatureMatrix,
    som: SomGrid,
    hog_config: DescriptorConfig,
    config: &HandswitchConfig,
) -> Result<MultiModelDetector> {
    let n = hog.rows();
    if hands.len() != n || context.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if hands.len() != n { hands.len() } else { context.rows() },
        });
    }
    check_dim(som.dim, context.cols())?;
    let positives = hands.iter().filter(|&&h| h).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass(1));
    }
    if config.assign_k == 0 || config.assign_k > som.neurons() {
        return Err(Error::Config(format!("assign_k must be in 1..={}", som.neurons())));
    }
    let labels: Vec<String> = hands.iter().map(|&h| hand_label(h)).collect();
    let global_model = svm_train(hog, &labels, &config.svm)?;

    let mut assigned = vec![Vec::new(); som.neurons()];
    let mut single_bmu = Vec::with_capacity(n);
    for (i, row) in context.iter_rows().enumerate() {
        let bmus = som.bmu_k(row, config.assign_k)?;
        single_bmu.push(bmus[0]);
        for b in bmus {
            assigned[b].push(i);
        }
    }

    let locals = (0..som.neurons())
        .into_par_iter()
        .map(|neuron| {
            let own = &assigned[neuron];
            let neighborhood = som.neighbors8(neuron);
            let mut is_own = vec![false; n];
            own.iter().for_each(|&i| is_own[i] = true);
            let lts: Vec<usize> = (0..n)
                .filter(|&i| !is_own[i] && neighborhood.contains(&single_bmu[i]))
                .collect();
            let own_pos = own.iter().filter(|&&i| hands[i]).count();
            let trainable = !own.is_empty() && own_pos > 0 && own_pos < own.len();
            let model = if trainable {
                let cfg = SvmConfig {
                    seed: config.svm.seed.wrapping_add(neuron as u64 + 1),
                    ..config.svm.clone()
                };
                let local_labels: Vec<String> = own.iter().map(|&i| labels[i].clone()).collect();
                Some(svm_train(&hog.select_rows(own), &local_labels, &cfg)?)
            } else {
                None
            };
            let f1 = match &model {
                Some(m) => local_f1(m, hog, hands, &lts, config.threshold)?,
                None => 0.0,
            };
            Ok(NeuronDetector {
                neuron,
                degraded: model.is_none() || own.len() < config.min_train || f1 < config.min_local_f1,
                model,
                train_count: own.len(),
                local_f1: f1,
                lts_count: lts.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MultiModelDetector {
        som,
        locals,
        global_model,
        min_train: config.min_train,
        hog_config,
        config: config.clone(),
    })
}

impl MultiModelDetector {
    /// Detection from precomputed HOG and context descriptors.
    pub fn detect_features(&self, hog: &[f64], context: &[f64]) -> Result<Detection> {
        let neuron = self.som.bmu(context)?;
        let local = &self.locals[neuron];
        let (confidence, used_local) = if local.degraded {
            (self.global_model.confidence_for(hog, HANDS)?, false)
        } else {
            (local.confidence(hog)?, true)
        };
        Ok(Detection {
            has_hands: confidence > self.config.threshold,
            confidence,
            neuron,
            used_local,
        })
    }

    /// Global model alone, as used for the baseline.
    pub fn detect_baseline(&self, hog: &[f64]) -> Result<bool> {
        Ok(self.global_model.confidence_for(hog, HANDS)? > self.config.threshold)
    }

    pub fn degraded_count(&self) -> usize {
        self.locals.iter().filter(|l| l.degraded).count()
    }

    /// Same detector with every neuron degraded, i.e. the global model only.
    pub fn all_degraded(&self) -> Self {
        let mut d = self.clone();
        d.locals.iter_mut().for_each(|l| l.degraded = true);
        d
    }

    /// Re-applies the degradation rule with a different `min_train`.
    pub fn with_min_train(&self, min_train: usize) -> Self {
        let mut d = self.clone();
        d.min_train = min_train;
        d.config.min_train = min_train;
        for l in &mut d.locals {
            l.degraded = l.model.is_none() || l.train_count < min_train || l.local_f1 < d.config.min_local_f1;
        }
        d
    }
}

/// Computes HOG from `frame` with the detector's settings, then detects.
pub fn detect(det: &MultiModelDetector, frame: &ImageFrame, context_feature: &FeatureVector) -> Result<Detection> {
    let hog = hog_descriptor(frame, &det.hog_config);
    det.detect_features(&hog.values, &context_feature.values)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub multimodel: BinaryCounts,
    pub baseline: BinaryCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronStats {
    pub neuron: usize,
    pub activations: usize,
    pub local_uses: usize,
    pub global_uses: usize,
    /// Multimodel F1 on the test frames activating this neuron.
    pub f1: f64,
    pub degraded: bool,
    pub train_count: usize,
    pub local_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvaluation {
    pub per_location: BTreeMap<String, DetectionRow>,
    pub total: DetectionRow,
    pub per_neuron: Vec<NeuronStats>,
    pub detections: Vec<Detection>,
}

/// Scores the multimodel detector and the global-only baseline on a test set.
pub fn evaluate_detection(
    det: &MultiModelDetector,
    hog: &FeatureMatrix,
    context: &FeatureMatrix,
    hands: &[bool],
    locations: &[String],
) -> Result<DetectionEvaluation> {
    let n = hog.rows();
    if n == 0 {
        return Err(Error::Empty("detection evaluation needs test frames".into()));
    }
    for len in [context.rows(), hands.len(), locations.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let detections = (0..n)
        .map(|i| det.detect_features(hog.row(i), context.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut per_location: BTreeMap<String, DetectionRow> = BTreeMap::new();
    let mut total = DetectionRow::default();
    let mut neuron_counts = vec![BinaryCounts::default(); det.som.neurons()];
    let mut local_uses = vec![0; det.som.neurons()];
    for (i, d) in detections.iter().enumerate() {
        let base = det.detect_baseline(hog.row(i))?;
        let row = per_location.entry(locations[i].clone()).or_default();
        row.multimodel.add(hands[i], d.has_hands);
        row.baseline.add(hands[i], base);
        total.multimodel.add(hands[i], d.has_hands);
        total.baseline.add(hands[i], base);
        neuron_counts[d.neuron].add(hands[i], d.has_hands);
        local_uses[d.neuron] += usize::from(d.used_local);
    }
    let per_neuron = det
        .locals
        .iter()
        .map(|l| {
            let c = neuron_counts[l.neuron];
            NeuronStats {
                neuron: l.neuron,
                activations: c.total(),
                local_uses: local_uses[l.neuron],
                global_uses: c.total() - local_uses[l.neuron],
                f1: c.f1(),
                degraded: l.degraded,
                train_count: l.train_count,
                local_f1: l.local_f1,
            }
        })
        .collect();
    Ok(DetectionEvaluation {
        per_location,
        total,
        per_neuron,
        detections,
    })
}
