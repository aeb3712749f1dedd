//! Linear SVM: class-weighted hinge loss with L2 regularization, trained by
//! stochastic subgradient steps and calibrated with a logistic (Platt) fit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_index, Classifier};
use crate::error::{Error, Result};
use crate::manifold::{check_dim, FeatureMatrix};

/// Calibrated confidences are kept strictly inside (0, 1).
const CONFIDENCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClassWeighting {
    Uniform,
    /// Inverse class proportions, `N / (classes * n_c)`.
    Balanced,
    /// Explicit weight per class, in sorted class order.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 40,
            class_weighting: ClassWeighting::Uniform,
            seed: 42,
        }
    }
}

/// One binary hyperplane plus its logistic calibration `p = 1 / (1 + exp(-(a m + b)))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calibration: (f64, f64),
    /// Regularized objective at each accepted epoch boundary, starting at w = 0.
    pub losses: Vec<f64>,
}

impl BinarySvm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn confidence(&self, x: &[f64]) -> f64 {
        calibrate(self.calibration, self.margin(x))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn calibrate((a, b): (f64, f64), margin: f64) -> f64 {
    sigmoid(a * margin + b).clamp(CONFIDENCE_FLOOR, 1.0 - CONFIDENCE_FLOOR)
}

/// Linear classifier; binary problems keep a single hyperplane for the second
/// class in sorted order, multiclass problems one hyperplane per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub classes: Vec<String>,
    pub dim: usize,
    pub models: Vec<BinarySvm>,
    pub class_weights: Vec<f64>,
    pub config: SvmConfig,
}

impl LinearSvmModel {
    pub fn is_binary(&self) -> bool {
        self.classes.len() == 2
    }

    /// Calibrated confidence per class.
    pub fn class_confidences(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        if self.is_binary() {
            let p = self.models[0].confidence(x);
            Ok(vec![1.0 - p, p])
        } else {
            Ok(self.models.iter().map(|m| m.confidence(x)).collect())
        }
    }

    /// Calibrated confidence that `x` belongs to `class`.
    pub fn confidence_for(&self, x: &[f64], class: &str) -> Result<f64> {
        let idx = self
            .classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::Config(format!("unknown class '{class}'")))?;
        Ok(self.class_confidences(x)?[idx])
    }

    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        if self.is_binary() {
            return Ok(usize::from(self.models[0].confidence(x) > 0.5));
        }
        let conf = self.class_confidences(x)?;
        Ok((0..conf.len()).fold(0, |b, i| if conf[i] > conf[b] { i } else { b }))
    }
}

impl Classifier for LinearSvmModel {
    fn predict(&self, x: &[f64]) -> Result<String> {
        Ok(self.classes[self.predict_index(x)?].clone())
    }
}

fn objective(w: &[f64], b: f64, x: &FeatureMatrix, y: &[f64], c: &[f64], lambda: f64, total_weight: f64) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = x
        .iter_rows()
        .zip(y.iter().zip(c))
        .map(|(r, (&yi, &ci))| {
            let m = r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            ci * (1.0 - yi * m).max(0.0)
        })
        .sum();
    reg + hinge / total_weight
}

/// Trains one weighted binary hinge-loss model. Each epoch is a shuffled pass of
/// subgradient steps; an epoch that would raise the full objective is rejected
/// and the step schedule is halved, so recorded losses never increase.
fn train_binary(x: &FeatureMatrix, y: &[f64], c: &[f64], cfg: &SvmConfig, stream: u64) -> BinarySvm {
    let d = x.cols();
    let n = x.rows();
    let total_weight: f64 = c.iter().sum();
    let mean_weight = total_weight / n as f64;
    let mean_sq_norm = x.iter_rows().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
    // first step size ~ 1 / (|x|^2 + 1)
    let mut t0 = (mean_sq_norm + 1.0) / cfg.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = objective(&w, b, x, y, c, cfg.lambda, total_weight);
    let mut losses = vec![loss];
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut nw, mut nb) = (w.clone(), b);
        let mut nt = t;
        for &i in &order {
            let eta = 1.0 / (cfg.lambda * (nt + t0));
            let r = x.row(i);
            let m = r.iter().zip(&nw).map(|(a, b)| a * b).sum::<f64>() + nb;
            let shrink = 1.0 - eta * cfg.lambda;
            nw.iter_mut().for_each(|v| *v *= shrink);
            if y[i] * m < 1.0 {
                let g = eta * y[i] * c[i] / mean_weight;
                for (wv, xv) in nw.iter_mut().zip(r) {
                    *wv += g * xv;
                }
                nb += g;
            }
            nt += 1.0;
        }
        let new_loss = objective(&nw, nb, x, y, c, cfg.lambda, total_weight);
        if new_loss <= loss {
            w = nw;
            b = nb;
            t = nt;
            loss = new_loss;
        } else {
            t0 *= 2.0;
        }
        losses.push(loss);
    }

    let margins: Vec<f64> = x
        .iter_rows()
        .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b)
        .collect();
    let calibration = platt(&margins, y, c);
    BinarySvm {
        weights: w,
        bias: b,
        calibration,
        losses,
    }
}

/// Weighted maximum-likelihood logistic fit of labels on margins with Platt's
/// smoothed targets, solved by damped Newton iterations.
fn platt(margins: &[f64], y: &[f64], c: &[f64]) -> (f64, f64) {
    let pos_w: f64 = y.iter().zip(c).filter(|(v, _)| **v > 0.0).map(|(_, w)| w).sum();
    let neg_w: f64 = y.iter().zip(c).filter(|(v, _)| **v < 0.0).map(|(_, w)| w).sum();
    let n_pos = y.iter().filter(|v| **v > 0.0).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = y.iter().map(|&v| if v > 0.0 { hi } else { lo }).collect();
    let scale = y.len() as f64 / (pos_w + neg_w);
    let weights: Vec<f64> = c.iter().map(|w| w * scale).collect();

    let nll = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(targets.iter().zip(&weights))
            .map(|(&m, (&t, &w))| {
                let z = a * m + b;
                // log(1 + e^z) - t z, computed stably
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                w * (softplus - t * z)
            })
            .sum()
    };

    let (mut a, mut b) = (1.0, 0.0);
    let mut f = nll(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&m, (&t, &w)) in margins.iter().zip(targets.iter().zip(&weights)) {
            let p = sigmoid(a * m + b);
            let d = w * (p - t);
            ga += d * m;
            gb += d;
            let h = w * p * (1.0 - p);
            haa += h * m * m;
            hab += h * m;
            hbb += h;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det);
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = nll(na, nb);
            if nf < f + 1e-4 * step * (ga * da + gb * db) {
                a = na;
                b = nb;
                f = nf;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// Trains a linear SVM on `x` with string labels.
pub fn svm_train(x: &FeatureMatrix, labels: &[String], config: &SvmConfig) -> Result<LinearSvmModel> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: labels.len(),
        });
    }
    if config.lambda <= 0.0 {
        return Err(Error::Config("SVM lambda must be positive".into()));
    }
    let (classes, y_idx) = class_index(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let mut counts = vec![0usize; classes.len()];
    for &i in &y_idx {
        counts[i] += 1;
    }
    let class_weights: Vec<f64> = match &config.class_weighting {
        ClassWeighting::Uniform => vec![1.0; classes.len()],
        ClassWeighting::Balanced => counts
            .iter()
            .map(|&n| x.rows() as f64 / (classes.len() as f64 * n as f64))
            .collect(),
        ClassWeighting::Explicit(w) => {
            if w.len() != classes.len() || w.iter().any(|v| v.is_nan() || *v <= 0.0) {
                return Err(Error::Config(
                    "explicit class weights must be positive, one per class".into(),
                ));
            }
            w.clone()
        }
    };
    let c: Vec<f64> = y_idx.iter().map(|&i| class_weights[i]).collect();
    let positives: Vec<usize> = if classes.len() == 2 {
        vec![1]
    } else {
        (0..classes.len()).collect()
    };
    let models = positives
        .iter()
        .map(|&p| {
            let y: Vec<f64> = y_idx.iter().map(|&i| if i == p { 1.0 } else { -1.0 }).collect();
            train_binary(x, &y, &c, config, p as u64 + 1)
        })
        .collect();
    Ok(LinearSvmModel {
        classes,
        dim: x.cols(),
        models,
        class_weights,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_clusters(seed: u64, per: usize) -> (FeatureMatrix, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.4).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * per {
            let (cx, l) = if i % 2 == 0 { (-2.0, "neg") } else { (2.0, "pos") };
            rows.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
            labels.push(l.to_string());
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_fixture_is_learned() {
        let (x, labels) = two_clusters(1, 40);
        let model = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
        for (r, l) in x.iter_rows().zip(&labels) {
            assert_eq!(&model.predict(r).unwrap(), l);
        }
    }

    #[test]
    fn hyperplane_points_are_uncertain() {
        let (x, labels) = two_clusters(2, 50);
        let model = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
        let m = &model.models[0];
        // project a probe onto the hyperplane w.x + b = 0
        let probe = [0.3, -0.2];
        let t = m.margin(&probe) / m.weights.iter().map(|v| v * v).sum::<f64>();
        let on_plane: Vec<f64> = probe.iter().zip(&m.weights).map(|(p, w)| p - t * w).collect();
        assert!(m.margin(&on_plane).abs() < 1e-9);
        let p = m.confidence(&on_plane);
        assert!(p > 0.4 && p < 0.6, "{p}");
    }

    #[test]
    fn losses_never_increase() {
        let (x, labels) = two_clusters(3, 30);
        let model = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
        assert!(model.models[0].losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn duplicated_samples_keep_the_decision() {
        let (x, labels) = two_clusters(4, 30);
        let dup_idx: Vec<usize> = (0..x.rows()).flat_map(|i| [i, i]).collect();
        let xd = x.select_rows(&dup_idx);
        let ld: Vec<String> = dup_idx.iter().map(|&i| labels[i].clone()).collect();
        let a = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
        let b = svm_train(&xd, &ld, &SvmConfig::default()).unwrap();
        for i in -10..=10 {
            let probe = [i as f64 * 0.5, (i % 3) as f64];
            if probe[0].abs() < 0.6 {
                continue;
            }
            assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap());
        }
    }

    #[test]
    fn multiclass_one_vs_rest() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let k = i % 3;
            let angle = k as f64 * 2.1;
            let j = (i / 3) as f64 * 0.01;
            rows.push(vec![3.0 * angle.cos() + j, 3.0 * angle.sin() - j]);
            labels.push(format!("c{k}"));
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = svm_train(&x, &labels, &SvmConfig::default()).unwrap();
        assert_eq!(model.models.len(), 3);
        let correct = x
            .iter_rows()
            .zip(&labels)
            .filter(|(r, l)| &model.predict(r).unwrap() == *l)
            .count();
        assert_eq!(correct, 60);
        let conf = model.class_confidences(x.row(0)).unwrap();
        assert!(conf.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn single_class_is_error() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let labels = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(
            svm_train(&x, &labels, &SvmConfig::default()),
            Err(Error::SingleClass(1))
        ));
    }

    #[test]
    fn balanced_weights_are_inverse_proportions() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![5.0]]).unwrap();
        let labels: Vec<String> = ["a", "a", "a", "b"].iter().map(|s| s.to_string()).collect();
        let cfg = SvmConfig {
            class_weighting: ClassWeighting::Balanced,
            ..Default::default()
        };
        let model = svm_train(&x, &labels, &cfg).unwrap();
        assert!((model.class_weights[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((model.class_weights[1] - 2.0).abs() < 1e-12);
    }
}
