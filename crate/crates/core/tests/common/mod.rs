//! Fixtures and independent reference implementations shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use egoctx::evaluation::{IndoorOutdoor, LabeledDataset, Split, Task};
use egoctx::features::{DescriptorConfig, Extractor, FeatureKind};
use egoctx::io::{labeled_dataset, synth_manifest, synth_render, SynthConfig, SynthFrame};
use egoctx::manifold::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// ---- reference linear algebra ----

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// in descending order and the matching eigenvectors as columns (row-major n x n).
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].total_cmp(&m[a * n + a]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (values, vecs)
}

/// Sample covariance with 1/(N-1) normalization, row-major d x d.
pub fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    (mean, c)
}

/// Rigid 2-D Procrustes (rotation or reflection plus translation) of `a` onto
/// `b`; returns the aligned copy of `a`.
pub fn procrustes_2d(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = a.len() as f64;
    let ma = [
        a.iter().map(|p| p[0]).sum::<f64>() / n,
        a.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let mb = [
        b.iter().map(|p| p[0]).sum::<f64>() / n,
        b.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let best = [false, true]
        .into_iter()
        .map(|reflect| {
            let src: Vec<[f64; 2]> = a
                .iter()
                .map(|p| {
                    let (x, y) = (p[0] - ma[0], p[1] - ma[1]);
                    if reflect {
                        [x, -y]
                    } else {
                        [x, y]
                    }
                })
                .collect();
            // optimal rotation angle for centered point sets
            let (mut sdot, mut scross) = (0.0, 0.0);
            for (p, q) in src.iter().zip(b) {
                let q = [q[0] - mb[0], q[1] - mb[1]];
                sdot += p[0] * q[0] + p[1] * q[1];
                scross += p[0] * q[1] - p[1] * q[0];
            }
            let th = scross.atan2(sdot);
            let (c, s) = (th.cos(), th.sin());
            let out: Vec<[f64; 2]> = src
                .iter()
                .map(|p| [c * p[0] - s * p[1] + mb[0], s * p[0] + c * p[1] + mb[1]])
                .collect();
            let err: f64 = out
                .iter()
                .zip(b)
                .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                .sum();
            (err, out)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    best.1
}

/// Label voted by the `k` nearest rows found by a full sort; ties go to the
/// class of the nearest member among the tied classes.
pub fn brute_force_knn_vote(train: &[Vec<f64>], labels: &[String], x: &[f64], k: usize) -> String {
    let mut all: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let top: Vec<&String> = all[..k].iter().map(|&(_, i)| &labels[i]).collect();
    let count = |l: &String| top.iter().filter(|t| **t == l).count();
    let best = top.iter().map(|l| count(l)).max().unwrap();
    top.iter().find(|l| count(l) == best).unwrap().to_string()
}

// ---- geometric fixtures ----

pub fn gaussian_matrix(seed: u64, n: usize, d: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    // anisotropic scales so the covariance spectrum is well separated
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| unit.sample(&mut rng) * (d - j) as f64 + 0.3 * j as f64)
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(&rows).unwrap()
}

/// Orthonormal basis of a random 2-D subspace of R^d (Gram-Schmidt).
fn random_plane(rng: &mut ChaCha8Rng, d: usize) -> [Vec<f64>; 2] {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut u: Vec<f64> = (0..d).map(|_| unit.sample(rng)).collect();
    let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= nu);
    let mut w: Vec<f64> = (0..d).map(|_| unit.sample(rng)).collect();
    let dot: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
    w.iter_mut().zip(&u).for_each(|(a, b)| *a -= dot * b);
    let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= nw);
    [u, w]
}

/// Points of a 2-D square isometrically embedded in R^d, plus the planar coordinates.
pub fn plane_in_space(seed: u64, n: usize, d: usize) -> (FeatureMatrix, Vec<[f64; 2]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [u, w] = random_plane(&mut rng, d);
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [10.0 * rng.random::<f64>(), 10.0 * rng.random::<f64>()])
        .collect();
    let rows: Vec<Vec<f64>> = coords
        .iter()
        .map(|c| (0..d).map(|j| c[0] * u[j] + c[1] * w[j]).collect())
        .collect();
    (FeatureMatrix::from_rows(&rows).unwrap(), coords)
}

/// Swiss roll in R^3: (t cos t, h, t sin t) with t in [1.5 pi, 4.5 pi].
pub fn swiss_roll(seed: u64, n: usize) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts = Vec::with_capacity(n);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.random::<f64>());
            let h = 21.0 * rng.random::<f64>();
            ts.push(t);
            vec![t * t.cos(), h, t * t.sin()]
        })
        .collect();
    (FeatureMatrix::from_rows(&rows).unwrap(), ts)
}

pub fn three_gaussians(seed: u64, per: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 0.5).unwrap();
    let centers = [[0.0, 0.0, 0.0], [6.0, 0.0, 1.0], [0.0, 6.0, -1.0]];
    let rows: Vec<Vec<f64>> = (0..per)
        .flat_map(|_| centers.iter().map(|c| c.to_vec()).collect::<Vec<_>>())
        .map(|c| c.iter().map(|v| v + unit.sample(&mut rng)).collect())
        .collect();
    FeatureMatrix::from_rows(&rows).unwrap()
}

/// Slowly drifting 2-D sequence: a noisy closed loop.
pub fn smooth_sequence(seed: u64, n: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 0.05).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            vec![
                3.0 * t.cos() + unit.sample(&mut rng),
                2.0 * (2.0 * t).sin() + unit.sample(&mut rng),
            ]
        })
        .collect();
    FeatureMatrix::from_rows(&rows).unwrap()
}

// ---- synthetic frame fixtures ----

/// Five locations (two indoor) with hues 16 degrees apart and per-frame
/// brightness swinging by up to 80%, so brightness overlaps across locations
/// and only the hue identifies them.
pub fn context_config(seed: u64) -> SynthConfig {
    let mut c = SynthConfig::standard(5, 80, 0.4, seed);
    for (i, l) in c.locations.iter_mut().enumerate() {
        l.hue = 16.0 * i as f64;
    }
    c.hue_jitter = 3.0;
    c.brightness_jitter = 0.8;
    c
}

/// Label signal mostly in color: L0-L2 differ by hue only, L3 and L4 share a
/// hue and differ only by texture orientation.
pub fn fusion_config(seed: u64) -> SynthConfig {
    let mut c = SynthConfig::standard(5, 60, 0.4, seed);
    let hues = [0.0, 72.0, 144.0, 240.0, 240.0];
    for (i, l) in c.locations.iter_mut().enumerate() {
        l.hue = hues[i];
        l.texture_orientation = if i == 4 { 90.0 } else { 0.0 };
        l.hand_orientation = l.texture_orientation + 90.0;
    }
    c.hand_fraction = 0.0;
    c.texture_amplitude = 0.4;
    c
}

/// Two regimes of two locations each; the hand stripes run along the
/// background texture of the other regime, so hand evidence flips sign.
/// Hand stripes match the background texture in period and amplitude, and
/// pixel noise masks the blob outline.
pub fn hand_config(seed: u64) -> SynthConfig {
    let mut c = SynthConfig::standard(4, 250, 0.5, seed);
    c.hand_amplitude = c.texture_amplitude;
    c.hand_period = c.texture_period;
    c.noise = 0.1;
    c
}

pub struct FrameSet {
    pub frames: Vec<SynthFrame>,
    pub manifest: egoctx::io::Manifest,
}

pub fn render(config: &SynthConfig) -> FrameSet {
    let frames = synth_render(config).unwrap();
    let manifest = synth_manifest(config, &frames, ".").unwrap();
    FrameSet { frames, manifest }
}

pub fn fast_descriptor_config() -> DescriptorConfig {
    DescriptorConfig {
        gist_resize: (64, 64),
        ..Default::default()
    }
}

impl FrameSet {
    pub fn images(&self) -> Vec<egoctx::features::ImageFrame> {
        self.frames.iter().map(|f| f.frame.clone()).collect()
    }

    pub fn features(&self, kind: FeatureKind, config: &DescriptorConfig) -> FeatureMatrix {
        Extractor::new(kind, config.clone())
            .unwrap()
            .extract_matrix(&self.images())
            .unwrap()
    }

    pub fn dataset(&self, kind: FeatureKind, config: &DescriptorConfig) -> LabeledDataset {
        labeled_dataset(&self.manifest, self.features(kind, config)).unwrap()
    }

    pub fn hands(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.entry.hands.known().unwrap()).collect()
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|&i| self.frames[i].entry.split == split)
            .collect()
    }
}

pub fn task_labels(ds: &LabeledDataset, task: Task, split: Split) -> Vec<String> {
    ds.labels_for(task, split)
}

pub fn is_indoor(io: IndoorOutdoor) -> bool {
    io == IndoorOutdoor::Indoor
}
