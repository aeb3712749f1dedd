//! Self-organizing map on a regular quadrangular grid, trained online.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, sq_dist, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Defaults to `max(grid_w, grid_h) / 2` when absent.
    pub sigma_start: Option<f64>,
    pub sigma_end: f64,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr_start: 0.5,
            lr_end: 0.01,
            sigma_start: None,
            sigma_end: 0.25,
            seed: 42,
        }
    }
}

impl SomConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lr_start > 0.0
            && self.lr_end > 0.0
            && self.sigma_end > 0.0
            && self.sigma_start.is_none_or(|s| s > 0.0);
        if !ok {
            return Err(Error::Config("SOM learning rates and radii must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub grid_w: usize,
    pub grid_h: usize,
    pub dim: usize,
    /// (grid_w * grid_h) x dim, row-major; neuron (x, y) is row `y * grid_w + x`.
    pub codebook: Vec<f64>,
    /// Training configuration with `sigma_start` resolved.
    pub train_config: SomConfig,
}

impl SomGrid {
    /// Codebook seeded from a sample of training rows, before any training.
    ///
    /// Rows are drawn without replacement when there are enough of them.
    pub fn initialize(x: &FeatureMatrix, grid_w: usize, grid_h: usize, config: &SomConfig) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("SOM training data has no rows".into()));
        }
        if grid_w == 0 || grid_h == 0 || grid_w * grid_h < 2 {
            return Err(Error::Config(format!(
                "SOM grid must have at least 2 neurons, got {grid_w}x{grid_h}"
            )));
        }
        config.validate()?;
        let neurons = grid_w * grid_h;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let picks: Vec<usize> = if x.rows() >= neurons {
            index::sample(&mut rng, x.rows(), neurons).into_vec()
        } else {
            (0..neurons).map(|_| rng.random_range(0..x.rows())).collect()
        };
        let mut codebook = Vec::with_capacity(neurons * x.cols());
        for i in picks {
            codebook.extend_from_slice(x.row(i));
        }
        let mut train_config = config.clone();
        train_config.sigma_start = Some(config.sigma_start.unwrap_or(grid_w.max(grid_h) as f64 / 2.0));
        Ok(Self {
            grid_w,
            grid_h,
            dim: x.cols(),
            codebook,
            train_config,
        })
    }

    /// Online training: shuffled passes with exponentially decaying rate and radius.
    pub fn train(&mut self, x: &FeatureMatrix) -> Result<()> {
        check_dim(self.dim, x.cols())?;
        if x.is_empty() {
            return Err(Error::Empty("SOM training data has no rows".into()));
        }
        let cfg = self.train_config.clone();
        let sigma_start = cfg.sigma_start.unwrap_or(self.grid_w.max(self.grid_h) as f64 / 2.0);
        // independent stream from the initialization draw
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let total = cfg.epochs * x.rows();
        let decay = |start: f64, end: f64, t: usize| {
            if total <= 1 {
                start
            } else {
                start * (end / start).powf(t as f64 / (total - 1) as f64)
            }
        };
        let coords: Vec<(f64, f64)> = (0..self.neurons()).map(|n| self.coords_f64(n)).collect();
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut t = 0;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let sample = x.row(i);
                let alpha = decay(cfg.lr_start, cfg.lr_end, t);
                let sigma = decay(sigma_start, cfg.sigma_end, t);
                let denom = 2.0 * sigma * sigma;
                let (bx, by) = coords[self.bmu_unchecked(sample)];
                for (n, &(nx, ny)) in coords.iter().enumerate() {
                    let g2 = (nx - bx) * (nx - bx) + (ny - by) * (ny - by);
                    let step = alpha * (-g2 / denom).exp();
                    let w = &mut self.codebook[n * self.dim..(n + 1) * self.dim];
                    for (wv, sv) in w.iter_mut().zip(sample) {
                        *wv += step * (sv - *wv);
                    }
                }
                t += 1;
            }
        }
        Ok(())
    }

    pub fn neurons(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn weights(&self, n: usize) -> &[f64] {
        &self.codebook[n * self.dim..(n + 1) * self.dim]
    }

    /// Grid position (x, y) of neuron `n`.
    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n % self.grid_w, n / self.grid_w)
    }

    fn coords_f64(&self, n: usize) -> (f64, f64) {
        let (x, y) = self.coords(n);
        (x as f64, y as f64)
    }

    pub fn index_of(&self, x: usize, y: usize) -> usize {
        y * self.grid_w + x
    }

    /// Neurons sharing an edge with each other (4-neighborhood). A neuron is
    /// not contiguous with itself.
    pub fn are_contiguous(&self, a: usize, b: usize) -> bool {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by) == 1
    }

    /// Neurons within Chebyshev distance 1 of `n`, excluding `n`.
    pub fn neighbors8(&self, n: usize) -> Vec<usize> {
        let (x, y) = self.coords(n);
        let mut out = Vec::with_capacity(8);
        for ny in y.saturating_sub(1)..=(y + 1).min(self.grid_h - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(self.grid_w - 1) {
                if (nx, ny) != (x, y) {
                    out.push(self.index_of(nx, ny));
                }
            }
        }
        out
    }

    pub fn grid_dist_sq(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx).pow(2) + ay.abs_diff(by).pow(2)
    }

    fn bmu_unchecked(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for n in 0..self.neurons() {
            let d = sq_dist(x, self.weights(n));
            if d < best.1 {
                best = (n, d);
            }
        }
        best.0
    }

    /// Best matching unit; ties go to the lowest row-major index.
    pub fn bmu(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        Ok(self.bmu_unchecked(x))
    }

    /// The `k` neurons nearest to `x`, ascending by distance, ties by index.
    pub fn bmu_k(&self, x: &[f64], k: usize) -> Result<Vec<usize>> {
        check_dim(self.dim, x.len())?;
        if k == 0 || k > self.neurons() {
            return Err(Error::Config(format!("k must be in 1..={}, got {k}", self.neurons())));
        }
        let mut d: Vec<(usize, f64)> = (0..self.neurons()).map(|n| (n, sq_dist(x, self.weights(n)))).collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(d.into_iter().take(k).map(|(n, _)| n).collect())
    }

    /// Mean Euclidean distance from each row to its BMU.
    pub fn quantization_error(&self, x: &FeatureMatrix) -> Result<f64> {
        check_dim(self.dim, x.cols())?;
        if x.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = x
            .iter_rows()
            .map(|r| sq_dist(r, self.weights(self.bmu_unchecked(r))).sqrt())
            .sum();
        Ok(total / x.rows() as f64)
    }

    /// BMU of every row.
    pub fn bmus(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        check_dim(self.dim, x.cols())?;
        Ok(x.iter_rows().map(|r| self.bmu_unchecked(r)).collect())
    }
}

/// Initializes and trains a `grid_w x grid_h` SOM on the rows of `x`.
pub fn som_fit(x: &FeatureMatrix, grid_w: usize, grid_h: usize, config: &SomConfig) -> Result<SomGrid> {
    let mut grid = SomGrid::initialize(x, grid_w, grid_h, config)?;
    grid.train(x)?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn clusters(seed: u64, centers: &[[f64; 2]], per: usize, sd: f64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut rows = Vec::new();
        for _ in 0..per {
            for c in centers {
                rows.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            }
        }
        FeatureMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_sample_attracts_bmu() {
        let x = FeatureMatrix::from_rows(&[vec![0.3, -2.0, 5.0]]).unwrap();
        let grid = som_fit(&x, 3, 2, &SomConfig::default()).unwrap();
        let b = grid.bmu(x.row(0)).unwrap();
        assert!(sq_dist(grid.weights(b), x.row(0)).sqrt() < 1e-3);
    }

    #[test]
    fn two_neurons_find_two_clusters() {
        let sd = 0.3;
        let x = clusters(5, &[[0.0, 0.0], [10.0, 10.0]], 50, sd);
        let grid = som_fit(&x, 1, 2, &SomConfig::default()).unwrap();
        let mut found = [false; 2];
        for n in 0..2 {
            let w = grid.weights(n);
            for (c, center) in [[0.0, 0.0], [10.0, 10.0]].iter().enumerate() {
                if sq_dist(w, center).sqrt() < 3.0 * sd {
                    found[c] = true;
                }
            }
        }
        assert_eq!(found, [true, true], "{:?}", grid.codebook);
    }

    #[test]
    fn training_reduces_quantization_error() {
        let x = clusters(9, &[[0.0, 0.0], [4.0, 1.0], [2.0, 6.0]], 40, 0.5);
        let init = SomGrid::initialize(&x, 4, 4, &SomConfig::default()).unwrap();
        let trained = som_fit(&x, 4, 4, &SomConfig::default()).unwrap();
        assert!(trained.quantization_error(&x).unwrap() < init.quantization_error(&x).unwrap());
    }

    #[test]
    fn bit_reproducible() {
        let x = clusters(1, &[[0.0, 0.0], [3.0, 3.0]], 30, 1.0);
        let a = som_fit(&x, 3, 3, &SomConfig::default()).unwrap();
        let b = som_fit(&x, 3, 3, &SomConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = som_fit(&x, 3, 3, &SomConfig::with_seed(7)).unwrap();
        assert_ne!(a.codebook, c.codebook);
    }

    #[test]
    fn codebook_rows_are_their_own_bmu() {
        let x = clusters(2, &[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]], 40, 1.0);
        let grid = som_fit(&x, 5, 4, &SomConfig::default()).unwrap();
        for n in 0..grid.neurons() {
            assert_eq!(grid.bmu(grid.weights(n)).unwrap(), n);
        }
    }

    #[test]
    fn bmu_k_contract() {
        let x = clusters(3, &[[0.0, 0.0], [2.0, 2.0]], 20, 1.0);
        let grid = som_fit(&x, 3, 3, &SomConfig::default()).unwrap();
        assert_eq!(grid.bmu_k(grid.weights(4), 1).unwrap(), vec![4]);
        let mut all = grid.bmu_k(&[0.5, 0.5], 9).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        assert!(grid.bmu_k(&[0.5, 0.5], 10).is_err());
        assert!(grid.bmu_k(&[0.5], 1).is_err());
    }

    #[test]
    fn bmu_ties_go_to_lowest_index() {
        let grid = SomGrid {
            grid_w: 2,
            grid_h: 2,
            dim: 1,
            codebook: vec![1.0, -1.0, 1.0, 5.0],
            train_config: SomConfig::default(),
        };
        assert_eq!(grid.bmu(&[0.0]).unwrap(), 0);
        assert_eq!(grid.bmu_k(&[0.0], 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        let empty = FeatureMatrix::from_flat(0, 2, vec![], vec![]).unwrap();
        assert!(matches!(
            som_fit(&empty, 2, 2, &SomConfig::default()),
            Err(Error::Empty(_))
        ));
        let x = FeatureMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(som_fit(&x, 1, 1, &SomConfig::default()).is_err());
    }

    #[test]
    fn grid_topology() {
        let grid = SomGrid {
            grid_w: 3,
            grid_h: 3,
            dim: 1,
            codebook: vec![0.0; 9],
            train_config: SomConfig::default(),
        };
        assert!(grid.are_contiguous(4, 1) && grid.are_contiguous(4, 5));
        assert!(!grid.are_contiguous(4, 0) && !grid.are_contiguous(4, 4));
        // 2 and 3 are adjacent in memory but not on the grid
        assert!(!grid.are_contiguous(2, 3));
        assert_eq!(grid.neighbors8(4).len(), 8);
        assert_eq!(grid.neighbors8(0), vec![1, 3, 4]);
    }
}
