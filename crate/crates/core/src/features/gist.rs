//! GIST: oriented band-pass energy pooled over a coarse spatial grid.
//!
//! Filtering happens in the frequency domain with a bank of log-Gabor filters.
//! Each filter is real and point-symmetric in frequency, so its spatial kernel is
//! even and the response magnitude of a 180-degree rotated frame is the rotated
//! response of the original.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::resize::{grayscale, resize_bilinear};
use super::{DescriptorConfig, DescriptorId, FeatureVector, ImageFrame};

/// Highest filter center frequency, cycles per pixel.
const TOP_FREQUENCY: f64 = 0.25;
/// Ratio of the log-Gaussian radial width to the center frequency.
const RADIAL_SIGMA_RATIO: f64 = 0.55;
/// Angular width relative to the orientation spacing.
const ANGULAR_SIGMA_RATIO: f64 = 0.6;

pub struct GistExtractor {
    width: usize,
    height: usize,
    grid: usize,
    /// scales x orientations transfer functions, each width*height, row-major.
    filters: Vec<Vec<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

fn build_filter(width: usize, height: usize, center: f64, theta: f64, angular_sigma: f64) -> Vec<f64> {
    let log_sigma = RADIAL_SIGMA_RATIO.ln();
    let mut h = vec![0.0; width * height];
    for ky in 0..height {
        let v = signed_frequency(ky, height);
        for kx in 0..width {
            let u = signed_frequency(kx, width);
            let rho = (u * u + v * v).sqrt();
            // DC carries no texture; Nyquist bins have no point-symmetric partner
            if rho == 0.0 || 2 * kx == width || 2 * ky == height {
                continue;
            }
            let radial = (-(rho / center).ln().powi(2) / (2.0 * log_sigma * log_sigma)).exp();
            // orientation difference folded into (-pi/2, pi/2]
            let mut d = (v.atan2(u) - theta).rem_euclid(PI);
            if d > PI / 2.0 {
                d -= PI;
            }
            let angular = (-d * d / (2.0 * angular_sigma * angular_sigma)).exp();
            h[ky * width + kx] = radial * angular;
        }
    }
    h
}

impl GistExtractor {
    pub fn new(config: &DescriptorConfig) -> Self {
        let (width, height) = config.gist_resize;
        let orientations = config.gist_orientations;
        let angular_sigma = ANGULAR_SIGMA_RATIO * PI / orientations as f64;
        let mut filters = Vec::with_capacity(config.gist_scales * orientations);
        for s in 0..config.gist_scales {
            let center = TOP_FREQUENCY / 2f64.powi(s as i32);
            for o in 0..orientations {
                let theta = PI * o as f64 / orientations as f64;
                filters.push(build_filter(width, height, center, theta, angular_sigma));
            }
        }
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            grid: config.gist_grid,
            filters,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.width, self.height);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = buf[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                buf[y * w + x] = column[y];
            }
        }
    }

    pub fn extract(&self, frame: &ImageFrame) -> FeatureVector {
        let (w, h, g) = (self.width, self.height, self.grid);
        let gray = resize_bilinear(&grayscale(frame), w, h);
        let mut spectrum: Vec<Complex64> = gray.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut spectrum, false);

        let norm = 1.0 / (w * h) as f64;
        let x_edges: Vec<usize> = (0..=g).map(|i| i * w / g).collect();
        let y_edges: Vec<usize> = (0..=g).map(|i| i * h / g).collect();
        let mut values = Vec::with_capacity(self.filters.len() * g * g);
        let mut work = vec![Complex64::new(0.0, 0.0); w * h];
        for filter in &self.filters {
            for ((dst, &src), &gain) in work.iter_mut().zip(&spectrum).zip(filter) {
                *dst = src * gain;
            }
            self.fft2(&mut work, true);
            for gy in 0..g {
                for gx in 0..g {
                    let mut sum = 0.0;
                    for y in y_edges[gy]..y_edges[gy + 1] {
                        for x in x_edges[gx]..x_edges[gx + 1] {
                            sum += work[y * w + x].norm() * norm;
                        }
                    }
                    let count = (y_edges[gy + 1] - y_edges[gy]) * (x_edges[gx + 1] - x_edges[gx]);
                    values.push(sum / count as f64);
                }
            }
        }
        FeatureVector::new(DescriptorId::Gist, values)
    }
}

/// One-shot GIST; batch callers should reuse a [`GistExtractor`].
pub fn gist_descriptor(frame: &ImageFrame, config: &DescriptorConfig) -> FeatureVector {
    GistExtractor::new(config).extract(frame)
}
