//! Seeded synthetic frame streams standing in for real egocentric datasets.
//!
//! Each location renders a color field around its hue and brightness, an
//! oriented sinusoidal texture, and Gaussian pixel noise. Frames with hands
//! carry a skin-toned striped blob whose stripe orientation is a per-location
//! setting, so HOG separability can be made to depend on the location.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Hands, Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::evaluation::{IndoorOutdoor, Split};
use crate::features::ImageFrame;

const SKIN_HUE: f64 = 25.0;
const SKIN_SATURATION: f64 = 0.45;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationSpec {
    pub name: String,
    pub indoor: bool,
    /// Degrees.
    pub hue: f64,
    pub saturation: f64,
    /// Mean HSV value in [0, 1].
    pub brightness: f64,
    /// Direction of the texture wave vector, degrees.
    pub texture_orientation: f64,
    /// Direction of the stripe wave vector inside the hand blob, degrees.
    pub hand_orientation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub locations: Vec<LocationSpec>,
    pub frames_per_location: usize,
    pub width: u32,
    pub height: u32,
    pub hand_fraction: f64,
    pub test_fraction: f64,
    /// Standard deviation of the per-frame hue offset, degrees.
    pub hue_jitter: f64,
    /// Per-frame brightness is scaled by a uniform factor in `1 ± brightness_jitter`.
    pub brightness_jitter: f64,
    pub texture_amplitude: f64,
    pub texture_period: f64,
    pub hand_amplitude: f64,
    pub hand_period: f64,
    /// Pixel noise standard deviation as a fraction of full scale.
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// `n_locations` with evenly spaced hues; the first `indoor_fraction` of them
    /// are dim indoor scenes. Even locations have horizontal-wave texture and
    /// vertical-wave hands, odd locations the reverse.
    pub fn standard(n_locations: usize, frames_per_location: usize, indoor_fraction: f64, seed: u64) -> Self {
        let n_indoor = (n_locations as f64 * indoor_fraction).round() as usize;
        let locations = (0..n_locations)
            .map(|i| {
                let indoor = i < n_indoor;
                let texture = if i % 2 == 0 { 0.0 } else { 90.0 };
                LocationSpec {
                    name: format!("L{i}"),
                    indoor,
                    hue: 360.0 * i as f64 / n_locations as f64,
                    saturation: 0.7,
                    brightness: if indoor { 0.4 } else { 0.85 },
                    texture_orientation: texture,
                    hand_orientation: texture + 90.0,
                }
            })
            .collect();
        Self {
            locations,
            frames_per_location,
            width: 128,
            height: 72,
            hand_fraction: 0.5,
            test_fraction: 0.3,
            hue_jitter: 8.0,
            brightness_jitter: 0.1,
            texture_amplitude: 0.25,
            texture_period: 8.0,
            hand_amplitude: 0.5,
            hand_period: 6.0,
            noise: 0.03,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.locations.len() < 2 {
            return Err(Error::Config("synthetic data needs at least 2 locations".into()));
        }
        if self.frames_per_location == 0 || self.width < 8 || self.height < 8 {
            return Err(Error::Config("need frames and frames of at least 8x8 pixels".into()));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.hand_fraction) || !unit(self.test_fraction) || !unit(self.brightness_jitter) {
            return Err(Error::Config(
                "fractions and brightness jitter must lie in [0, 1]".into(),
            ));
        }
        if self.texture_period <= 0.0 || self.hand_period <= 0.0 || self.noise < 0.0 || self.hue_jitter < 0.0 {
            return Err(Error::Config(
                "periods must be positive and noise levels non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// HSV (degrees, [0,1], [0,1]) to 8-bit RGB.
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

fn wave(x: f64, y: f64, orientation_deg: f64, period: f64, phase: f64) -> f64 {
    let t = orientation_deg.to_radians();
    (2.0 * PI * (x * t.cos() + y * t.sin()) / period + phase).sin()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthFrame {
    pub entry: ManifestEntry,
    pub frame: ImageFrame,
}

fn render_one(cfg: &SynthConfig, loc: usize, i: usize) -> SynthFrame {
    let site = &cfg.locations[loc];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((loc as u64) << 32) | i as u64);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    let hands = rng.random::<f64>() < cfg.hand_fraction;
    let split = if rng.random::<f64>() < cfg.test_fraction {
        Split::Test
    } else {
        Split::Train
    };
    let hue = site.hue + cfg.hue_jitter * unit.sample(&mut rng);
    let sat = (site.saturation + 0.03 * unit.sample(&mut rng)).clamp(0.0, 1.0);
    let scale = 1.0 + cfg.brightness_jitter * (2.0 * rng.random::<f64>() - 1.0);
    let value = (site.brightness * scale).clamp(0.02, 1.0);
    // the texture drifts slowly along the sequence, as under a moving camera
    let phase = 0.15 * i as f64 + 0.2 * unit.sample(&mut rng);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let (hx, hy) = (w * (0.35 + 0.3 * rng.random::<f64>()), h * 0.72);
    let (rx, ry) = (0.2 * w, 0.24 * h);
    let hand_phase = 2.0 * PI * rng.random::<f64>();

    let frame = ImageFrame::from_fn(cfg.width, cfg.height, |px, py| {
        let (x, y) = (px as f64, py as f64);
        let in_hand = hands && ((x - hx) / rx).powi(2) + ((y - hy) / ry).powi(2) <= 1.0;
        let rgb = if in_hand {
            let v = value * (1.0 + cfg.hand_amplitude * wave(x, y, site.hand_orientation, cfg.hand_period, hand_phase));
            hsv_to_rgb(SKIN_HUE, SKIN_SATURATION, v.clamp(0.0, 1.0))
        } else {
            let v =
                value * (1.0 + cfg.texture_amplitude * wave(x, y, site.texture_orientation, cfg.texture_period, phase));
            hsv_to_rgb(hue, sat, v.clamp(0.0, 1.0))
        };
        rgb.map(|c| {
            (c + 255.0 * cfg.noise * unit.sample(&mut rng))
                .round()
                .clamp(0.0, 255.0) as u8
        })
    })
    .expect("positive frame size");

    SynthFrame {
        entry: ManifestEntry {
            path: format!("{}/frame_{i:05}.png", site.name),
            split,
            location: site.name.clone(),
            indoor_outdoor: if site.indoor {
                IndoorOutdoor::Indoor
            } else {
                IndoorOutdoor::Outdoor
            },
            hands: if hands { Hands::Yes } else { Hands::No },
            sequence_index: i as u64,
        },
        frame,
    }
}

/// Renders every frame in memory, location by location in sequence order.
pub fn synth_render(config: &SynthConfig) -> Result<Vec<SynthFrame>> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.locations.len())
        .flat_map(|l| (0..config.frames_per_location).map(move |i| (l, i)))
        .collect();
    Ok(jobs.par_iter().map(|&(l, i)| render_one(config, l, i)).collect())
}

/// Manifest (with seed and config recorded as metadata) for rendered frames.
pub fn synth_manifest(
    config: &SynthConfig,
    frames: &[SynthFrame],
    root: impl Into<std::path::PathBuf>,
) -> Result<Manifest> {
    Ok(Manifest {
        entries: frames.iter().map(|f| f.entry.clone()).collect(),
        meta: vec![
            ("seed".to_string(), config.seed.to_string()),
            ("synth_config".to_string(), serde_json::to_string(config)?),
        ],
        root: root.into(),
    })
}

/// Renders the dataset into `out_dir` as PNG files plus `manifest.csv`.
pub fn synth_generate(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let frames = synth_render(config)?;
    for site in &config.locations {
        let dir = out_dir.join(&site.name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    frames
        .par_iter()
        .map(|f| f.frame.save_png(out_dir.join(&f.entry.path)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = synth_manifest(config, &frames, out_dir)?;
    manifest.save(out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
