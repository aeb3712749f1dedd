//! Global frame descriptors: color histograms in four color spaces, GIST and HOG.
//!
//! Every descriptor is a pure function of the frame and a [`DescriptorConfig`]; the
//! output dimension depends only on the config, never on the frame resolution.

mod color;
mod gist;
mod hog;
mod resize;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::FeatureMatrix;

pub use color::{color_histogram, convert_colorspace, rgb_to_hsv, rgb_to_lab, rgb_to_ycbcr};
pub use gist::{gist_descriptor, GistExtractor};
pub use hog::hog_descriptor;
pub use resize::{grayscale, resize_bilinear, GrayImage};

/// Decoded 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageFrame {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl ImageFrame {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "frame must be at least 1x1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    /// Frame filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    /// The frame rotated by 180 degrees.
    pub fn rotated_180(&self) -> Self {
        let mut pixels = self.pixels.clone();
        pixels.reverse();
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Decodes a PNG or JPEG file into an 8-bit RGB frame.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_rgb8();
        let (width, height) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::new(width, height, pixels)
    }

    /// Writes the frame as PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let raw: Vec<u8> = self.pixels.iter().flat_map(|p| p.iter().copied()).collect();
        let buf =
            image::RgbImage::from_raw(self.width, self.height, raw).expect("pixel buffer length matches dimensions");
        buf.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Which descriptor produced a [`FeatureVector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DescriptorId {
    #[serde(rename = "RGB_HIST")]
    RgbHist,
    #[serde(rename = "HSV_HIST")]
    HsvHist,
    #[serde(rename = "LAB_HIST")]
    LabHist,
    #[serde(rename = "YCBCR_HIST")]
    YcbcrHist,
    Gist,
    Hog,
    Concat,
    Crafted,
}

impl DescriptorId {
    /// The global-feature families in concatenation order.
    pub const FAMILIES: [DescriptorId; 5] = [
        DescriptorId::RgbHist,
        DescriptorId::HsvHist,
        DescriptorId::LabHist,
        DescriptorId::YcbcrHist,
        DescriptorId::Gist,
    ];

    pub fn is_color(self) -> bool {
        matches!(
            self,
            DescriptorId::RgbHist | DescriptorId::HsvHist | DescriptorId::LabHist | DescriptorId::YcbcrHist
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorId::RgbHist => "RGB_HIST",
            DescriptorId::HsvHist => "HSV_HIST",
            DescriptorId::LabHist => "LAB_HIST",
            DescriptorId::YcbcrHist => "YCBCR_HIST",
            DescriptorId::Gist => "GIST",
            DescriptorId::Hog => "HOG",
            DescriptorId::Concat => "CONCAT",
            DescriptorId::Crafted => "CRAFTED",
        }
    }

    fn concat_rank(self) -> usize {
        match self {
            DescriptorId::RgbHist => 0,
            DescriptorId::HsvHist => 1,
            DescriptorId::LabHist => 2,
            DescriptorId::YcbcrHist => 3,
            DescriptorId::Gist => 4,
            DescriptorId::Hog => 5,
            DescriptorId::Crafted => 6,
            DescriptorId::Concat => 7,
        }
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Color spaces supported by [`convert_colorspace`] and [`color_histogram`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    Hsv,
    Lab,
    Ycbcr,
}

impl ColorSpace {
    pub fn descriptor_id(self) -> DescriptorId {
        match self {
            ColorSpace::Rgb => DescriptorId::RgbHist,
            ColorSpace::Hsv => DescriptorId::HsvHist,
            ColorSpace::Lab => DescriptorId::LabHist,
            ColorSpace::Ycbcr => DescriptorId::YcbcrHist,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub descriptor: DescriptorId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(descriptor: DescriptorId, values: Vec<f64>) -> Self {
        Self { descriptor, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorConfig {
    pub bins_per_channel: usize,
    pub gist_scales: usize,
    pub gist_orientations: usize,
    pub gist_grid: usize,
    /// (width, height)
    pub gist_resize: (usize, usize),
    /// (width, height)
    pub hog_resize: (usize, usize),
    pub hog_cell: usize,
    pub hog_bins: usize,
    /// Block size in cells, (width, height).
    pub hog_block: (usize, usize),
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            bins_per_channel: 32,
            gist_scales: 4,
            gist_orientations: 8,
            gist_grid: 4,
            gist_resize: (128, 128),
            hog_resize: (128, 72),
            hog_cell: 8,
            hog_bins: 9,
            hog_block: (2, 2),
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gist_scales", self.gist_scales),
            ("gist_orientations", self.gist_orientations),
            ("gist_grid", self.gist_grid),
            ("gist_resize.w", self.gist_resize.0),
            ("gist_resize.h", self.gist_resize.1),
            ("hog_resize.w", self.hog_resize.0),
            ("hog_resize.h", self.hog_resize.1),
            ("hog_cell", self.hog_cell),
            ("hog_bins", self.hog_bins),
            ("hog_block.w", self.hog_block.0),
            ("hog_block.h", self.hog_block.1),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.bins_per_channel < 2 {
            return Err(Error::Config("bins_per_channel must be >= 2".into()));
        }
        if self.gist_grid > self.gist_resize.0 || self.gist_grid > self.gist_resize.1 {
            return Err(Error::Config("gist_grid exceeds the resized frame".into()));
        }
        let (cw, ch) = self.hog_cells();
        if cw < self.hog_block.0 || ch < self.hog_block.1 {
            return Err(Error::Config("hog block larger than the cell grid".into()));
        }
        Ok(())
    }

    pub fn histogram_dim(&self) -> usize {
        3 * self.bins_per_channel
    }

    pub fn gist_dim(&self) -> usize {
        self.gist_scales * self.gist_orientations * self.gist_grid * self.gist_grid
    }

    /// Number of HOG cells along (x, y).
    pub fn hog_cells(&self) -> (usize, usize) {
        (self.hog_resize.0 / self.hog_cell, self.hog_resize.1 / self.hog_cell)
    }

    pub fn hog_dim(&self) -> usize {
        let (cw, ch) = self.hog_cells();
        let (bw, bh) = self.hog_block;
        (cw + 1 - bw) * (ch + 1 - bh) * bw * bh * self.hog_bins
    }

    pub fn dim_of(&self, id: DescriptorId) -> Option<usize> {
        match id {
            DescriptorId::RgbHist | DescriptorId::HsvHist | DescriptorId::LabHist | DescriptorId::YcbcrHist => {
                Some(self.histogram_dim())
            }
            DescriptorId::Gist => Some(self.gist_dim()),
            DescriptorId::Hog => Some(self.hog_dim()),
            DescriptorId::Concat => Some(
                DescriptorId::FAMILIES
                    .iter()
                    .map(|&f| self.dim_of(f).unwrap_or(0))
                    .sum(),
            ),
            DescriptorId::Crafted => None,
        }
    }
}

/// Maps every component of a concatenated vector back to its source descriptor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// (source descriptor, block length) in concatenation order.
    pub segments: Vec<(DescriptorId, usize)>,
}

impl Provenance {
    pub fn dim(&self) -> usize {
        self.segments.iter().map(|s| s.1).sum()
    }

    /// Source descriptor and index within it for concatenated component `index`.
    pub fn lookup(&self, index: usize) -> Option<(DescriptorId, usize)> {
        let mut offset = 0;
        for &(id, len) in &self.segments {
            if index < offset + len {
                return Some((id, index - offset));
            }
            offset += len;
        }
        None
    }

    /// Provenance of a single uncombined descriptor.
    pub fn single(id: DescriptorId, dim: usize) -> Self {
        Self {
            segments: vec![(id, dim)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcatFeature {
    pub vector: FeatureVector,
    pub provenance: Provenance,
}

/// Concatenates descriptors in the fixed family order RGB, HSV, LAB, YCbCr, GIST (then HOG).
pub fn concat_features(parts: &[FeatureVector]) -> Result<ConcatFeature> {
    if parts.is_empty() {
        return Err(Error::Config("concat_features needs at least one descriptor".into()));
    }
    let mut order: Vec<&FeatureVector> = parts.iter().collect();
    order.sort_by_key(|p| p.descriptor.concat_rank());
    let mut values = Vec::with_capacity(order.iter().map(|p| p.dim()).sum());
    let mut segments = Vec::with_capacity(order.len());
    for part in order {
        values.extend_from_slice(&part.values);
        segments.push((part.descriptor, part.dim()));
    }
    Ok(ConcatFeature {
        vector: FeatureVector::new(DescriptorId::Concat, values),
        provenance: Provenance { segments },
    })
}

/// Descriptor selector used by batch extraction and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Rgb,
    Hsv,
    Lab,
    Ycbcr,
    Gist,
    Hog,
    Concat,
}

impl FeatureKind {
    pub fn descriptor_id(self) -> DescriptorId {
        match self {
            FeatureKind::Rgb => DescriptorId::RgbHist,
            FeatureKind::Hsv => DescriptorId::HsvHist,
            FeatureKind::Lab => DescriptorId::LabHist,
            FeatureKind::Ycbcr => DescriptorId::YcbcrHist,
            FeatureKind::Gist => DescriptorId::Gist,
            FeatureKind::Hog => DescriptorId::Hog,
            FeatureKind::Concat => DescriptorId::Concat,
        }
    }

    pub fn from_descriptor(id: DescriptorId) -> Option<Self> {
        Some(match id {
            DescriptorId::RgbHist => FeatureKind::Rgb,
            DescriptorId::HsvHist => FeatureKind::Hsv,
            DescriptorId::LabHist => FeatureKind::Lab,
            DescriptorId::YcbcrHist => FeatureKind::Ycbcr,
            DescriptorId::Gist => FeatureKind::Gist,
            DescriptorId::Hog => FeatureKind::Hog,
            DescriptorId::Concat => FeatureKind::Concat,
            DescriptorId::Crafted => return None,
        })
    }

    fn color_space(self) -> Option<ColorSpace> {
        match self {
            FeatureKind::Rgb => Some(ColorSpace::Rgb),
            FeatureKind::Hsv => Some(ColorSpace::Hsv),
            FeatureKind::Lab => Some(ColorSpace::Lab),
            FeatureKind::Ycbcr => Some(ColorSpace::Ycbcr),
            _ => None,
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rgb" => FeatureKind::Rgb,
            "hsv" => FeatureKind::Hsv,
            "lab" => FeatureKind::Lab,
            "ycbcr" => FeatureKind::Ycbcr,
            "gist" => FeatureKind::Gist,
            "hog" => FeatureKind::Hog,
            "concat" => FeatureKind::Concat,
            other => return Err(Error::Config(format!("unknown feature kind '{other}'"))),
        })
    }
}

/// Reusable extractor for one descriptor kind; holds the GIST filter bank.
pub struct Extractor {
    kind: FeatureKind,
    config: DescriptorConfig,
    gist: Option<GistExtractor>,
}

impl Extractor {
    pub fn new(kind: FeatureKind, config: DescriptorConfig) -> Result<Self> {
        config.validate()?;
        let gist = matches!(kind, FeatureKind::Gist | FeatureKind::Concat).then(|| GistExtractor::new(&config));
        Ok(Self { kind, config, gist })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config
            .dim_of(self.kind.descriptor_id())
            .expect("every FeatureKind has a fixed dimension")
    }

    /// Component provenance for this extractor's output.
    pub fn provenance(&self) -> Provenance {
        match self.kind {
            FeatureKind::Concat => Provenance {
                segments: DescriptorId::FAMILIES
                    .iter()
                    .map(|&f| (f, self.config.dim_of(f).unwrap_or(0)))
                    .collect(),
            },
            k => Provenance::single(k.descriptor_id(), self.dim()),
        }
    }

    pub fn extract(&self, frame: &ImageFrame) -> FeatureVector {
        if let Some(space) = self.kind.color_space() {
            return color_histogram(frame, space, &self.config);
        }
        match self.kind {
            FeatureKind::Gist => self.gist.as_ref().expect("gist bank").extract(frame),
            FeatureKind::Hog => hog_descriptor(frame, &self.config),
            FeatureKind::Concat => {
                let mut parts: Vec<FeatureVector> =
                    [ColorSpace::Rgb, ColorSpace::Hsv, ColorSpace::Lab, ColorSpace::Ycbcr]
                        .iter()
                        .map(|&s| color_histogram(frame, s, &self.config))
                        .collect();
                parts.push(self.gist.as_ref().expect("gist bank").extract(frame));
                concat_features(&parts).expect("non-empty parts").vector
            }
            _ => unreachable!("color kinds handled above"),
        }
    }

    /// Extracts every frame; output order equals input order.
    pub fn extract_batch(&self, frames: &[ImageFrame]) -> Vec<FeatureVector> {
        frames.par_iter().map(|f| self.extract(f)).collect()
    }

    /// Extracts every frame into the rows of a matrix, in input order.
    pub fn extract_matrix(&self, frames: &[ImageFrame]) -> Result<FeatureMatrix> {
        let data: Vec<f64> = self.extract_batch(frames).into_iter().flat_map(|v| v.values).collect();
        let ids = (0..frames.len()).map(|i| i.to_string()).collect();
        FeatureMatrix::from_flat(frames.len(), self.dim(), data, ids)
    }
}
