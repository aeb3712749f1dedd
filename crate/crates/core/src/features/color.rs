use super::{ColorSpace, DescriptorConfig, FeatureVector, ImageFrame};

/// HSV with H in [0, 360), S and V in [0, 1].
pub fn rgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    hsv_from_unit(rgb.map(|c| c as f64 / 255.0))
}

fn hsv_from_unit([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [if h >= 360.0 { h - 360.0 } else { h }, s, max]
}

/// Full-range BT.601 YCbCr, each component clamped to [0, 255].
pub fn rgb_to_ycbcr(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(f64::from);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    [y, cb, cr].map(|v| v.clamp(0.0, 255.0))
}

// D65 reference white
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIE L*a*b* from sRGB via linear RGB and XYZ (D65). L in [0, 100].
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn convert_pixel(rgb: [u8; 3], space: ColorSpace) -> [f64; 3] {
    match space {
        ColorSpace::Rgb => rgb.map(f64::from),
        ColorSpace::Hsv => rgb_to_hsv(rgb),
        ColorSpace::Lab => rgb_to_lab(rgb),
        ColorSpace::Ycbcr => rgb_to_ycbcr(rgb),
    }
}

/// Per-pixel triples of `frame` in the target color space, row-major.
pub fn convert_colorspace(frame: &ImageFrame, space: ColorSpace) -> Vec<[f64; 3]> {
    frame.pixels().iter().map(|&p| convert_pixel(p, space)).collect()
}

/// Histogram range `[lo, hi)` of each channel.
fn channel_ranges(space: ColorSpace) -> [(f64, f64); 3] {
    match space {
        ColorSpace::Rgb | ColorSpace::Ycbcr => [(0.0, 256.0); 3],
        ColorSpace::Hsv => [(0.0, 360.0), (0.0, 1.0), (0.0, 1.0)],
        ColorSpace::Lab => [(0.0, 100.0), (-128.0, 128.0), (-128.0, 128.0)],
    }
}

fn bin_of(v: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    let t = ((v - lo) / (hi - lo) * bins as f64).floor();
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

/// Three concatenated per-channel histograms, each normalized to sum 1.
pub fn color_histogram(frame: &ImageFrame, space: ColorSpace, config: &DescriptorConfig) -> FeatureVector {
    let bins = config.bins_per_channel;
    let ranges = channel_ranges(space);
    let mut counts = vec![0u64; 3 * bins];
    for &p in frame.pixels() {
        let v = convert_pixel(p, space);
        for c in 0..3 {
            counts[c * bins + bin_of(v[c], ranges[c], bins)] += 1;
        }
    }
    let n = frame.pixels().len() as f64;
    FeatureVector::new(
        space.descriptor_id(),
        counts.into_iter().map(|c| c as f64 / n).collect(),
    )
}
