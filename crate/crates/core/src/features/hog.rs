use super::resize::{grayscale, resize_bilinear, GrayImage};
use super::{DescriptorConfig, DescriptorId, FeatureVector, ImageFrame};

const BLOCK_EPSILON: f64 = 1e-3;

/// Unsigned-orientation cell histograms, linearly interpolated between the two
/// nearest bin centers. Returns (cells_x, cells_y, histograms) with histograms
/// stored cell-major.
fn cell_histograms(img: &GrayImage, cell: usize, bins: usize) -> (usize, usize, Vec<f64>) {
    let (w, h) = (img.width, img.height);
    let (cx, cy) = (w / cell, h / cell);
    let mut hist = vec![0.0; cx * cy * bins];
    let bin_width = 180.0 / bins as f64;
    for y in 0..cy * cell {
        for x in 0..cx * cell {
            let gx = img.at((x + 1).min(w - 1), y) - img.at(x.saturating_sub(1), y);
            let gy = img.at(x, (y + 1).min(h - 1)) - img.at(x, y.saturating_sub(1));
            let magnitude = (gx * gx + gy * gy).sqrt();
            // bilinear resampling of a flat region leaves ulp-level ripples
            if magnitude < 1e-9 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = angle / bin_width - 0.5;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = (lower as isize).rem_euclid(bins as isize) as usize;
            let b1 = (b0 + 1) % bins;
            let base = ((y / cell) * cx + x / cell) * bins;
            hist[base + b0] += magnitude * (1.0 - frac);
            hist[base + b1] += magnitude * frac;
        }
    }
    (cx, cy, hist)
}

/// Whole-frame HOG with L2-normalized overlapping blocks (stride one cell).
pub fn hog_descriptor(frame: &ImageFrame, config: &DescriptorConfig) -> FeatureVector {
    let (rw, rh) = config.hog_resize;
    let img = resize_bilinear(&grayscale(frame), rw, rh);
    let bins = config.hog_bins;
    let (cx, cy, hist) = cell_histograms(&img, config.hog_cell, bins);
    let (bw, bh) = config.hog_block;
    let mut values = Vec::with_capacity(config.hog_dim());
    let mut block = Vec::with_capacity(bw * bh * bins);
    for by in 0..=(cy - bh) {
        for bx in 0..=(cx - bw) {
            block.clear();
            for y in by..by + bh {
                for x in bx..bx + bw {
                    let base = (y * cx + x) * bins;
                    block.extend_from_slice(&hist[base..base + bins]);
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + BLOCK_EPSILON * BLOCK_EPSILON).sqrt();
            values.extend(block.iter().map(|v| v / norm));
        }
    }
    FeatureVector::new(DescriptorId::Hog, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_frame_is_zero() {
        let cfg = DescriptorConfig::default();
        let v = hog_descriptor(&ImageFrame::filled(30, 20, [90, 10, 200]).unwrap(), &cfg);
        assert_eq!(v.dim(), cfg.hog_dim());
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn horizontal_edge_votes_vertical_gradient() {
        let cfg = DescriptorConfig::default();
        // dark top half, bright bottom half: gradient points along +y (90 degrees)
        let frame = ImageFrame::from_fn(128, 72, |_, y| if y < 36 { [20; 3] } else { [230; 3] }).unwrap();
        let img = resize_bilinear(&grayscale(&frame), 128, 72);
        let (cx, _, hist) = cell_histograms(&img, cfg.hog_cell, cfg.hog_bins);
        let expected_bin = (90.0 / (180.0 / cfg.hog_bins as f64)) as usize;
        // cell row 4 spans y = 32..40 and contains the edge at y = 36
        let row = 4;
        for x in 0..cx {
            let base = (row * cx + x) * cfg.hog_bins;
            let cell = &hist[base..base + cfg.hog_bins];
            let argmax = (0..cfg.hog_bins).max_by(|&a, &b| cell[a].total_cmp(&cell[b])).unwrap();
            assert_eq!(argmax, expected_bin);
        }
        let v = hog_descriptor(&frame, &cfg);
        assert!(v.values.iter().any(|&x| x > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn blocks_have_bounded_norm(seed in any::<u64>(), w in 4u32..40, h in 4u32..40) {
            let cfg = DescriptorConfig { hog_resize: (32, 24), ..Default::default() };
            let mut s = seed;
            let frame = ImageFrame::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = (s >> 33) as u8;
                [b, b.wrapping_mul(3), b / 2]
            }).unwrap();
            let v = hog_descriptor(&frame, &cfg);
            prop_assert_eq!(v.dim(), cfg.hog_dim());
            let block_len = cfg.hog_block.0 * cfg.hog_block.1 * cfg.hog_bins;
            for block in v.values.chunks(block_len) {
                prop_assert!(block.iter().all(|&x| x >= 0.0));
                prop_assert!(block.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-9);
            }
        }
    }
}
