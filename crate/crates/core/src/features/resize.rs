use super::ImageFrame;

/// Single-channel float image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// BT.601 luma scaled to [0, 1].
pub fn grayscale(frame: &ImageFrame) -> GrayImage {
    let data = frame
        .pixels()
        .iter()
        .map(|&[r, g, b]| (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0)
        .collect();
    GrayImage {
        width: frame.width() as usize,
        height: frame.height() as usize,
        data,
    }
}

// Sample positions use pixel-center alignment, which keeps resizing equivariant
// under horizontal and vertical flips.
fn sample_axis(dst: usize, src: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    if img.width == width && img.height == height {
        return img.clone();
    }
    let xs = sample_axis(width, img.width);
    let ys = sample_axis(height, img.height);
    let mut data = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
            let bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    GrayImage { width, height, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage {
            width: 5,
            height: 3,
            data: vec![0.4; 15],
        };
        let r = resize_bilinear(&img, 17, 9);
        assert!(r.data.iter().all(|&v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn flip_equivariant() {
        let data: Vec<f64> = (0..35).map(|i| ((i * 7919) % 31) as f64).collect();
        let img = GrayImage {
            width: 7,
            height: 5,
            data,
        };
        let mut flipped = img.clone();
        flipped.data.reverse();
        let a = resize_bilinear(&img, 12, 11);
        let mut b = resize_bilinear(&flipped, 12, 11);
        b.data.reverse();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn luma_of_white() {
        let f = ImageFrame::filled(2, 2, [255, 255, 255]).unwrap();
        assert!(grayscale(&f).data.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
