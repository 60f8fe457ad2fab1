//! Built-in edge extractor used when no edge-detection service is configured.

use super::{EdgeBackend, Result};
use crate::raster::{MaskImage, RgbImage};

/// Thresholded luma gradient magnitude from central differences with
/// replicated borders: `g = sqrt(gx^2 + gy^2)` where
/// `gx = (L[x+1] - L[x-1]) / 2`.
#[derive(Clone, Copy, Debug)]
pub struct GradientEdges {
    /// Minimum gradient magnitude, on the 0..=255 luma scale.
    pub threshold: f32,
}

impl Default for GradientEdges {
    fn default() -> Self {
        Self { threshold: 64.0 }
    }
}

impl EdgeBackend for GradientEdges {
    fn edges(&self, image: &RgbImage) -> Result<MaskImage> {
        let (w, h) = image.dims();
        let luma = image.luma();
        let at = |r: i64, c: i64| {
            let r = r.clamp(0, h as i64 - 1) as usize;
            let c = c.clamp(0, w as i64 - 1) as usize;
            luma[r * w as usize + c]
        };
        Ok(MaskImage::from_fn(w, h, |row, col| {
            let (r, c) = (row as i64, col as i64);
            let gx = (at(r, c + 1) - at(r, c - 1)) * 0.5;
            let gy = (at(r + 1, c) - at(r - 1, c)) * 0.5;
            (gx * gx + gy * gy).sqrt() >= self.threshold
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_image_has_no_edges() {
        let img = RgbImage::filled(9, 7, [90, 30, 200]);
        assert!(GradientEdges::default().edges(&img).unwrap().is_empty());
    }

    #[test]
    fn step_image_marks_the_two_boundary_columns() {
        // Columns 0..4 black, 4..8 white. By hand: gx = (L[c+1] - L[c-1]) / 2
        // is 127.5 at c = 3 and c = 4 and zero elsewhere; gy is zero.
        let mut img = RgbImage::filled(8, 6, [0, 0, 0]);
        for r in 0..6 {
            for c in 4..8 {
                img.set(r, c, [255, 255, 255]);
            }
        }
        let edges = GradientEdges::default().edges(&img).unwrap();
        let expected = MaskImage::from_fn(8, 6, |_, c| c == 3 || c == 4);
        assert_eq!(edges, expected);
        assert_eq!(edges, GradientEdges::default().edges(&img).unwrap());
    }

    #[test]
    fn weak_step_is_below_threshold() {
        let mut img = RgbImage::filled(6, 2, [100, 100, 100]);
        for c in 3..6 {
            img.set(0, c, [200, 200, 200]);
            img.set(1, c, [200, 200, 200]);
        }
        // Step of 100 luma gives gx = 50 < 64.
        assert!(GradientEdges::default().edges(&img).unwrap().is_empty());
    }
}
