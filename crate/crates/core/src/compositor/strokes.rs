//! User strokes: round-brush polylines drawn with the primary button (add)
//! or the secondary button (remove).

use serde::{Deserialize, Serialize};

use crate::adapters::PixelBox;
use crate::raster::{ensure_same_dims, DepthMap, MaskImage, RasterError, NO_HIT};

use super::mask::{mask_subtract, mask_union};
use super::CompositorError;

/// Polyline in pixel coordinates; each point is `[x, y]` = `[col, row]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub points: Vec<[f64; 2]>,
    /// Brush radius in pixels.
    pub radius: f64,
}

impl Stroke {
    pub fn new(points: Vec<[f64; 2]>, radius: f64) -> Self {
        Self { points, radius }
    }

    fn validate(&self, width: u32, height: u32) -> Result<(), CompositorError> {
        if self.points.is_empty() {
            return Err(CompositorError::InvalidStroke("stroke has no points".into()));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(CompositorError::InvalidStroke(format!("bad radius {}", self.radius)));
        }
        for &[x, y] in &self.points {
            if !(x >= 0.0 && x < width as f64 && y >= 0.0 && y < height as f64) {
                return Err(CompositorError::InvalidStroke(format!(
                    "point ({x}, {y}) outside {width}x{height} viewport"
                )));
            }
        }
        Ok(())
    }

    fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let first = self.points[0];
        std::iter::once((first, first))
            .chain(self.points.windows(2).map(|w| (w[0], w[1])))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrokeSet {
    pub add_strokes: Vec<Stroke>,
    pub remove_strokes: Vec<Stroke>,
}

impl StrokeSet {
    pub fn is_empty(&self) -> bool {
        self.add_strokes.is_empty() && self.remove_strokes.is_empty()
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), CompositorError> {
        self.add_strokes
            .iter()
            .chain(&self.remove_strokes)
            .try_for_each(|s| s.validate(width, height))
    }

    /// Tight box over the add strokes dilated by their brush radius, clipped
    /// to the viewport.
    pub fn add_bounding_box(&self, width: u32, height: u32) -> Option<PixelBox> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for s in &self.add_strokes {
            for p in &s.points {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k] - s.radius);
                    hi[k] = hi[k].max(p[k] + s.radius);
                }
            }
        }
        if !lo[0].is_finite() {
            return None;
        }
        let rect = PixelBox {
            left: lo[0].floor().max(0.0) as u32,
            top: lo[1].floor().max(0.0) as u32,
            right: ((hi[0].floor() + 1.0) as u32).min(width),
            bottom: ((hi[1].floor() + 1.0) as u32).min(height),
        };
        (rect.area() > 0).then_some(rect)
    }
}

fn dist2_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0] * d[0] + d[1] * d[1]
}

/// Sets every pixel whose integer coordinate lies within `radius` of a
/// stroke segment.
pub fn rasterize_strokes(strokes: &[Stroke], width: u32, height: u32) -> MaskImage {
    let mut mask = MaskImage::empty(width, height);
    for s in strokes {
        let r2 = s.radius * s.radius;
        for (a, b) in s.segments() {
            let x0 = (a[0].min(b[0]) - s.radius).floor().max(0.0) as u32;
            let x1 = ((a[0].max(b[0]) + s.radius).ceil().max(0.0) as u32).min(width - 1);
            let y0 = (a[1].min(b[1]) - s.radius).floor().max(0.0) as u32;
            let y1 = ((a[1].max(b[1]) + s.radius).ceil().max(0.0) as u32).min(height - 1);
            for row in y0..=y1 {
                for col in x0..=x1 {
                    if dist2_to_segment([col as f64, row as f64], a, b) <= r2 {
                        mask.set(row, col, true);
                    }
                }
            }
        }
    }
    mask
}

/// Merges strokes into automatically extracted edges. Add strokes are
/// OR-ed in; remove strokes erase. Returns the scribble condition and the
/// erased region.
pub fn aggregate_scribbles(
    auto_edges: &MaskImage,
    strokes: &StrokeSet,
) -> Result<(MaskImage, MaskImage), CompositorError> {
    let (w, h) = auto_edges.dims();
    strokes.validate(w, h)?;
    let added = rasterize_strokes(&strokes.add_strokes, w, h);
    let cleared = rasterize_strokes(&strokes.remove_strokes, w, h);
    let scribble = mask_subtract(&mask_union(auto_edges, &added)?, &cleared)?;
    Ok((scribble, cleared))
}

/// Resets depth under `cleared` to the no-hit sentinel.
pub fn clear_depth_region(depth: &DepthMap, cleared: &MaskImage) -> Result<DepthMap, RasterError> {
    ensure_same_dims(depth.dims(), cleared.dims())?;
    let data = depth
        .as_raw()
        .iter()
        .zip(cleared.as_raw())
        .map(|(&d, &c)| if c { NO_HIT } else { d })
        .collect();
    DepthMap::from_raw(depth.width(), depth.height(), data)
}
