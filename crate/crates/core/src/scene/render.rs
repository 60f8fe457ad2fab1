//! Deterministic flat-shaded software rasterizer.
//!
//! Triangles are transformed to camera space, clipped against the near
//! plane and projected. A pixel is covered when its center lies inside the
//! projected triangle (edge functions, inclusive); its depth is the
//! perspective-correct camera-space `z`. Raycasting evaluates the very same
//! coverage and depth routine for a single pixel, so a raycast hit and a
//! rendered fragment always agree.

use std::collections::BTreeSet;

use super::camera::{cross, dot, normalize, sub};
use super::{CameraPose, MeshId, RenderConfig, SceneError, SceneModel, Viewpoint};
use crate::raster::{DepthMap, RgbImage, NO_HIT};

/// Near plane as a fraction of the bounding-sphere radius.
pub const NEAR_FACTOR: f64 = 0.01;
/// Far plane as a fraction of the bounding-sphere radius.
pub const FAR_FACTOR: f64 = 4.0;
/// Largest normalized depth a covered pixel can take; keeps geometry
/// clamped at the far plane distinguishable from [`NO_HIT`], including
/// after 16-bit quantization.
pub const MAX_HIT_DEPTH: f32 = 65534.0 / 65535.0;

#[derive(Clone, Debug, Default)]
pub struct Renderer {
    config: RenderConfig,
}

impl Renderer {
    pub fn new(config: RenderConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    pub fn pose(&self, v: &Viewpoint, scene: &SceneModel) -> Result<CameraPose, SceneError> {
        super::orbit_to_pose(v, scene, &self.config)
    }

    /// Renders every mesh not in `exclude` over the background color.
    pub fn render_rgb(
        &self,
        scene: &SceneModel,
        pose: &CameraPose,
        exclude: &BTreeSet<MeshId>,
    ) -> Result<RgbImage, SceneError> {
        check_ids(scene, exclude)?;
        let prepared = PreparedScene::new(scene, pose)?;
        let frame = prepared.rasterize(|id| !exclude.contains(&id));
        let mut img = RgbImage::filled(pose.width, pose.height, self.config.background);
        for (i, hit) in frame.ids.iter().enumerate() {
            if let Some(id) = hit {
                let color = scene.meshes()[id.0 as usize].color;
                let row = (i / pose.width as usize) as u32;
                let col = (i % pose.width as usize) as u32;
                img.set(row, col, color);
            }
        }
        Ok(img)
    }

    /// Renders normalized depth, optionally restricted to a subset of meshes.
    pub fn render_depth(
        &self,
        scene: &SceneModel,
        pose: &CameraPose,
        restrict: Option<&BTreeSet<MeshId>>,
    ) -> Result<DepthMap, SceneError> {
        if let Some(ids) = restrict {
            if ids.is_empty() {
                return Err(SceneError::InvalidMesh("restrict set is empty".into()));
            }
            check_ids(scene, ids)?;
        }
        let prepared = PreparedScene::new(scene, pose)?;
        let frame = prepared.rasterize(|id| restrict.is_none_or(|r| r.contains(&id)));
        let data = frame
            .depth
            .iter()
            .map(|&z| if z.is_finite() { prepared.normalize_depth(z) } else { NO_HIT })
            .collect();
        Ok(DepthMap::from_raw(pose.width, pose.height, data).expect("frame matches viewport"))
    }

    /// Mesh hit by the ray through the center of pixel `(row, col)`.
    pub fn raycast(
        &self,
        scene: &SceneModel,
        pose: &CameraPose,
        row: u32,
        col: u32,
    ) -> Result<Option<MeshId>, SceneError> {
        Ok(PreparedScene::new(scene, pose)?.raycast(row, col))
    }
}

fn check_ids(scene: &SceneModel, ids: &BTreeSet<MeshId>) -> Result<(), SceneError> {
    match ids.iter().find(|id| !scene.contains_mesh(**id)) {
        Some(id) => Err(SceneError::UnknownMesh(*id)),
        None => Ok(()),
    }
}

/// Screen-space triangle with per-vertex reciprocal camera depth.
#[derive(Clone, Copy, Debug)]
struct ScreenTriangle {
    mesh: MeshId,
    xy: [[f64; 2]; 3],
    inv_z: [f64; 3],
    area: f64,
    /// Pixel bounding box, inclusive, clamped to the viewport.
    rows: (u32, u32),
    cols: (u32, u32),
}

impl ScreenTriangle {
    fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    }

    /// Camera-space depth at pixel center, or `None` when not covered.
    #[inline]
    fn sample(&self, row: u32, col: u32) -> Option<f64> {
        let p = [col as f64 + 0.5, row as f64 + 0.5];
        let [a, b, c] = self.xy;
        let mut w0 = Self::edge(b, c, p);
        let mut w1 = Self::edge(c, a, p);
        let mut w2 = Self::edge(a, b, p);
        if self.area < 0.0 {
            w0 = -w0;
            w1 = -w1;
            w2 = -w2;
        }
        if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
            return None;
        }
        let area = self.area.abs();
        let inv_z = (w0 * self.inv_z[0] + w1 * self.inv_z[1] + w2 * self.inv_z[2]) / area;
        (inv_z > 0.0).then(|| 1.0 / inv_z)
    }
}

/// A scene projected for one camera pose; cheap to raycast repeatedly.
#[derive(Debug)]
pub struct PreparedScene {
    width: u32,
    height: u32,
    near: f64,
    far: f64,
    triangles: Vec<ScreenTriangle>,
}

struct Frame {
    depth: Vec<f64>,
    ids: Vec<Option<MeshId>>,
}

impl PreparedScene {
    pub fn new(scene: &SceneModel, pose: &CameraPose) -> Result<Self, SceneError> {
        pose.validate()?;
        let radius = scene.bounding_radius();
        if radius.is_nan() || radius <= 0.0 {
            return Err(SceneError::Degenerate);
        }
        let near = NEAR_FACTOR * radius;
        let far = FAR_FACTOR * radius;

        let forward = normalize(sub(pose.target, pose.eye));
        let right = normalize(cross(forward, pose.up));
        let up = cross(right, forward);
        let tan_y = (pose.fov_y * 0.5).tan();
        let tan_x = tan_y * pose.width as f64 / pose.height as f64;
        let (w, h) = (pose.width as f64, pose.height as f64);

        let mut triangles = Vec::new();
        for mesh in scene.meshes() {
            let cam: Vec<[f64; 3]> = mesh
                .positions
                .iter()
                .map(|p| {
                    let d = sub([p[0] as f64, p[1] as f64, p[2] as f64], pose.eye);
                    [dot(d, right), dot(d, up), dot(d, forward)]
                })
                .collect();
            for tri in &mesh.triangles {
                let verts = [cam[tri[0] as usize], cam[tri[1] as usize], cam[tri[2] as usize]];
                let poly = clip_near(&verts, near);
                for i in 1..poly.len().saturating_sub(1) {
                    let corners = [poly[0], poly[i], poly[i + 1]];
                    let project = |v: [f64; 3]| {
                        [
                            (v[0] / v[2] / tan_x + 1.0) * 0.5 * w,
                            (1.0 - v[1] / v[2] / tan_y) * 0.5 * h,
                        ]
                    };
                    let xy = corners.map(project);
                    let area = ScreenTriangle::edge(xy[0], xy[1], xy[2]);
                    if area == 0.0 || !area.is_finite() {
                        continue;
                    }
                    let min_x = xy.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                    let max_x = xy.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                    let min_y = xy.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
                    let max_y = xy.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
                    // Pixel centers sit at +0.5; widen by one pixel to stay
                    // conservative, the exact test happens in `sample`.
                    let Some(cols) = pixel_span(min_x, max_x, pose.width) else { continue };
                    let Some(rows) = pixel_span(min_y, max_y, pose.height) else { continue };
                    triangles.push(ScreenTriangle {
                        mesh: mesh.id(),
                        xy,
                        inv_z: corners.map(|v| 1.0 / v[2]),
                        area,
                        rows,
                        cols,
                    });
                }
            }
        }
        Ok(Self {
            width: pose.width,
            height: pose.height,
            near,
            far,
            triangles,
        })
    }

    fn normalize_depth(&self, z: f64) -> f32 {
        (((z - self.near) / (self.far - self.near)) as f32).clamp(0.0, MAX_HIT_DEPTH)
    }

    /// Nearest mesh through the pixel center; ties go to the lower mesh id.
    pub fn raycast(&self, row: u32, col: u32) -> Option<MeshId> {
        if row >= self.height || col >= self.width {
            return None;
        }
        let mut best: Option<(f64, MeshId)> = None;
        for t in &self.triangles {
            if row < t.rows.0 || row > t.rows.1 || col < t.cols.0 || col > t.cols.1 {
                continue;
            }
            if let Some(z) = t.sample(row, col) {
                let better = match best {
                    None => true,
                    Some((bz, bid)) => z < bz || (z == bz && t.mesh < bid),
                };
                if better {
                    best = Some((z, t.mesh));
                }
            }
        }
        best.map(|(_, id)| id)
    }

    fn rasterize(&self, include: impl Fn(MeshId) -> bool) -> Frame {
        let n = self.width as usize * self.height as usize;
        let mut depth = vec![f64::INFINITY; n];
        let mut ids: Vec<Option<MeshId>> = vec![None; n];
        // Triangles are stored in mesh-id order, so a strict depth test
        // resolves exact ties toward the lower id, as `raycast` does.
        for t in self.triangles.iter().filter(|t| include(t.mesh)) {
            for row in t.rows.0..=t.rows.1 {
                let base = row as usize * self.width as usize;
                for col in t.cols.0..=t.cols.1 {
                    if let Some(z) = t.sample(row, col) {
                        let i = base + col as usize;
                        if z < depth[i] || (z == depth[i] && ids[i].is_some_and(|id| t.mesh < id)) {
                            depth[i] = z;
                            ids[i] = Some(t.mesh);
                        }
                    }
                }
            }
        }
        Frame { depth, ids }
    }
}

fn pixel_span(min: f64, max: f64, size: u32) -> Option<(u32, u32)> {
    let lo = (min - 1.0).floor().max(0.0);
    let hi = (max + 1.0).ceil().min(size as f64 - 1.0);
    if lo > hi {
        return None;
    }
    Some((lo as u32, hi as u32))
}

/// Sutherland-Hodgman against `z >= near`.
fn clip_near(tri: &[[f64; 3]; 3], near: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a[2] >= near;
        let b_in = b[2] >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a[2]) / (b[2] - a[2]);
            out.push([
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                near,
            ]);
        }
    }
    out
}
