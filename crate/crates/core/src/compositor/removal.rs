//! Removal of scene meshes that a generated object is meant to replace.
//!
//! A mesh is dropped from the initial render when most of its visible
//! footprint lies inside the segmentation mask; otherwise it would peek out
//! around the composed object.

use std::collections::BTreeSet;

use crate::raster::{ensure_same_dims, MaskImage, RgbImage};
use crate::scene::{CameraPose, MeshId, PreparedScene, Renderer, SceneModel, Viewpoint};

use super::CompositorError;

/// Fraction of the mesh's solo footprint covered by `seg`, or `None` when
/// the mesh covers no pixel from this pose.
pub fn footprint_ratio(
    renderer: &Renderer,
    scene: &SceneModel,
    pose: &CameraPose,
    mesh: MeshId,
    seg: &MaskImage,
) -> Result<Option<f64>, CompositorError> {
    let solo = renderer.render_depth(scene, pose, Some(&BTreeSet::from([mesh])))?;
    ensure_same_dims(solo.dims(), seg.dims())?;
    let footprint = solo.coverage();
    let total = footprint.count();
    if total == 0 {
        return Ok(None);
    }
    let inside = footprint
        .as_raw()
        .iter()
        .zip(seg.as_raw())
        .filter(|(&f, &s)| f && s)
        .count();
    Ok(Some(inside as f64 / total as f64))
}

fn check_params(r_th: f64, stride: u32) -> Result<(), CompositorError> {
    if !(r_th > 0.0 && r_th <= 1.0) {
        return Err(CompositorError::InvalidParameter(format!("r_th {r_th} outside (0, 1]")));
    }
    if stride == 0 {
        return Err(CompositorError::InvalidParameter("sample stride must be at least 1".into()));
    }
    Ok(())
}

/// Meshes to hide from the initial render: every mesh hit by a sampled ray
/// through `seg` whose footprint overlap ratio exceeds `r_th`.
pub fn select_mesh_primitives(
    renderer: &Renderer,
    scene: &SceneModel,
    seg: &MaskImage,
    v: &Viewpoint,
    r_th: f64,
    stride: u32,
) -> Result<BTreeSet<MeshId>, CompositorError> {
    check_params(r_th, stride)?;
    let cfg = renderer.config();
    ensure_same_dims((cfg.width, cfg.height), seg.dims())?;
    let Some((top, left, bottom, right)) = seg.bounding_box() else {
        return Ok(BTreeSet::new());
    };
    let pose = renderer.pose(v, scene)?;
    let prepared = PreparedScene::new(scene, &pose)?;
    let mut candidates = BTreeSet::new();
    for row in (top..=bottom).step_by(stride as usize) {
        for col in (left..=right).step_by(stride as usize) {
            if seg.get(row, col) {
                candidates.extend(prepared.raycast(row, col));
            }
        }
    }
    let mut kept = BTreeSet::new();
    for id in candidates {
        let ratio = footprint_ratio(renderer, scene, &pose, id, seg)?;
        tracing::debug!(mesh = %id, ?ratio, "removal candidate");
        if ratio.is_some_and(|r| r > r_th) {
            kept.insert(id);
        }
    }
    Ok(kept)
}

/// Initial render with the selected meshes removed, plus that set.
pub fn get_initial_image(
    renderer: &Renderer,
    scene: &SceneModel,
    seg: &MaskImage,
    v: &Viewpoint,
    r_th: f64,
    stride: u32,
) -> Result<(RgbImage, BTreeSet<MeshId>), CompositorError> {
    let removed = select_mesh_primitives(renderer, scene, seg, v, r_th, stride)?;
    let pose = renderer.pose(v, scene)?;
    let image = renderer.render_rgb(scene, &pose, &removed)?;
    Ok((image, removed))
}
