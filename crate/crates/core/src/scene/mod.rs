//! Scene geometry, the orbit camera, and offscreen rendering.

mod camera;
mod glb;
mod load;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use camera::{orbit_to_pose, CameraPose, RenderConfig, Viewpoint};
pub use glb::write_glb;
pub use load::{load_scene, load_scene_from_slice};
pub use render::{PreparedScene, Renderer};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: unreadable: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("{path}: unsupported geometry: {reason}")]
    Unsupported { path: String, reason: String },
    #[error("{path}: empty geometry")]
    EmptyGeometry { path: String },
    #[error("degenerate scene: bounding sphere radius is zero")]
    Degenerate,
    #[error("unknown mesh id {0}")]
    UnknownMesh(MeshId),
    #[error("invalid viewpoint: {0}")]
    InvalidViewpoint(String),
    #[error("invalid camera pose: {0}")]
    InvalidPose(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

/// Stable identifier of a mesh within a loaded scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeshId(pub u32);

impl fmt::Display for MeshId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A triangle mesh with a flat base color, positions in scene units.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    id: MeshId,
    pub name: Option<String>,
    pub positions: Vec<[f32; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub color: [u8; 3],
}

impl Mesh {
    /// Creates an unattached mesh; the id is assigned by [`SceneModel::new`].
    pub fn new(positions: Vec<[f32; 3]>, triangles: Vec<[u32; 3]>, color: [u8; 3]) -> Self {
        Self {
            id: MeshId(0),
            name: None,
            positions,
            triangles,
            color,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Axis-aligned box centered at `center` with the given half extents.
    pub fn cuboid(center: [f32; 3], half: [f32; 3], color: [u8; 3]) -> Self {
        let [cx, cy, cz] = center;
        let [hx, hy, hz] = half;
        let mut positions = Vec::with_capacity(8);
        for i in 0..8u32 {
            positions.push([
                cx + if i & 1 == 0 { -hx } else { hx },
                cy + if i & 2 == 0 { -hy } else { hy },
                cz + if i & 4 == 0 { -hz } else { hz },
            ]);
        }
        // Faces wound counter-clockwise seen from outside.
        let triangles = vec![
            [0, 2, 3], [0, 3, 1], // -z
            [4, 5, 7], [4, 7, 6], // +z
            [0, 4, 6], [0, 6, 2], // -x
            [1, 3, 7], [1, 7, 5], // +x
            [0, 1, 5], [0, 5, 4], // -y
            [2, 6, 7], [2, 7, 3], // +y
        ];
        Self::new(positions, triangles, color)
    }

    /// Rectangle in the plane `z = center.z` facing +z.
    pub fn quad_xy(center: [f32; 3], half_w: f32, half_h: f32, color: [u8; 3]) -> Self {
        let [cx, cy, cz] = center;
        let positions = vec![
            [cx - half_w, cy - half_h, cz],
            [cx + half_w, cy - half_h, cz],
            [cx + half_w, cy + half_h, cz],
            [cx - half_w, cy + half_h, cz],
        ];
        Self::new(positions, vec![[0, 1, 2], [0, 2, 3]], color)
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    fn validate(&self) -> Result<(), SceneError> {
        if self.triangles.is_empty() {
            return Err(SceneError::InvalidMesh(format!("mesh {} has no triangles", self.id)));
        }
        if self.positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SceneError::InvalidMesh(format!(
                "mesh {} has non-finite positions",
                self.id
            )));
        }
        let n = self.positions.len() as u32;
        if self.triangles.iter().flatten().any(|&i| i >= n) {
            return Err(SceneError::InvalidMesh(format!(
                "mesh {} has out-of-range indices",
                self.id
            )));
        }
        Ok(())
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    /// Radius of the sphere centered on the box that encloses it.
    pub fn bounding_radius(&self) -> f64 {
        let [x, y, z] = self.extent();
        0.5 * (x * x + y * y + z * z).sqrt()
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }
}

/// Immutable set of triangle meshes with ids `0..n` in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneModel {
    meshes: Vec<Mesh>,
    bounds: Aabb,
    fingerprint: [u8; 32],
}

impl SceneModel {
    pub fn new(meshes: Vec<Mesh>) -> Result<Self, SceneError> {
        if meshes.is_empty() {
            return Err(SceneError::EmptyGeometry {
                path: "<memory>".into(),
            });
        }
        let meshes: Vec<Mesh> = meshes
            .into_iter()
            .enumerate()
            .map(|(i, mut m)| {
                m.id = MeshId(i as u32);
                m
            })
            .collect();
        for m in &meshes {
            m.validate()?;
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in meshes.iter().flat_map(|m| &m.positions) {
            for i in 0..3 {
                min[i] = min[i].min(p[i] as f64);
                max[i] = max[i].max(p[i] as f64);
            }
        }
        let fingerprint = fingerprint(&meshes);
        Ok(Self {
            meshes,
            bounds: Aabb { min, max },
            fingerprint,
        })
    }

    pub fn meshes(&self) -> &[Mesh] {
        &self.meshes
    }

    pub fn mesh(&self, id: MeshId) -> Option<&Mesh> {
        self.meshes.get(id.0 as usize)
    }

    pub fn mesh_ids(&self) -> impl Iterator<Item = MeshId> + '_ {
        self.meshes.iter().map(|m| m.id)
    }

    pub fn contains_mesh(&self, id: MeshId) -> bool {
        (id.0 as usize) < self.meshes.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounds.bounding_radius()
    }

    /// SHA-256 over the canonical geometry encoding.
    pub fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    pub fn fingerprint_hex(&self) -> String {
        hex_string(&self.fingerprint)
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn fingerprint(meshes: &[Mesh]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"memovis-scene-v1");
    h.update((meshes.len() as u64).to_le_bytes());
    for m in meshes {
        h.update((m.positions.len() as u64).to_le_bytes());
        for p in &m.positions {
            for c in p {
                h.update(c.to_le_bytes());
            }
        }
        h.update((m.triangles.len() as u64).to_le_bytes());
        for t in &m.triangles {
            for i in t {
                h.update(i.to_le_bytes());
            }
        }
        h.update(m.color);
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_insertion_order() {
        let scene = SceneModel::new(vec![
            Mesh::cuboid([0.0; 3], [0.5; 3], [255, 0, 0]),
            Mesh::cuboid([2.0, 0.0, 0.0], [0.5; 3], [0, 255, 0]),
        ])
        .unwrap();
        let ids: Vec<_> = scene.mesh_ids().collect();
        assert_eq!(ids, vec![MeshId(0), MeshId(1)]);
    }

    #[test]
    fn bounds_contain_every_vertex() {
        let scene = SceneModel::new(vec![
            Mesh::cuboid([0.0; 3], [0.5; 3], [1, 2, 3]),
            Mesh::cuboid([3.0, -1.0, 2.0], [0.25, 1.0, 0.5], [1, 2, 3]),
        ])
        .unwrap();
        let b = scene.bounds();
        for p in scene.meshes().iter().flat_map(|m| &m.positions) {
            assert!(b.contains([p[0] as f64, p[1] as f64, p[2] as f64]));
        }
        assert_eq!(b.min, [-0.5, -2.0, -0.5]);
        assert_eq!(b.max, [3.25, 0.5, 2.5]);
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let bad = Mesh::new(vec![[0.0; 3]; 2], vec![[0, 1, 2]], [0; 3]);
        assert!(matches!(SceneModel::new(vec![bad]), Err(SceneError::InvalidMesh(_))));
    }

    #[test]
    fn fingerprint_tracks_geometry() {
        let a = SceneModel::new(vec![Mesh::cuboid([0.0; 3], [0.5; 3], [9, 9, 9])]).unwrap();
        let b = SceneModel::new(vec![Mesh::cuboid([0.0; 3], [0.5; 3], [9, 9, 9])]).unwrap();
        let c = SceneModel::new(vec![Mesh::cuboid([0.1, 0.0, 0.0], [0.5; 3], [9, 9, 9])]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
