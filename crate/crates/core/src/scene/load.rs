//! glTF 2.0 import (`.gltf` with external or embedded buffers, `.glb`).
//!
//! Every node of the default scene that references a mesh becomes one
//! [`Mesh`](super::Mesh), visited depth-first in document order, with world
//! transforms baked into the positions. Documents without scenes fall back
//! to the mesh array with identity transforms.

use std::path::Path;

use gltf::mesh::Mode;

use super::{Mesh, SceneError, SceneModel};

type Mat4 = [[f32; 4]; 4];

const IDENTITY: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Loads a scene from disk; errors carry the offending path.
pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneModel, SceneError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| SceneError::Unreadable {
        path: label.clone(),
        reason: e.to_string(),
    })?;
    load_bytes(&bytes, path.parent(), &label)
}

/// Loads a self-contained document (`.glb` or `.gltf` with data URIs).
pub fn load_scene_from_slice(bytes: &[u8]) -> Result<SceneModel, SceneError> {
    load_bytes(bytes, None, "<memory>")
}

fn load_bytes(bytes: &[u8], base: Option<&Path>, label: &str) -> Result<SceneModel, SceneError> {
    let unreadable = |reason: String| SceneError::Unreadable {
        path: label.to_string(),
        reason,
    };
    let unsupported = |reason: String| SceneError::Unsupported {
        path: label.to_string(),
        reason,
    };
    let gltf = gltf::Gltf::from_slice(bytes).map_err(|e| unreadable(e.to_string()))?;
    let buffers = gltf::import_buffers(&gltf.document, base, gltf.blob.clone())
        .map_err(|e| unreadable(e.to_string()))?;
    let doc = &gltf.document;

    let mut meshes = Vec::new();
    let scene = doc.default_scene().or_else(|| doc.scenes().next());
    match scene {
        Some(scene) => {
            let mut stack: Vec<(gltf::Node, Mat4, usize)> = scene
                .nodes()
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .map(|n| (n, IDENTITY, 0))
                .collect();
            while let Some((node, parent, depth)) = stack.pop() {
                if depth > 64 {
                    return Err(unsupported("node hierarchy too deep".into()));
                }
                let world = mul(&parent, &node.transform().matrix());
                if let Some(mesh) = node.mesh() {
                    if let Some(m) = convert_mesh(&mesh, &world, &buffers).map_err(unsupported)? {
                        meshes.push(named(m, node.name().or(mesh.name())));
                    }
                }
                let children: Vec<_> = node.children().collect();
                for child in children.into_iter().rev() {
                    stack.push((child, world, depth + 1));
                }
            }
        }
        None => {
            for mesh in doc.meshes() {
                if let Some(m) = convert_mesh(&mesh, &IDENTITY, &buffers).map_err(unsupported)? {
                    meshes.push(named(m, mesh.name()));
                }
            }
        }
    }
    if meshes.is_empty() {
        return Err(SceneError::EmptyGeometry {
            path: label.to_string(),
        });
    }
    SceneModel::new(meshes).map_err(|e| match e {
        SceneError::InvalidMesh(reason) => unsupported(reason),
        other => other,
    })
}

fn named(mesh: Mesh, name: Option<&str>) -> Mesh {
    match name {
        Some(n) => mesh.with_name(n),
        None => mesh,
    }
}

/// Rejects accessors whose byte range escapes their buffer view or buffer,
/// which the accessor reader would otherwise index out of bounds.
fn check_accessor(acc: &gltf::Accessor, buffers: &[gltf::buffer::Data]) -> Result<(), String> {
    if acc.sparse().is_some() {
        return Err(format!("sparse accessor {} not supported", acc.index()));
    }
    let Some(view) = acc.view() else {
        return Err(format!("accessor {} has no buffer view", acc.index()));
    };
    let buffer_len = buffers
        .get(view.buffer().index())
        .map(|d| d.0.len())
        .ok_or_else(|| format!("accessor {} references a missing buffer", acc.index()))?;
    let elem = acc.size();
    let stride = view.stride().unwrap_or(elem);
    let span = match acc.count() {
        0 => 0,
        n => (n - 1)
            .checked_mul(stride)
            .and_then(|v| v.checked_add(elem))
            .ok_or("accessor size overflow")?,
    };
    let end = acc.offset().checked_add(span).ok_or("accessor size overflow")?;
    if stride < elem || end > view.length() {
        return Err(format!("accessor {} exceeds its buffer view", acc.index()));
    }
    if view.offset().checked_add(view.length()).is_none_or(|e| e > buffer_len) {
        return Err(format!("buffer view {} exceeds its buffer", view.index()));
    }
    Ok(())
}

fn convert_mesh(
    mesh: &gltf::Mesh,
    world: &Mat4,
    buffers: &[gltf::buffer::Data],
) -> Result<Option<Mesh>, String> {
    let mut positions: Vec<[f32; 3]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut color = None;
    for prim in mesh.primitives() {
        let mode = prim.mode();
        if !matches!(mode, Mode::Triangles | Mode::TriangleStrip | Mode::TriangleFan) {
            continue;
        }
        if let Some(acc) = prim.get(&gltf::Semantic::Positions) {
            check_accessor(&acc, buffers)?;
        }
        if let Some(acc) = prim.indices() {
            check_accessor(&acc, buffers)?;
        }
        let reader = prim.reader(|b| buffers.get(b.index()).map(|d| &d.0[..]));
        let Some(pos) = reader.read_positions() else {
            return Err(format!("mesh {:?} primitive without POSITION", mesh.name()));
        };
        let base = positions.len() as u32;
        let local: Vec<[f32; 3]> = pos.collect();
        let count = local.len() as u32;
        positions.extend(local.iter().map(|p| transform(world, *p)));
        let indices: Vec<u32> = match reader.read_indices() {
            Some(ix) => ix.into_u32().collect(),
            None => (0..count).collect(),
        };
        if indices.iter().any(|&i| i >= count) {
            return Err(format!("mesh {:?} has out-of-range indices", mesh.name()));
        }
        for t in triangulate(mode, &indices) {
            triangles.push([base + t[0], base + t[1], base + t[2]]);
        }
        if color.is_none() {
            let f = prim.material().pbr_metallic_roughness().base_color_factor();
            color = Some([f[0], f[1], f[2]].map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8));
        }
    }
    if triangles.is_empty() {
        return Ok(None);
    }
    Ok(Some(Mesh::new(positions, triangles, color.unwrap_or([204, 204, 204]))))
}

fn triangulate(mode: Mode, idx: &[u32]) -> Vec<[u32; 3]> {
    match mode {
        Mode::Triangles => idx.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        Mode::TriangleStrip => (2..idx.len())
            .map(|i| {
                if i % 2 == 0 {
                    [idx[i - 2], idx[i - 1], idx[i]]
                } else {
                    [idx[i - 1], idx[i - 2], idx[i]]
                }
            })
            .collect(),
        Mode::TriangleFan => (2..idx.len()).map(|i| [idx[0], idx[i - 1], idx[i]]).collect(),
        _ => Vec::new(),
    }
}

/// Column-major 4x4 product `a * b`.
fn mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0f32; 4]; 4];
    for (c, col) in out.iter_mut().enumerate() {
        for (r, cell) in col.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[k][r] * b[c][k]).sum();
        }
    }
    out
}

fn transform(m: &Mat4, p: [f32; 3]) -> [f32; 3] {
    let mut out = [0.0f32; 3];
    for (r, o) in out.iter_mut().enumerate() {
        *o = m[0][r] * p[0] + m[1][r] * p[1] + m[2][r] * p[2] + m[3][r];
    }
    out
}
