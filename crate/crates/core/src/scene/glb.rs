//! Binary glTF export of a [`SceneModel`], one node per mesh.

use serde_json::{json, Value};

use super::SceneModel;

const GLB_MAGIC: u32 = 0x4654_6C67;
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;

/// Serializes the scene as a `.glb`. Loading the result yields the same
/// meshes, ids and colors.
pub fn write_glb(scene: &SceneModel) -> Vec<u8> {
    let mut bin: Vec<u8> = Vec::new();
    let mut nodes = Vec::new();
    let mut meshes = Vec::new();
    let mut materials = Vec::new();
    let mut accessors = Vec::new();
    let mut views = Vec::new();

    for (i, mesh) in scene.meshes().iter().enumerate() {
        let mut min = [f32::INFINITY; 3];
        let mut max = [f32::NEG_INFINITY; 3];
        let pos_offset = bin.len();
        for p in &mesh.positions {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
                bin.extend_from_slice(&p[k].to_le_bytes());
            }
        }
        let pos_len = bin.len() - pos_offset;
        let idx_offset = bin.len();
        for t in &mesh.triangles {
            for k in t {
                bin.extend_from_slice(&k.to_le_bytes());
            }
        }
        let idx_len = bin.len() - idx_offset;

        views.push(json!({"buffer": 0, "byteOffset": pos_offset, "byteLength": pos_len, "target": 34962}));
        views.push(json!({"buffer": 0, "byteOffset": idx_offset, "byteLength": idx_len, "target": 34963}));
        accessors.push(json!({
            "bufferView": 2 * i, "componentType": 5126, "count": mesh.positions.len(),
            "type": "VEC3", "min": min, "max": max,
        }));
        accessors.push(json!({
            "bufferView": 2 * i + 1, "componentType": 5125,
            "count": mesh.triangles.len() * 3, "type": "SCALAR",
        }));
        let [r, g, b] = mesh.color.map(|c| c as f64 / 255.0);
        materials.push(json!({"pbrMetallicRoughness": {"baseColorFactor": [r, g, b, 1.0]}}));
        meshes.push(json!({"primitives": [{
            "attributes": {"POSITION": 2 * i},
            "indices": 2 * i + 1,
            "material": i,
        }]}));
        let mut node = json!({"mesh": i});
        if let Some(name) = mesh.name.as_deref().filter(|n| !n.is_empty()) {
            node["name"] = Value::from(name);
        }
        nodes.push(node);
    }

    let doc = json!({
        "asset": {"version": "2.0", "generator": "memovis"},
        "scene": 0,
        "scenes": [{"nodes": (0..nodes.len()).collect::<Vec<_>>()}],
        "nodes": nodes,
        "meshes": meshes,
        "materials": materials,
        "accessors": accessors,
        "bufferViews": views,
        "buffers": [{"byteLength": bin.len()}],
    });
    let mut json_bytes = serde_json::to_vec(&doc).expect("json value serializes");
    while json_bytes.len() % 4 != 0 {
        json_bytes.push(b' ');
    }
    while bin.len() % 4 != 0 {
        bin.push(0);
    }

    let total = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&GLB_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_JSON.to_le_bytes());
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_BIN.to_le_bytes());
    out.extend_from_slice(&bin);
    out
}
