//! Wire format shared by the remote clients and any compatible backend.
//!
//! Requests are `multipart/form-data` POSTs. Raster parts are PNGs named
//! [`PART_IMAGE`], [`PART_DEPTH`], [`PART_SCRIBBLE`] or [`PART_MASK`]; the
//! JSON part [`PART_PARAMS`] carries [`GenerationParams`], a [`BoxPrompt`] or
//! a [`TextQuery`] depending on the capability.
//!
//! Responses:
//! - generation: the PNG bytes of the output image;
//! - segmentation: `{"regions": [{"score": f64, "mask": "<base64 PNG>"}]}`;
//! - embeddings: `{"embedding": [f32, ...]}`.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{AdapterError, BoxPrompt, Capability, GenerationParams, Result, ScoredRegion};
use crate::raster::MaskImage;

pub const PART_IMAGE: &str = "image";
pub const PART_DEPTH: &str = "depth";
pub const PART_SCRIBBLE: &str = "scribble";
pub const PART_MASK: &str = "mask";
pub const PART_PARAMS: &str = "params";

/// Upper bound on regions accepted from a segmentation backend.
pub const MAX_REGIONS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextQuery {
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingBody {
    embedding: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct RegionBody {
    score: f64,
    mask: String,
}

#[derive(Serialize, Deserialize)]
struct SegmentationBody {
    regions: Vec<RegionBody>,
}

fn malformed(capability: Capability, message: impl Into<String>) -> AdapterError {
    AdapterError::MalformedResponse {
        capability,
        message: message.into(),
    }
}

pub fn encode_params(params: &GenerationParams) -> String {
    serde_json::to_string(params).expect("params serialize")
}

/// Parses and validates a `params` part sent to a generation endpoint.
pub fn decode_params(bytes: &[u8]) -> Result<GenerationParams> {
    let params: GenerationParams = serde_json::from_slice(bytes)
        .map_err(|e| AdapterError::InvalidParams(e.to_string()))?;
    params.validate()?;
    Ok(params)
}

pub fn decode_box_prompt(bytes: &[u8]) -> Result<BoxPrompt> {
    serde_json::from_slice(bytes).map_err(|e| AdapterError::InvalidParams(e.to_string()))
}

pub fn encode_embedding_response(embedding: &[f32]) -> Vec<u8> {
    serde_json::to_vec(&EmbeddingBody {
        embedding: embedding.to_vec(),
    })
    .expect("embedding serializes")
}

pub fn decode_embedding_response(capability: Capability, bytes: &[u8]) -> Result<Vec<f32>> {
    let body: EmbeddingBody =
        serde_json::from_slice(bytes).map_err(|e| malformed(capability, e.to_string()))?;
    Ok(body.embedding)
}

pub fn encode_segmentation_response(regions: &[ScoredRegion]) -> Result<Vec<u8>> {
    let regions = regions
        .iter()
        .map(|r| {
            Ok(RegionBody {
                score: r.score,
                mask: BASE64.encode(r.mask.to_png()?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::to_vec(&SegmentationBody { regions }).expect("regions serialize"))
}

/// Decodes the region list; every mask must match `dims` exactly.
pub fn decode_segmentation_response(bytes: &[u8], dims: (u32, u32)) -> Result<Vec<ScoredRegion>> {
    let cap = Capability::BoxSegmentation;
    let body: SegmentationBody =
        serde_json::from_slice(bytes).map_err(|e| malformed(cap, e.to_string()))?;
    if body.regions.len() > MAX_REGIONS {
        return Err(malformed(cap, format!("{} regions exceeds limit", body.regions.len())));
    }
    body.regions
        .into_iter()
        .map(|r| {
            let png = BASE64
                .decode(r.mask.as_bytes())
                .map_err(|e| malformed(cap, format!("mask base64: {e}")))?;
            let mask = MaskImage::from_png(&png).map_err(|e| malformed(cap, e.to_string()))?;
            if mask.dims() != dims {
                return Err(malformed(
                    cap,
                    format!("mask is {:?}, image is {dims:?}", mask.dims()),
                ));
            }
            Ok(ScoredRegion {
                score: r.score,
                mask,
            })
        })
        .collect()
}
