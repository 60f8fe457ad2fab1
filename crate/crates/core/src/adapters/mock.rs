//! Deterministic stand-ins for every model capability.
//!
//! Outputs are pure functions of the inputs and seed, cheap to compute, and
//! visibly depend on the prompt so tests can tell results apart.

use sha2::{Digest, Sha256};

use super::{
    BoxPrompt, EdgeBackend, GenerationBackend, GenerationParams, GenerationRequest, ImageEmbedder,
    Result, ScoredRegion, SegmentationBackend, TextEmbedder,
};
use crate::raster::{DepthMap, MaskImage, RgbImage, NO_HIT};

/// Expands the SHA-256 of `input` to `dim` values in `[-1, 1]`, four bytes
/// per value, hashing `input || block_index` for each 32-byte block.
pub fn hash_embedding(input: &[u8], dim: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(dim);
    let mut block = 0u32;
    while out.len() < dim {
        let mut h = Sha256::new();
        h.update(input);
        h.update(block.to_le_bytes());
        let digest: [u8; 32] = h.finalize().into();
        for chunk in digest.chunks_exact(4) {
            if out.len() == dim {
                break;
            }
            let u = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            out.push((u as f64 / u32::MAX as f64 * 2.0 - 1.0) as f32);
        }
        block += 1;
    }
    out
}

fn prompt_colors(params: &GenerationParams) -> ([u8; 3], [u8; 3]) {
    let mut h = Sha256::new();
    h.update(params.prompt.as_bytes());
    h.update(params.seed.unwrap_or(0).to_le_bytes());
    let d: [u8; 32] = h.finalize().into();
    ([d[0], d[1], d[2]], [d[3], d[4], d[5]])
}

/// False-color rendering of a depth map: near pixels take the full tint,
/// far ones fade toward a quarter of it, background gets the inverse tint.
fn false_color(depth: &DepthMap, tint: [u8; 3]) -> RgbImage {
    let (w, h) = depth.dims();
    let mut img = RgbImage::filled(w, h, tint.map(|c| 255 - c));
    for row in 0..h {
        for col in 0..w {
            let d = depth.get(row, col);
            if d < NO_HIT {
                let shade = 0.25 + 0.75 * (1.0 - d);
                img.set(row, col, tint.map(|c| (c as f32 * shade).round() as u8));
            }
        }
    }
    img
}

#[derive(Clone, Debug)]
pub struct MockModels {
    dim: usize,
}

impl MockModels {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl TextEmbedder for MockModels {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        Ok(hash_embedding(text.as_bytes(), self.dim))
    }
}

impl ImageEmbedder for MockModels {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f32>> {
        let mut bytes = Vec::with_capacity(8 + image.as_raw().len());
        bytes.extend_from_slice(&image.width().to_le_bytes());
        bytes.extend_from_slice(&image.height().to_le_bytes());
        bytes.extend_from_slice(image.as_raw());
        Ok(hash_embedding(&bytes, self.dim))
    }
}

impl SegmentationBackend for MockModels {
    /// The filled box itself, with score 1.
    fn segment(&self, image: &RgbImage, prompt: &BoxPrompt) -> Result<Vec<ScoredRegion>> {
        Ok(vec![ScoredRegion {
            score: 1.0,
            mask: prompt.rect.to_mask(image.width(), image.height()),
        }])
    }
}

impl GenerationBackend for MockModels {
    fn generate(&self, request: GenerationRequest<'_>) -> Result<RgbImage> {
        let (tint, overlay) = prompt_colors(request.params());
        Ok(match request {
            GenerationRequest::Depth { depth, .. } => false_color(depth, tint),
            GenerationRequest::DepthScribble { depth, scribble, .. } => {
                let mut img = false_color(depth, tint);
                paint(&mut img, scribble, overlay);
                img
            }
            GenerationRequest::Inpaint { image, mask, .. } => {
                let mut img = image.clone();
                paint(&mut img, mask, tint);
                img
            }
        })
    }
}

fn paint(img: &mut RgbImage, mask: &MaskImage, color: [u8; 3]) {
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(row, col) {
                img.set(row, col, color);
            }
        }
    }
}

/// Edge extraction is deterministic already; the mock is the gradient
/// fallback.
impl EdgeBackend for MockModels {
    fn edges(&self, image: &RgbImage) -> Result<MaskImage> {
        super::edges::GradientEdges::default().edges(image)
    }
}
