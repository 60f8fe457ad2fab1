//! Clients for the external model services.
//!
//! Each capability has a small backend trait with two shipped
//! implementations: a remote HTTP client ([`remote`]) and a deterministic
//! mock ([`mock`]). [`ModelSuite`] wraps one backend per capability and
//! enforces the contract every caller relies on, whatever the backend does:
//! inputs are validated before any network activity, embeddings come back
//! unit-norm, masks are binary at the input resolution, and inpainting never
//! touches pixels outside its mask.

mod config;
pub mod edges;
pub mod mock;
pub mod remote;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ensure_same_dims, DepthMap, MaskImage, RasterError, RgbImage};

pub use config::{EndpointConfig, EndpointMode, EndpointTable, ENV_PREFIX};

pub const DEFAULT_POSITIVE_SUFFIX: &str = "realistic, high quality, high resolution, 8k, detailed";
pub const DEFAULT_NEGATIVE_PROMPT: &str = "monochrome, worst quality, low quality, blur";
pub const DEFAULT_STEPS: u32 = 30;
pub const DEFAULT_SCRIBBLE_STRENGTH: f64 = 0.7;
pub const DEFAULT_DEPTH_STRENGTH: f64 = 0.3;
/// Inpainting prompt that removes whatever is under the mask.
pub const REMOVAL_PROMPT: &str = "background";
/// Embedding width of the ViT-B/32 CLIP family.
pub const DEFAULT_EMBEDDING_DIM: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    TextEmbedding,
    ImageEmbedding,
    EdgeExtraction,
    BoxSegmentation,
    DepthGeneration,
    DepthScribbleGeneration,
    Inpainting,
}

impl Capability {
    pub const ALL: [Capability; 7] = [
        Capability::TextEmbedding,
        Capability::ImageEmbedding,
        Capability::EdgeExtraction,
        Capability::BoxSegmentation,
        Capability::DepthGeneration,
        Capability::DepthScribbleGeneration,
        Capability::Inpainting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::TextEmbedding => "text_embedding",
            Capability::ImageEmbedding => "image_embedding",
            Capability::EdgeExtraction => "edge_extraction",
            Capability::BoxSegmentation => "box_segmentation",
            Capability::DepthGeneration => "depth_generation",
            Capability::DepthScribbleGeneration => "depth_scribble_generation",
            Capability::Inpainting => "inpainting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("{capability}: transport failure: {message}")]
    Transport {
        capability: Capability,
        message: String,
    },
    #[error("{capability}: request timed out")]
    Timeout { capability: Capability },
    #[error("{capability}: malformed response: {message}")]
    MalformedResponse {
        capability: Capability,
        message: String,
    },
    #[error("{capability}: embedding dimension {actual}, endpoint declares {expected}")]
    DimensionMismatch {
        capability: Capability,
        expected: usize,
        actual: usize,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no-object: segmentation returned no region")]
    NoObject,
    #[error("empty mask")]
    EmptyMask,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AdapterError>;

/// Parameters forwarded to a conditioned generation backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub prompt: String,
    pub positive_suffix: String,
    pub negative_prompt: String,
    pub steps: u32,
    pub condition_strengths: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            prompt: String::new(),
            positive_suffix: DEFAULT_POSITIVE_SUFFIX.to_string(),
            negative_prompt: DEFAULT_NEGATIVE_PROMPT.to_string(),
            steps: DEFAULT_STEPS,
            condition_strengths: BTreeMap::from([
                ("depth".to_string(), DEFAULT_DEPTH_STRENGTH),
                ("scribble".to_string(), DEFAULT_SCRIBBLE_STRENGTH),
            ]),
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Same parameters with a different prompt.
    pub fn with_prompt(&self, prompt: &str) -> Self {
        Self {
            prompt: prompt.to_string(),
            ..self.clone()
        }
    }

    pub fn strength(&self, condition: &str) -> Option<f64> {
        self.condition_strengths.get(condition).copied()
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(AdapterError::InvalidParams("prompt is empty".into()));
        }
        if self.steps == 0 {
            return Err(AdapterError::InvalidParams("steps must be at least 1".into()));
        }
        for (name, w) in &self.condition_strengths {
            if !(0.0..=1.0).contains(w) {
                return Err(AdapterError::InvalidParams(format!(
                    "strength {name}={w} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Fills in a random seed when none was given.
    pub fn resolve_seed(&mut self) -> u64 {
        *self.seed.get_or_insert_with(|| rand::random::<u32>().into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxIntent {
    Keep,
    Remove,
}

/// Pixel rectangle; `right` and `bottom` are exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl PixelBox {
    pub fn area(&self) -> u64 {
        (self.right.saturating_sub(self.left)) as u64 * (self.bottom.saturating_sub(self.top)) as u64
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        if self.right <= self.left || self.bottom <= self.top {
            return Err(AdapterError::InvalidInput(format!("empty box {self:?}")));
        }
        if self.right > width || self.bottom > height {
            return Err(AdapterError::InvalidInput(format!(
                "box {self:?} exceeds {width}x{height} image"
            )));
        }
        Ok(())
    }

    pub fn to_mask(&self, width: u32, height: u32) -> MaskImage {
        MaskImage::from_fn(width, height, |r, c| {
            (self.top..self.bottom).contains(&r) && (self.left..self.right).contains(&c)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxPrompt {
    #[serde(rename = "box")]
    pub rect: PixelBox,
    pub intent: BoxIntent,
}

/// One candidate region from a segmentation backend.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredRegion {
    pub score: f64,
    pub mask: MaskImage,
}

/// A conditioned generation call, by capability.
#[derive(Clone, Copy, Debug)]
pub enum GenerationRequest<'a> {
    Depth {
        depth: &'a DepthMap,
        params: &'a GenerationParams,
    },
    DepthScribble {
        depth: &'a DepthMap,
        scribble: &'a MaskImage,
        params: &'a GenerationParams,
    },
    Inpaint {
        image: &'a RgbImage,
        mask: &'a MaskImage,
        params: &'a GenerationParams,
    },
}

impl GenerationRequest<'_> {
    pub fn capability(&self) -> Capability {
        match self {
            GenerationRequest::Depth { .. } => Capability::DepthGeneration,
            GenerationRequest::DepthScribble { .. } => Capability::DepthScribbleGeneration,
            GenerationRequest::Inpaint { .. } => Capability::Inpainting,
        }
    }

    pub fn params(&self) -> &GenerationParams {
        match self {
            GenerationRequest::Depth { params, .. }
            | GenerationRequest::DepthScribble { params, .. }
            | GenerationRequest::Inpaint { params, .. } => params,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        match self {
            GenerationRequest::Depth { depth, .. } | GenerationRequest::DepthScribble { depth, .. } => {
                depth.dims()
            }
            GenerationRequest::Inpaint { image, .. } => image.dims(),
        }
    }
}

pub trait TextEmbedder: Send + Sync {
    /// Declared embedding width.
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Vec<f32>>;
}

pub trait ImageEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f32>>;
}

pub trait EdgeBackend: Send + Sync {
    fn edges(&self, image: &RgbImage) -> Result<MaskImage>;
}

pub trait SegmentationBackend: Send + Sync {
    fn segment(&self, image: &RgbImage, prompt: &BoxPrompt) -> Result<Vec<ScoredRegion>>;
}

pub trait GenerationBackend: Send + Sync {
    fn generate(&self, request: GenerationRequest<'_>) -> Result<RgbImage>;
}

/// Validated access to one backend per capability.
#[derive(Clone)]
pub struct ModelSuite {
    pub text: Arc<dyn TextEmbedder>,
    pub image: Arc<dyn ImageEmbedder>,
    pub edges: Arc<dyn EdgeBackend>,
    pub segmentation: Arc<dyn SegmentationBackend>,
    pub depth: Arc<dyn GenerationBackend>,
    pub depth_scribble: Arc<dyn GenerationBackend>,
    pub inpainting: Arc<dyn GenerationBackend>,
}

impl fmt::Debug for ModelSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSuite")
            .field("text_dim", &self.text.dim())
            .field("image_dim", &self.image.dim())
            .finish_non_exhaustive()
    }
}

impl ModelSuite {
    /// Every capability backed by the deterministic mocks.
    pub fn mock() -> Self {
        Self::mock_with_dim(DEFAULT_EMBEDDING_DIM)
    }

    pub fn mock_with_dim(dim: usize) -> Self {
        let m = Arc::new(mock::MockModels::new(dim));
        Self {
            text: m.clone(),
            image: m.clone(),
            edges: Arc::new(edges::GradientEdges::default()),
            segmentation: m.clone(),
            depth: m.clone(),
            depth_scribble: m.clone(),
            inpainting: m,
        }
    }

    pub fn encode_text(&self, text: &str) -> Result<Vec<f32>> {
        if text.trim().is_empty() {
            return Err(AdapterError::InvalidInput("text is empty".into()));
        }
        let raw = self.text.embed_text(text)?;
        finish_embedding(Capability::TextEmbedding, self.text.dim(), raw)
    }

    pub fn encode_image(&self, image: &RgbImage) -> Result<Vec<f32>> {
        let raw = self.image.embed_image(image)?;
        finish_embedding(Capability::ImageEmbedding, self.image.dim(), raw)
    }

    pub fn extract_edges(&self, image: &RgbImage) -> Result<MaskImage> {
        let mask = self.edges.edges(image)?;
        check_output_dims(Capability::EdgeExtraction, image.dims(), mask.dims())?;
        Ok(mask)
    }

    /// Highest-scoring region inside the box; the first wins on equal scores.
    pub fn segment_box(&self, image: &RgbImage, prompt: &BoxPrompt) -> Result<MaskImage> {
        prompt.rect.validate(image.width(), image.height())?;
        let regions = self.segmentation.segment(image, prompt)?;
        let mut best: Option<ScoredRegion> = None;
        for region in regions {
            check_output_dims(Capability::BoxSegmentation, image.dims(), region.mask.dims())?;
            if !region.score.is_finite() {
                return Err(AdapterError::MalformedResponse {
                    capability: Capability::BoxSegmentation,
                    message: "non-finite region score".into(),
                });
            }
            if best.as_ref().is_none_or(|b| region.score > b.score) {
                best = Some(region);
            }
        }
        match best {
            Some(region) if !region.mask.is_empty() => Ok(region.mask),
            _ => Err(AdapterError::NoObject),
        }
    }

    pub fn generate_depth(&self, depth: &DepthMap, params: &GenerationParams) -> Result<RgbImage> {
        let params = prepare_params(params)?;
        let out = self.depth.generate(GenerationRequest::Depth {
            depth,
            params: &params,
        })?;
        check_output_dims(Capability::DepthGeneration, depth.dims(), out.dims())?;
        Ok(out)
    }

    pub fn generate_depth_scribble(
        &self,
        depth: &DepthMap,
        scribble: &MaskImage,
        params: &GenerationParams,
    ) -> Result<RgbImage> {
        ensure_same_dims(depth.dims(), scribble.dims())?;
        let params = prepare_params(params)?;
        let out = self.depth_scribble.generate(GenerationRequest::DepthScribble {
            depth,
            scribble,
            params: &params,
        })?;
        check_output_dims(Capability::DepthScribbleGeneration, depth.dims(), out.dims())?;
        Ok(out)
    }

    /// Regenerates the masked pixels; everything outside the mask is
    /// returned unchanged.
    pub fn inpaint(
        &self,
        image: &RgbImage,
        mask: &MaskImage,
        params: &GenerationParams,
    ) -> Result<RgbImage> {
        ensure_same_dims(image.dims(), mask.dims())?;
        if mask.is_empty() {
            return Err(AdapterError::EmptyMask);
        }
        let params = prepare_params(params)?;
        let out = self.inpainting.generate(GenerationRequest::Inpaint {
            image,
            mask,
            params: &params,
        })?;
        check_output_dims(Capability::Inpainting, image.dims(), out.dims())?;
        Ok(crate::compositor::compose(&out, image, mask)?)
    }
}

fn prepare_params(params: &GenerationParams) -> Result<GenerationParams> {
    params.validate()?;
    let mut params = params.clone();
    if params.seed.is_none() {
        let seed = params.resolve_seed();
        tracing::info!(seed, "no seed given, injected one");
    }
    Ok(params)
}

fn check_output_dims(capability: Capability, expected: (u32, u32), actual: (u32, u32)) -> Result<()> {
    if expected != actual {
        return Err(AdapterError::MalformedResponse {
            capability,
            message: format!("output is {actual:?}, expected {expected:?}"),
        });
    }
    Ok(())
}

fn finish_embedding(capability: Capability, dim: usize, mut v: Vec<f32>) -> Result<Vec<f32>> {
    if v.len() != dim {
        return Err(AdapterError::DimensionMismatch {
            capability,
            expected: dim,
            actual: v.len(),
        });
    }
    let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(AdapterError::MalformedResponse {
            capability,
            message: "embedding has zero or non-finite norm".into(),
        });
    }
    for x in &mut v {
        *x = (*x as f64 / norm) as f32;
    }
    Ok(v)
}
