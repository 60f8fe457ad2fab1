//! Mask algebra, scribble handling, hidden-mesh removal and the three
//! modifier pipelines that turn a rendered view plus user input into a
//! reference image.

mod mask;
mod pipeline;
mod removal;
mod result;
mod strokes;

use std::fmt;

use thiserror::Error;

use crate::adapters::AdapterError;
use crate::raster::RasterError;
use crate::scene::SceneError;

pub use mask::{compose, mask_subtract, mask_union};
pub use pipeline::{GrabRequest, ModifierSession, DEFAULT_R_TH, DEFAULT_SAMPLE_STRIDE};
pub use removal::{footprint_ratio, get_initial_image, select_mesh_primitives};
pub use result::{
    Composition, ModifierKind, ModifierResult, Provenance, StageTiming, PROVENANCE_FILE, REFERENCE_FILE,
    SEG_FILE, SYN_FILE,
};
pub use strokes::{aggregate_scribbles, clear_depth_region, rasterize_strokes, Stroke, StrokeSet};

/// Pipeline step names, reported in errors and timings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Render,
    Edges,
    Generation,
    Segmentation,
    Removal,
    Inpainting,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Render => "render",
            Stage::Edges => "edges",
            Stage::Generation => "generation",
            Stage::Segmentation => "segmentation",
            Stage::Removal => "removal",
            Stage::Inpainting => "inpainting",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CompositorError {
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: AdapterError,
    },
    #[error("empty mask: {0}")]
    EmptyMask(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("result i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt result: {0}")]
    Corrupt(String),
}

impl CompositorError {
    pub(crate) fn stage(stage: Stage) -> impl FnOnce(AdapterError) -> Self {
        move |source| CompositorError::Stage { stage, source }
    }

    /// True for failures caused by the request itself rather than a backend.
    pub fn is_validation(&self) -> bool {
        match self {
            CompositorError::InvalidStroke(_)
            | CompositorError::InvalidParameter(_)
            | CompositorError::EmptyMask(_) => true,
            CompositorError::Stage { source, .. } => matches!(
                source,
                AdapterError::InvalidParams(_) | AdapterError::InvalidInput(_) | AdapterError::NoObject
            ),
            CompositorError::Scene(e) => matches!(
                e,
                SceneError::InvalidViewpoint(_) | SceneError::UnknownMesh(_)
            ),
            CompositorError::Raster(RasterError::DimensionMismatch { .. }) => true,
            _ => false,
        }
    }
}
