//! Viewpoint database: every grid view of a scene rendered, embedded with an
//! image encoder and stored row-aligned, then queried with a text embedding.

mod grid;
mod index;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adapters::{AdapterError, ModelSuite};
use crate::raster::RgbImage;
use crate::scene::{RenderConfig, Renderer, SceneError, SceneModel, Viewpoint};

pub use grid::{sample_grid, GridCoord, SamplingConfig, MAX_GRID_ROWS};
pub use index::{Neighbor, ViewpointIndex, FORMAT_VERSION, HEADER_LEN, MAGIC, NORM_TOLERANCE};

pub const DEFAULT_K: usize = 4;
pub const DEFAULT_THUMBNAIL_SIZE: u32 = 128;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("viewpoint {row} ({coord}): {source}")]
    Encoder {
        row: usize,
        coord: GridCoord,
        #[source]
        source: AdapterError,
    },
    #[error("query encoding failed: {0}")]
    Query(#[source] AdapterError),
    #[error("malformed index: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("query has dimension {actual}, index has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("comment text is empty")]
    EmptyText,
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index was built from a different scene")]
    StaleIndex,
}

impl IndexError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IndexError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Renders and encodes every grid viewpoint. Rows follow [`sample_grid`]
/// order whatever order the workers finish in. `progress` receives
/// `(done, total)` after each row.
pub fn build_index(
    scene: &SceneModel,
    cfg: &SamplingConfig,
    render: &RenderConfig,
    models: &ModelSuite,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<ViewpointIndex, IndexError> {
    render.validate()?;
    let viewpoints = sample_grid(scene, cfg)?;
    let renderer = Renderer::new(render.clone());
    let total = viewpoints.len();
    let done = AtomicUsize::new(0);
    let none = BTreeSet::new();
    let rows: Vec<Vec<f32>> = viewpoints
        .par_iter()
        .enumerate()
        .map(|(row, v)| {
            let pose = renderer.pose(v, scene)?;
            let image = renderer.render_rgb(scene, &pose, &none)?;
            let embedding = models.encode_image(&image).map_err(|source| IndexError::Encoder {
                row,
                coord: cfg.coord(row),
                source,
            })?;
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(cb) = progress {
                cb(n, total);
            }
            Ok(embedding)
        })
        .collect::<Result<_, IndexError>>()?;
    let dim = rows.first().map_or(models.image.dim(), Vec::len);
    let embeddings = rows.concat();
    ViewpointIndex::from_parts(dim, scene.fingerprint(), viewpoints, embeddings)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViewSuggestion {
    pub row: usize,
    pub viewpoint: Viewpoint,
    pub score: f64,
    #[serde(skip)]
    pub thumbnail: Option<RgbImage>,
}

/// Top-`k` views for a comment, best first.
pub fn suggest_views(
    index: &ViewpointIndex,
    text: &str,
    models: &ModelSuite,
    k: usize,
) -> Result<Vec<ViewSuggestion>, IndexError> {
    if text.trim().is_empty() {
        return Err(IndexError::EmptyText);
    }
    if index.is_empty() {
        return Err(IndexError::EmptyIndex);
    }
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    let query = models.encode_text(text).map_err(IndexError::Query)?;
    Ok(index
        .query(&query, k)?
        .into_iter()
        .map(|n| ViewSuggestion {
            row: n.row,
            viewpoint: index.viewpoint(n.row),
            score: n.score,
            thumbnail: None,
        })
        .collect())
}

/// Renders a square thumbnail for each suggestion.
pub fn attach_thumbnails(
    suggestions: &mut [ViewSuggestion],
    scene: &SceneModel,
    render: &RenderConfig,
    size: u32,
) -> Result<(), IndexError> {
    let renderer = Renderer::new(render.clone().with_size(size, size));
    for s in suggestions {
        let pose = renderer.pose(&s.viewpoint, scene)?;
        s.thumbnail = Some(renderer.render_rgb(scene, &pose, &BTreeSet::new())?);
    }
    Ok(())
}
