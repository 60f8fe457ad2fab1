//! Core engine for viewpoint-anchored 3D design review.
//!
//! The crate is split along the lines of the review workflow:
//!
//! - [`raster`]: RGB, depth and mask rasters plus their PNG encodings.
//! - [`scene`]: glTF loading, the orbit camera and a deterministic software
//!   rasterizer with pixel raycasting.
//! - [`viewpoint`]: the sampled viewpoint grid, the embedding index and
//!   text-to-viewpoint suggestion.
//! - [`adapters`]: clients for the external model services (embedding, edge
//!   extraction, box segmentation, conditioned generation, inpainting) and
//!   their deterministic mocks.
//! - [`compositor`]: mask algebra, hidden-primitive removal and the three
//!   image modifier pipelines.

pub mod adapters;
pub mod compositor;
pub mod raster;
pub mod scene;
pub mod viewpoint;

pub use raster::{DepthMap, MaskImage, RasterError, RgbImage};
pub use scene::{CameraPose, MeshId, RenderConfig, SceneModel, Viewpoint};
