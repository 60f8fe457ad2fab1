use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapters::{BoxPrompt, GenerationParams};
use crate::raster::{ensure_same_dims, MaskImage, RgbImage};
use crate::scene::{MeshId, Viewpoint};

use super::CompositorError;

pub const REFERENCE_FILE: &str = "reference.png";
pub const SYN_FILE: &str = "syn.png";
pub const SEG_FILE: &str = "seg.png";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModifierKind {
    TextScribble,
    GrabNGo,
    TextPaint,
}

impl ModifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModifierKind::TextScribble => "text-scribble",
            ModifierKind::GrabNGo => "grab-n-go",
            ModifierKind::TextPaint => "text-paint",
        }
    }
}

/// Which image fills the masked region of the reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// Generated pixels inside `seg`, the initial render elsewhere.
    #[default]
    Overlay,
    /// Rendered scene pixels inside `seg`, generated pixels elsewhere.
    Staging,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ModifierKind,
    pub viewpoint: Viewpoint,
    #[serde(default)]
    pub composition: Composition,
    /// Parameters of the last generation call, seed included.
    pub params: Option<GenerationParams>,
    pub seed: Option<u64>,
    #[serde(rename = "box")]
    pub box_prompt: Option<BoxPrompt>,
    /// Segmentation found nothing, so the reference is the raw generation.
    #[serde(default)]
    pub no_object: bool,
    #[serde(default)]
    pub stages: Vec<StageTiming>,
}

impl Provenance {
    pub fn without_timings(&self) -> Self {
        Self {
            stages: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    removed_meshes: BTreeSet<MeshId>,
    #[serde(flatten)]
    provenance: Provenance,
}

/// Output of one modifier run. Images are never mutated after creation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModifierResult {
    pub reference: RgbImage,
    pub syn: RgbImage,
    pub seg: MaskImage,
    pub removed_meshes: BTreeSet<MeshId>,
    pub provenance: Provenance,
}

impl ModifierResult {
    pub fn kind(&self) -> ModifierKind {
        self.provenance.kind
    }

    pub fn validate(&self) -> Result<(), CompositorError> {
        ensure_same_dims(self.reference.dims(), self.syn.dims())?;
        ensure_same_dims(self.reference.dims(), self.seg.dims())?;
        Ok(())
    }

    /// Equality on everything except wall-clock stage timings.
    pub fn same_output(&self, other: &ModifierResult) -> bool {
        self.reference == other.reference
            && self.syn == other.syn
            && self.seg == other.seg
            && self.removed_meshes == other.removed_meshes
            && self.provenance.without_timings() == other.provenance.without_timings()
    }

    pub fn provenance_json(&self) -> String {
        let sidecar = Sidecar {
            removed_meshes: self.removed_meshes.clone(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&sidecar).expect("provenance serializes")
    }

    /// Writes the PNG set and the provenance sidecar into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), CompositorError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(REFERENCE_FILE), self.reference.to_png()?)?;
        fs::write(dir.join(SYN_FILE), self.syn.to_png()?)?;
        fs::write(dir.join(SEG_FILE), self.seg.to_png()?)?;
        fs::write(dir.join(PROVENANCE_FILE), self.provenance_json())?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, CompositorError> {
        let sidecar: Sidecar = serde_json::from_slice(&fs::read(dir.join(PROVENANCE_FILE))?)
            .map_err(|e| CompositorError::Corrupt(format!("{PROVENANCE_FILE}: {e}")))?;
        let result = Self {
            reference: RgbImage::from_png(&fs::read(dir.join(REFERENCE_FILE))?)?,
            syn: RgbImage::from_png(&fs::read(dir.join(SYN_FILE))?)?,
            seg: MaskImage::from_png(&fs::read(dir.join(SEG_FILE))?)?,
            removed_meshes: sidecar.removed_meshes,
            provenance: sidecar.provenance,
        };
        result.validate()?;
        Ok(result)
    }
}
