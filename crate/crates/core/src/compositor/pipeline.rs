use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adapters::{
    AdapterError, BoxIntent, BoxPrompt, GenerationParams, ModelSuite, PixelBox, REMOVAL_PROMPT,
};
use crate::raster::{ensure_same_dims, MaskImage, RgbImage};
use crate::scene::{CameraPose, MeshId, RenderConfig, Renderer, SceneModel, Viewpoint};

use super::mask::{compose, mask_subtract, mask_union};
use super::removal::get_initial_image;
use super::result::{Composition, ModifierKind, ModifierResult, Provenance, StageTiming};
use super::strokes::{aggregate_scribbles, clear_depth_region, rasterize_strokes, StrokeSet};
use super::{CompositorError, Stage};

pub const DEFAULT_R_TH: f64 = 0.7;
pub const DEFAULT_SAMPLE_STRIDE: u32 = 4;

/// A box selection for the grab'n go modifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrabRequest {
    #[serde(rename = "box")]
    pub rect: PixelBox,
    pub intent: BoxIntent,
    /// Keep the selected scene object and surround it with generated
    /// content, instead of placing a generated object into the scene.
    #[serde(default)]
    pub staging: bool,
}

impl GrabRequest {
    pub fn prompt(&self) -> BoxPrompt {
        BoxPrompt {
            rect: self.rect,
            intent: self.intent,
        }
    }
}

#[derive(Default)]
struct Timer(Vec<StageTiming>);

impl Timer {
    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push(StageTiming {
            stage: stage.as_str().to_string(),
            millis: start.elapsed().as_millis() as u64,
        });
        out
    }
}

/// Everything a modifier needs about the anchored view. Cheap to clone.
#[derive(Clone, Debug)]
pub struct ModifierSession {
    scene: Arc<SceneModel>,
    viewpoint: Viewpoint,
    renderer: Renderer,
    models: ModelSuite,
    r_th: f64,
    stride: u32,
}

impl ModifierSession {
    pub fn new(
        scene: Arc<SceneModel>,
        viewpoint: Viewpoint,
        config: RenderConfig,
        models: ModelSuite,
    ) -> Result<Self, CompositorError> {
        viewpoint.validate()?;
        config.validate()?;
        Ok(Self {
            scene,
            viewpoint,
            renderer: Renderer::new(config),
            models,
            r_th: DEFAULT_R_TH,
            stride: DEFAULT_SAMPLE_STRIDE,
        })
    }

    /// Overrides the hidden-mesh removal threshold and ray sampling stride.
    pub fn with_removal(mut self, r_th: f64, stride: u32) -> Result<Self, CompositorError> {
        if !(r_th > 0.0 && r_th <= 1.0) {
            return Err(CompositorError::InvalidParameter(format!("r_th {r_th} outside (0, 1]")));
        }
        if stride == 0 {
            return Err(CompositorError::InvalidParameter("sample stride must be at least 1".into()));
        }
        self.r_th = r_th;
        self.stride = stride;
        Ok(self)
    }

    pub fn viewpoint(&self) -> &Viewpoint {
        &self.viewpoint
    }

    pub fn scene(&self) -> &SceneModel {
        &self.scene
    }

    pub fn renderer(&self) -> &Renderer {
        &self.renderer
    }

    pub fn dims(&self) -> (u32, u32) {
        let c = self.renderer.config();
        (c.width, c.height)
    }

    fn pose(&self) -> Result<CameraPose, CompositorError> {
        Ok(self.renderer.pose(&self.viewpoint, &self.scene)?)
    }

    /// Full render of the anchored view.
    pub fn initial_image(&self) -> Result<RgbImage, CompositorError> {
        let pose = self.pose()?;
        Ok(self.renderer.render_rgb(&self.scene, &pose, &BTreeSet::new())?)
    }

    fn provenance(&self, kind: ModifierKind) -> Provenance {
        Provenance {
            kind,
            viewpoint: self.viewpoint,
            composition: Composition::Overlay,
            params: None,
            seed: None,
            box_prompt: None,
            no_object: false,
            stages: Vec::new(),
        }
    }

    fn seeded(params: &GenerationParams) -> Result<(GenerationParams, u64), CompositorError> {
        params.validate().map_err(CompositorError::stage(Stage::Generation))?;
        let mut params = params.clone();
        let seed = params.resolve_seed();
        Ok((params, seed))
    }

    fn removal(&self, seg: &MaskImage) -> Result<(RgbImage, BTreeSet<MeshId>), CompositorError> {
        get_initial_image(&self.renderer, &self.scene, seg, &self.viewpoint, self.r_th, self.stride)
    }

    fn check_prior(&self, prior: &ModifierResult) -> Result<(), CompositorError> {
        prior.validate()?;
        ensure_same_dims(self.dims(), prior.reference.dims())?;
        Ok(())
    }

    /// Text plus scribble modifier. With no strokes this is a global
    /// restyle driven by depth alone.
    pub fn run_text_scribble(
        &self,
        strokes: &StrokeSet,
        params: &GenerationParams,
    ) -> Result<ModifierResult, CompositorError> {
        let (w, h) = self.dims();
        strokes.validate(w, h)?;
        let (params, seed) = Self::seeded(params)?;
        let mut timer = Timer::default();
        let pose = self.pose()?;
        let (init, depth) = timer.run(Stage::Render, || -> Result<_, CompositorError> {
            let init = self.renderer.render_rgb(&self.scene, &pose, &BTreeSet::new())?;
            let depth = self.renderer.render_depth(&self.scene, &pose, None)?;
            Ok((init, depth))
        })?;
        let mut provenance = self.provenance(ModifierKind::TextScribble);
        provenance.seed = Some(seed);

        let global = |syn: RgbImage, mut provenance: Provenance, timer: Timer, no_object: bool| {
            provenance.no_object = no_object;
            provenance.stages = timer.0;
            ModifierResult {
                reference: syn.clone(),
                seg: MaskImage::empty(w, h),
                syn,
                removed_meshes: BTreeSet::new(),
                provenance,
            }
        };

        if strokes.is_empty() {
            let syn = timer
                .run(Stage::Generation, || self.models.generate_depth(&depth, &params))
                .map_err(CompositorError::stage(Stage::Generation))?;
            provenance.params = Some(params);
            return Ok(global(syn, provenance, timer, false));
        }

        let edges = timer
            .run(Stage::Edges, || self.models.extract_edges(&init))
            .map_err(CompositorError::stage(Stage::Edges))?;
        let (scribble, cleared) = aggregate_scribbles(&edges, strokes)?;
        let depth = clear_depth_region(&depth, &cleared)?;
        let syn = timer
            .run(Stage::Generation, || {
                self.models.generate_depth_scribble(&depth, &scribble, &params)
            })
            .map_err(CompositorError::stage(Stage::Generation))?;
        provenance.params = Some(params);

        // Remove-only strokes give no box to segment.
        let Some(rect) = strokes.add_bounding_box(w, h) else {
            return Ok(global(syn, provenance, timer, true));
        };
        let prompt = BoxPrompt {
            rect,
            intent: BoxIntent::Keep,
        };
        provenance.box_prompt = Some(prompt);
        let seg = match timer.run(Stage::Segmentation, || self.models.segment_box(&syn, &prompt)) {
            Ok(seg) => seg,
            Err(AdapterError::NoObject) => {
                tracing::info!("segmentation found no object; using the raw generation");
                return Ok(global(syn, provenance, timer, true));
            }
            Err(e) => return Err(CompositorError::stage(Stage::Segmentation)(e)),
        };
        let (init_removed, removed) = timer.run(Stage::Removal, || self.removal(&seg))?;
        let reference = compose(&syn, &init_removed, &seg)?;
        provenance.stages = timer.0;
        Ok(ModifierResult {
            reference,
            syn,
            seg,
            removed_meshes: removed,
            provenance,
        })
    }

    /// Grows or shrinks the selection of a prior result with one box.
    pub fn run_grab_n_go(
        &self,
        prior: &ModifierResult,
        request: &GrabRequest,
    ) -> Result<ModifierResult, CompositorError> {
        self.check_prior(prior)?;
        let (w, h) = self.dims();
        let prompt = request.prompt();
        prompt
            .rect
            .validate(w, h)
            .map_err(CompositorError::stage(Stage::Segmentation))?;
        let mut timer = Timer::default();
        let composition = if request.staging {
            Composition::Staging
        } else {
            Composition::Overlay
        };
        let init = if request.staging {
            Some(timer.run(Stage::Render, || self.initial_image())?)
        } else {
            None
        };
        let source = match (request.intent, &init) {
            (BoxIntent::Keep, Some(init)) => init,
            (BoxIntent::Keep, None) => &prior.syn,
            (BoxIntent::Remove, _) => &prior.reference,
        };
        let m = timer
            .run(Stage::Segmentation, || self.models.segment_box(source, &prompt))
            .map_err(CompositorError::stage(Stage::Segmentation))?;
        // A selection only carries over between results of the same kind
        // of composition.
        let base = if prior.provenance.composition == composition {
            prior.seg.clone()
        } else {
            MaskImage::empty(w, h)
        };
        let seg = match request.intent {
            BoxIntent::Keep => mask_union(&base, &m)?,
            BoxIntent::Remove => mask_subtract(&base, &m)?,
        };
        let (reference, removed) = match init {
            Some(init) => (compose(&init, &prior.syn, &seg)?, BTreeSet::new()),
            None => {
                let (init_removed, removed) = timer.run(Stage::Removal, || self.removal(&seg))?;
                (compose(&prior.syn, &init_removed, &seg)?, removed)
            }
        };
        let provenance = Provenance {
            kind: ModifierKind::GrabNGo,
            viewpoint: self.viewpoint,
            composition,
            params: prior.provenance.params.clone(),
            seed: prior.provenance.seed,
            box_prompt: Some(prompt),
            no_object: false,
            stages: timer.0,
        };
        Ok(ModifierResult {
            reference,
            syn: prior.syn.clone(),
            seg,
            removed_meshes: removed,
            provenance,
        })
    }

    /// Inpaints painted regions of the current reference: add strokes with
    /// the prompt, remove strokes with the removal prompt.
    pub fn run_text_paint(
        &self,
        prior: Option<&ModifierResult>,
        paint: &StrokeSet,
        params: &GenerationParams,
    ) -> Result<ModifierResult, CompositorError> {
        let (w, h) = self.dims();
        if let Some(prior) = prior {
            self.check_prior(prior)?;
        }
        if paint.is_empty() {
            return Err(CompositorError::EmptyMask("no paint strokes".into()));
        }
        paint.validate(w, h)?;
        let add = rasterize_strokes(&paint.add_strokes, w, h);
        let remove = rasterize_strokes(&paint.remove_strokes, w, h);
        if add.is_empty() && remove.is_empty() {
            return Err(CompositorError::EmptyMask("strokes cover no pixel".into()));
        }
        let (params, seed) = if add.is_empty() {
            Self::seeded(&params.with_prompt(REMOVAL_PROMPT))?
        } else {
            Self::seeded(params)?
        };
        let mut timer = Timer::default();
        let base = match prior {
            Some(p) => p.reference.clone(),
            None => timer.run(Stage::Render, || self.initial_image())?,
        };
        let mut out = base;
        if !add.is_empty() {
            out = timer
                .run(Stage::Inpainting, || self.models.inpaint(&out, &add, &params))
                .map_err(CompositorError::stage(Stage::Inpainting))?;
        }
        let mut last = params.clone();
        if !remove.is_empty() {
            last = params.with_prompt(REMOVAL_PROMPT);
            out = timer
                .run(Stage::Inpainting, || self.models.inpaint(&out, &remove, &last))
                .map_err(CompositorError::stage(Stage::Inpainting))?;
        }
        let provenance = Provenance {
            kind: ModifierKind::TextPaint,
            viewpoint: self.viewpoint,
            composition: prior.map(|p| p.provenance.composition).unwrap_or_default(),
            params: Some(last),
            seed: Some(seed),
            box_prompt: None,
            no_object: false,
            stages: timer.0,
        };
        Ok(ModifierResult {
            reference: out.clone(),
            syn: out,
            seg: prior.map(|p| p.seg.clone()).unwrap_or_else(|| MaskImage::empty(w, h)),
            removed_meshes: prior.map(|p| p.removed_meshes.clone()).unwrap_or_default(),
            provenance,
        })
    }
}
