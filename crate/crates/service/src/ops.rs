//! Operations shared by the HTTP service and the command line driver.

use std::sync::Arc;

use memovis_core::adapters::{BoxIntent, ModelSuite, PixelBox};
use memovis_core::compositor::{
    CompositorError, GrabRequest, ModifierKind, ModifierResult, ModifierSession, StrokeSet,
};
use memovis_core::scene::SceneError;
use memovis_core::viewpoint::{
    build_index, suggest_views, IndexError, SamplingConfig, ViewSuggestion, ViewpointIndex,
};
use memovis_core::{SceneModel, Viewpoint};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ServiceConfig;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Compositor(#[from] CompositorError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl OpError {
    /// True when the request itself is at fault.
    pub fn is_validation(&self) -> bool {
        match self {
            OpError::Validation(_) | OpError::Scene(_) => true,
            OpError::Compositor(e) => e.is_validation(),
            OpError::Index(e) => matches!(
                e,
                IndexError::InvalidConfig(_)
                    | IndexError::EmptyText
                    | IndexError::InvalidK
                    | IndexError::Format(_)
                    | IndexError::StaleIndex
                    | IndexError::Scene(_)
            ),
        }
    }
}

/// One modifier invocation. `prompt` falls back to the comment text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModifierRequest {
    TextScribble {
        #[serde(default)]
        prompt: Option<String>,
        #[serde(default)]
        strokes: StrokeSet,
        #[serde(default)]
        seed: Option<u64>,
    },
    GrabNGo {
        #[serde(rename = "box")]
        rect: PixelBox,
        intent: BoxIntent,
        #[serde(default)]
        staging: bool,
    },
    TextPaint {
        #[serde(default)]
        prompt: Option<String>,
        #[serde(default)]
        strokes: StrokeSet,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl ModifierRequest {
    pub fn kind(&self) -> ModifierKind {
        match self {
            ModifierRequest::TextScribble { .. } => ModifierKind::TextScribble,
            ModifierRequest::GrabNGo { .. } => ModifierKind::GrabNGo,
            ModifierRequest::TextPaint { .. } => ModifierKind::TextPaint,
        }
    }

    /// Builds a request of `kind` from a payload without the `kind` tag.
    pub fn from_payload(kind: ModifierKind, payload: serde_json::Value) -> Result<Self, OpError> {
        let mut payload = match payload {
            serde_json::Value::Object(map) => map,
            serde_json::Value::Null => serde_json::Map::new(),
            _ => return Err(OpError::Validation("payload must be a JSON object".into())),
        };
        payload.insert("kind".into(), kind.as_str().into());
        serde_json::from_value(serde_json::Value::Object(payload))
            .map_err(|e| OpError::Validation(format!("bad {} payload: {e}", kind.as_str())))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, OpError> {
        serde_json::from_slice(bytes).map_err(|e| OpError::Validation(format!("bad modifier request: {e}")))
    }

    /// A prior result is required for grab'n go and optional for paint.
    pub fn needs_prior(&self) -> bool {
        matches!(self, ModifierRequest::GrabNGo { .. })
    }

    /// Checks everything that can be checked before running: geometry
    /// against the viewport, the prior result and the prompt.
    pub fn check(&self, width: u32, height: u32, has_prior: bool, comment_text: &str) -> Result<(), OpError> {
        let prompt_ok = |prompt: &Option<String>| {
            let text = prompt.as_deref().unwrap_or(comment_text);
            if text.trim().is_empty() {
                Err(OpError::Validation(
                    "prompt is empty: give a prompt or write the comment first".into(),
                ))
            } else {
                Ok(())
            }
        };
        match self {
            ModifierRequest::TextScribble { prompt, strokes, .. } => {
                strokes.validate(width, height)?;
                prompt_ok(prompt)
            }
            ModifierRequest::GrabNGo { rect, .. } => {
                rect.validate(width, height)
                    .map_err(|e| OpError::Validation(e.to_string()))?;
                if !has_prior {
                    return Err(OpError::Validation(
                        "grab-n-go needs a prior result to select from".into(),
                    ));
                }
                Ok(())
            }
            ModifierRequest::TextPaint { prompt, strokes, .. } => {
                if strokes.is_empty() {
                    return Err(OpError::Validation("text-paint needs paint strokes".into()));
                }
                strokes.validate(width, height)?;
                if strokes.add_strokes.is_empty() {
                    Ok(())
                } else {
                    prompt_ok(prompt)
                }
            }
        }
    }
}

/// Builds the modifier session for an anchored view with the configured
/// viewport and removal settings.
pub fn modifier_session(
    scene: Arc<SceneModel>,
    anchor: Viewpoint,
    config: &ServiceConfig,
    models: ModelSuite,
) -> Result<ModifierSession, OpError> {
    Ok(ModifierSession::new(scene, anchor, config.viewport.clone(), models)?
        .with_removal(config.r_th, config.stride)?)
}

/// Runs one modifier. `comment_text` is the prompt when the request has none.
pub fn run_modifier(
    session: &ModifierSession,
    request: &ModifierRequest,
    prior: Option<&ModifierResult>,
    comment_text: &str,
    config: &ServiceConfig,
) -> Result<ModifierResult, OpError> {
    let (w, h) = session.dims();
    request.check(w, h, prior.is_some(), comment_text)?;
    let params = |prompt: &Option<String>, seed: &Option<u64>| {
        let mut p = config.generation_params(prompt.as_deref().unwrap_or(comment_text));
        p.seed = *seed;
        p
    };
    let result = match request {
        ModifierRequest::TextScribble { prompt, strokes, seed } => {
            session.run_text_scribble(strokes, &params(prompt, seed))?
        }
        ModifierRequest::GrabNGo { rect, intent, staging } => {
            let prior = prior.expect("checked above");
            let grab = GrabRequest {
                rect: *rect,
                intent: *intent,
                staging: *staging,
            };
            session.run_grab_n_go(prior, &grab)?
        }
        ModifierRequest::TextPaint { prompt, strokes, seed } => {
            session.run_text_paint(prior, strokes, &params(prompt, seed))?
        }
    };
    Ok(result)
}

/// Builds the viewpoint index of `scene` with the configured viewport.
pub fn build_scene_index(
    scene: &SceneModel,
    sampling: &SamplingConfig,
    config: &ServiceConfig,
    models: &ModelSuite,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<ViewpointIndex, OpError> {
    sampling
        .validate()
        .map_err(|e| OpError::Validation(e.to_string()))?;
    Ok(build_index(scene, sampling, &config.viewport, models, progress)?)
}

/// Top-`k` suggestions for `text`.
pub fn suggest(
    index: &ViewpointIndex,
    text: &str,
    k: usize,
    models: &ModelSuite,
) -> Result<Vec<ViewSuggestion>, OpError> {
    Ok(suggest_views(index, text, models, k)?)
}

#[cfg(test)]
mod tests {
    use memovis_core::compositor::Stroke;

    use super::*;

    #[test]
    fn requests_parse_with_kind_tag() {
        let r = ModifierRequest::from_json(
            br#"{"kind":"grab-n-go","box":{"left":1,"top":2,"right":5,"bottom":6},"intent":"remove"}"#,
        )
        .unwrap();
        assert_eq!(
            r,
            ModifierRequest::GrabNGo {
                rect: PixelBox { left: 1, top: 2, right: 5, bottom: 6 },
                intent: BoxIntent::Remove,
                staging: false
            }
        );
        assert!(r.needs_prior());
        let p = ModifierRequest::from_payload(
            ModifierKind::TextPaint,
            serde_json::json!({"strokes": {"add_strokes": [{"points": [[1.0, 2.0]], "radius": 3.0}]}}),
        )
        .unwrap();
        let ModifierRequest::TextPaint { strokes, prompt, seed } = p else { panic!() };
        assert_eq!(strokes.add_strokes, vec![Stroke::new(vec![[1.0, 2.0]], 3.0)]);
        assert_eq!((prompt, seed), (None, None));
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        for bad in [
            r#"{"kind":"lasso"}"#,
            r#"{"kind":"text-scribble","prompt":"x","strength":1}"#,
            r#"{"kind":"grab-n-go","intent":"keep"}"#,
            r#"[]"#,
        ] {
            let err = ModifierRequest::from_json(bad.as_bytes()).unwrap_err();
            assert!(err.is_validation(), "{bad}");
        }
        assert!(ModifierRequest::from_payload(ModifierKind::TextScribble, serde_json::json!(3)).is_err());
    }
}
