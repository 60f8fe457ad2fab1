//! Blocking HTTP client for one model endpoint. See [`super::wire`] for the
//! request and response layout.

use std::sync::{Condvar, Mutex, OnceLock};
use std::sync::Arc;
use std::time::Duration;

use reqwest::blocking::multipart::{Form, Part};

use super::{
    wire, AdapterError, BoxPrompt, Capability, EdgeBackend, EndpointConfig, GenerationBackend,
    GenerationRequest, ImageEmbedder, Result, ScoredRegion, SegmentationBackend, TextEmbedder,
    DEFAULT_EMBEDDING_DIM,
};
use crate::raster::{MaskImage, RgbImage};

/// Counting semaphore bounding concurrent remote calls.
#[derive(Debug)]
pub struct InflightLimiter {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct InflightGuard<'a>(&'a InflightLimiter);

impl InflightLimiter {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InflightGuard<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.max {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InflightGuard(self)
    }

    pub fn active(&self) -> usize {
        *self.active.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Drop for InflightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteEndpoint {
    capability: Capability,
    url: reqwest::Url,
    timeout: Duration,
    dim: usize,
    limiter: Arc<InflightLimiter>,
    // Built on first use so construction never happens on an async thread.
    client: OnceLock<reqwest::blocking::Client>,
}

impl std::fmt::Debug for RemoteEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEndpoint")
            .field("capability", &self.capability)
            .field("url", &self.url.as_str())
            .finish()
    }
}

impl RemoteEndpoint {
    pub fn new(capability: Capability, cfg: &EndpointConfig, limiter: Arc<InflightLimiter>) -> Result<Self> {
        cfg.validate(capability)?;
        let url = cfg
            .url
            .as_deref()
            .ok_or_else(|| AdapterError::Config(format!("{capability}: remote mode needs a url")))?;
        let url = reqwest::Url::parse(url).map_err(|e| AdapterError::Config(e.to_string()))?;
        Ok(Self {
            capability,
            url,
            timeout: cfg.timeout(),
            dim: cfg.dim.unwrap_or(DEFAULT_EMBEDDING_DIM),
            limiter,
            client: OnceLock::new(),
        })
    }

    pub fn capability(&self) -> Capability {
        self.capability
    }

    fn client(&self) -> Result<&reqwest::blocking::Client> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| self.transport(e))?;
        Ok(self.client.get_or_init(|| client))
    }

    fn transport(&self, e: reqwest::Error) -> AdapterError {
        if e.is_timeout() {
            AdapterError::Timeout {
                capability: self.capability,
            }
        } else {
            AdapterError::Transport {
                capability: self.capability,
                message: e.to_string(),
            }
        }
    }

    fn post(&self, parts: Vec<(&'static str, Vec<u8>, bool)>) -> Result<Vec<u8>> {
        let mut form = Form::new();
        for (name, bytes, is_png) in parts {
            let part = if is_png {
                Part::bytes(bytes)
                    .file_name(format!("{name}.png"))
                    .mime_str("image/png")
            } else {
                Part::bytes(bytes).mime_str("application/json")
            }
            .map_err(|e| self.transport(e))?;
            form = form.part(name, part);
        }
        let client = self.client()?;
        let _slot = self.limiter.acquire();
        let response = client
            .post(self.url.clone())
            .multipart(form)
            .send()
            .map_err(|e| self.transport(e))?;
        let status = response.status();
        let body = response.bytes().map_err(|e| self.transport(e))?;
        if !status.is_success() {
            let snippet = String::from_utf8_lossy(&body[..body.len().min(200)]).into_owned();
            return Err(AdapterError::Transport {
                capability: self.capability,
                message: format!("HTTP {status}: {snippet}"),
            });
        }
        Ok(body.to_vec())
    }

    fn malformed(&self, message: impl ToString) -> AdapterError {
        AdapterError::MalformedResponse {
            capability: self.capability,
            message: message.to_string(),
        }
    }
}

impl TextEmbedder for RemoteEndpoint {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        let query = serde_json::to_vec(&wire::TextQuery { text: text.to_string() })
            .expect("query serializes");
        let body = self.post(vec![(wire::PART_PARAMS, query, false)])?;
        wire::decode_embedding_response(self.capability, &body)
    }
}

impl ImageEmbedder for RemoteEndpoint {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &RgbImage) -> Result<Vec<f32>> {
        let body = self.post(vec![(wire::PART_IMAGE, image.to_png()?, true)])?;
        wire::decode_embedding_response(self.capability, &body)
    }
}

impl EdgeBackend for RemoteEndpoint {
    fn edges(&self, image: &RgbImage) -> Result<MaskImage> {
        let body = self.post(vec![(wire::PART_IMAGE, image.to_png()?, true)])?;
        MaskImage::from_png(&body).map_err(|e| self.malformed(e))
    }
}

impl SegmentationBackend for RemoteEndpoint {
    fn segment(&self, image: &RgbImage, prompt: &BoxPrompt) -> Result<Vec<ScoredRegion>> {
        let params = serde_json::to_vec(prompt).expect("box serializes");
        let body = self.post(vec![
            (wire::PART_IMAGE, image.to_png()?, true),
            (wire::PART_PARAMS, params, false),
        ])?;
        wire::decode_segmentation_response(&body, image.dims())
    }
}

impl GenerationBackend for RemoteEndpoint {
    fn generate(&self, request: GenerationRequest<'_>) -> Result<RgbImage> {
        if request.capability() != self.capability {
            return Err(AdapterError::InvalidInput(format!(
                "{} request sent to {} endpoint",
                request.capability(),
                self.capability
            )));
        }
        let params = wire::encode_params(request.params()).into_bytes();
        let mut parts = match request {
            GenerationRequest::Depth { depth, .. } => vec![(wire::PART_DEPTH, depth.to_png()?, true)],
            GenerationRequest::DepthScribble { depth, scribble, .. } => vec![
                (wire::PART_DEPTH, depth.to_png()?, true),
                (wire::PART_SCRIBBLE, scribble.to_png()?, true),
            ],
            GenerationRequest::Inpaint { image, mask, .. } => vec![
                (wire::PART_IMAGE, image.to_png()?, true),
                (wire::PART_MASK, mask.to_png()?, true),
            ],
        };
        parts.push((wire::PART_PARAMS, params, false));
        let body = self.post(parts)?;
        RgbImage::from_png(&body).map_err(|e| self.malformed(e))
    }
}

#[cfg(test)]
mod tests {
    use std::thread;

    use super::*;

    #[test]
    fn limiter_caps_concurrency() {
        let limiter = Arc::new(InflightLimiter::new(2));
        let peak = Arc::new(Mutex::new(0usize));
        let handles: Vec<_> = (0..6)
            .map(|_| {
                let limiter = limiter.clone();
                let peak = peak.clone();
                thread::spawn(move || {
                    let _g = limiter.acquire();
                    let now = limiter.active();
                    let mut p = peak.lock().unwrap();
                    *p = (*p).max(now);
                    drop(p);
                    thread::sleep(Duration::from_millis(20));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(*peak.lock().unwrap() <= 2);
        assert_eq!(limiter.active(), 0);
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let cfg = EndpointConfig {
            timeout_secs: 2.0,
            ..EndpointConfig::remote("http://127.0.0.1:9/none")
        };
        let ep = RemoteEndpoint::new(Capability::TextEmbedding, &cfg, Arc::new(InflightLimiter::new(1))).unwrap();
        let err = ep.embed_text("desk").unwrap_err();
        assert!(
            matches!(err, AdapterError::Transport { .. } | AdapterError::Timeout { .. }),
            "{err}"
        );
    }
}
