use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::edges::GradientEdges;
use super::mock::MockModels;
use super::remote::{InflightLimiter, RemoteEndpoint};
use super::{AdapterError, Capability, ModelSuite, Result, DEFAULT_EMBEDDING_DIM};

/// Environment variables `MEMOVIS_ENDPOINT_<CAPABILITY>` override the table:
/// the value `mock` selects the mock, anything else is a remote URL.
pub const ENV_PREFIX: &str = "MEMOVIS_ENDPOINT_";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointMode {
    #[default]
    Mock,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub mode: EndpointMode,
    pub url: Option<String>,
    pub timeout_secs: f64,
    /// Declared embedding width, for the embedding capabilities.
    pub dim: Option<usize>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            mode: EndpointMode::Mock,
            url: None,
            timeout_secs: 120.0,
            dim: None,
        }
    }
}

impl EndpointConfig {
    pub fn remote(url: impl Into<String>) -> Self {
        Self {
            mode: EndpointMode::Remote,
            url: Some(url.into()),
            ..Self::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn validate(&self, capability: Capability) -> Result<()> {
        let err = |m: String| Err(AdapterError::Config(format!("{capability}: {m}")));
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return err(format!("timeout {} must be positive", self.timeout_secs));
        }
        if self.dim == Some(0) {
            return err("dim must be positive".into());
        }
        if self.mode == EndpointMode::Remote {
            let Some(url) = &self.url else {
                return err("remote mode needs a url".into());
            };
            match reqwest::Url::parse(url) {
                Ok(u) if matches!(u.scheme(), "http" | "https") && u.host().is_some() => {}
                Ok(u) => return err(format!("url scheme {} is not http(s)", u.scheme())),
                Err(e) => return err(format!("bad url {url:?}: {e}")),
            }
        }
        Ok(())
    }
}

/// Capability to endpoint mapping. Capabilities without an entry use mocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointTable {
    /// Cap on concurrent remote calls across all capabilities.
    pub max_inflight: usize,
    pub endpoints: BTreeMap<Capability, EndpointConfig>,
}

impl Default for EndpointTable {
    fn default() -> Self {
        Self {
            max_inflight: 2,
            endpoints: BTreeMap::new(),
        }
    }
}

impl EndpointTable {
    pub fn get(&self, capability: Capability) -> EndpointConfig {
        self.endpoints.get(&capability).cloned().unwrap_or_default()
    }

    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let capability = Capability::parse(name).ok_or_else(|| {
                AdapterError::Config(format!("unknown capability in {}", key.as_ref()))
            })?;
            let entry = self.endpoints.entry(capability).or_default();
            let value = value.as_ref().trim();
            if value.eq_ignore_ascii_case("mock") {
                entry.mode = EndpointMode::Mock;
            } else {
                entry.mode = EndpointMode::Remote;
                entry.url = Some(value.to_string());
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_inflight == 0 {
            return Err(AdapterError::Config("max_inflight must be at least 1".into()));
        }
        for (cap, cfg) in &self.endpoints {
            cfg.validate(*cap)?;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ModelSuite> {
        self.validate()?;
        let limiter = Arc::new(InflightLimiter::new(self.max_inflight));
        let remote = |cap: Capability| -> Result<Option<Arc<RemoteEndpoint>>> {
            let cfg = self.get(cap);
            Ok(match cfg.mode {
                EndpointMode::Mock => None,
                EndpointMode::Remote => Some(Arc::new(RemoteEndpoint::new(cap, &cfg, limiter.clone())?)),
            })
        };
        let mock_dim = |cap: Capability| self.get(cap).dim.unwrap_or(DEFAULT_EMBEDDING_DIM);
        let mut suite = ModelSuite::mock();
        suite.text = match remote(Capability::TextEmbedding)? {
            Some(r) => r,
            None => Arc::new(MockModels::new(mock_dim(Capability::TextEmbedding))),
        };
        suite.image = match remote(Capability::ImageEmbedding)? {
            Some(r) => r,
            None => Arc::new(MockModels::new(mock_dim(Capability::ImageEmbedding))),
        };
        suite.edges = match remote(Capability::EdgeExtraction)? {
            Some(r) => r,
            None => Arc::new(GradientEdges::default()),
        };
        if let Some(r) = remote(Capability::BoxSegmentation)? {
            suite.segmentation = r;
        }
        if let Some(r) = remote(Capability::DepthGeneration)? {
            suite.depth = r;
        }
        if let Some(r) = remote(Capability::DepthScribbleGeneration)? {
            suite.depth_scribble = r;
        }
        if let Some(r) = remote(Capability::Inpainting)? {
            suite.inpainting = r;
        }
        Ok(suite)
    }
}
