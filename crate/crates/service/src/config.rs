//! Service configuration, read from a TOML file with environment overrides.
//!
//! ```toml
//! data_dir = "memovis-data"
//! port = 8740
//! k = 4
//! r_th = 0.7
//! stride = 4
//! steps = 30
//!
//! [viewport]
//! width = 512
//! height = 512
//!
//! [strengths]
//! depth = 0.3
//! scribble = 0.7
//!
//! [endpoints.inpainting]
//! mode = "remote"
//! url = "http://gpu-box:7860/inpaint"
//! ```

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use memovis_core::adapters::{
    AdapterError, Capability, EndpointConfig, EndpointTable, GenerationParams, ModelSuite,
    DEFAULT_DEPTH_STRENGTH, DEFAULT_NEGATIVE_PROMPT, DEFAULT_POSITIVE_SUFFIX,
    DEFAULT_SCRIBBLE_STRENGTH, DEFAULT_STEPS,
};
use memovis_core::compositor::{DEFAULT_R_TH, DEFAULT_SAMPLE_STRIDE};
use memovis_core::viewpoint::{SamplingConfig, DEFAULT_K, DEFAULT_THUMBNAIL_SIZE};
use memovis_core::RenderConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8740;
pub const ENV_DATA_DIR: &str = "MEMOVIS_DATA_DIR";
pub const ENV_PORT: &str = "MEMOVIS_PORT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
    #[error("config key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error(transparent)]
    Endpoint(#[from] AdapterError),
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strengths {
    pub depth: f64,
    pub scribble: f64,
}

impl Default for Strengths {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH_STRENGTH,
            scribble: DEFAULT_SCRIBBLE_STRENGTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind: IpAddr,
    pub port: u16,
    /// Directory holding the built web UI; served at `/` when present.
    pub ui_dir: Option<PathBuf>,
    pub viewport: RenderConfig,
    pub sampling: SamplingConfig,
    /// Number of suggestions returned per query.
    pub k: usize,
    pub thumbnail_size: u32,
    pub r_th: f64,
    pub stride: u32,
    pub steps: u32,
    pub strengths: Strengths,
    pub positive_suffix: String,
    pub negative_prompt: String,
    /// Job worker threads.
    pub workers: usize,
    pub max_upload_mb: usize,
    /// Cap on concurrent calls to remote model endpoints.
    pub max_inflight: usize,
    pub endpoints: BTreeMap<Capability, EndpointConfig>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("memovis-data"),
            bind: IpAddr::from([127, 0, 0, 1]),
            port: DEFAULT_PORT,
            ui_dir: None,
            viewport: RenderConfig::default(),
            sampling: SamplingConfig::default(),
            k: DEFAULT_K,
            thumbnail_size: DEFAULT_THUMBNAIL_SIZE,
            r_th: DEFAULT_R_TH,
            stride: DEFAULT_SAMPLE_STRIDE,
            steps: DEFAULT_STEPS,
            strengths: Strengths::default(),
            positive_suffix: DEFAULT_POSITIVE_SUFFIX.to_string(),
            negative_prompt: DEFAULT_NEGATIVE_PROMPT.to_string(),
            workers: 2,
            max_upload_mb: 256,
            max_inflight: 2,
            endpoints: BTreeMap::new(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let vars: Vec<(String, String)> = vars.into_iter().collect();
        for (k, v) in &vars {
            match k.as_str() {
                ENV_DATA_DIR => self.data_dir = PathBuf::from(v),
                ENV_PORT => {
                    self.port = v
                        .parse()
                        .map_err(|_| invalid("port", format!("{ENV_PORT}={v:?} is not a port")))?
                }
                _ => {}
            }
        }
        let mut table = self.endpoint_table();
        table.apply_env(vars)?;
        self.endpoints = table.endpoints;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.viewport
            .validate()
            .map_err(|e| invalid("viewport", e.to_string()))?;
        self.sampling
            .validate()
            .map_err(|e| invalid("sampling", e.to_string()))?;
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if self.thumbnail_size == 0 || self.thumbnail_size > 2048 {
            return Err(invalid("thumbnail_size", "must be in 1..=2048"));
        }
        if !(self.r_th > 0.0 && self.r_th <= 1.0) {
            return Err(invalid("r_th", format!("{} outside (0, 1]", self.r_th)));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        if self.max_upload_mb == 0 {
            return Err(invalid("max_upload_mb", "must be at least 1"));
        }
        self.generation_params("probe")
            .validate()
            .map_err(|e| match e {
                AdapterError::InvalidParams(m) if m.contains("strength") => invalid("strengths", m),
                other => invalid("steps", other.to_string()),
            })?;
        self.endpoint_table().validate()?;
        Ok(())
    }

    pub fn endpoint_table(&self) -> EndpointTable {
        EndpointTable {
            max_inflight: self.max_inflight,
            endpoints: self.endpoints.clone(),
        }
    }

    pub fn build_models(&self) -> Result<ModelSuite, ConfigError> {
        Ok(self.endpoint_table().build()?)
    }

    /// Generation parameters for `prompt` with the configured defaults.
    pub fn generation_params(&self, prompt: &str) -> GenerationParams {
        GenerationParams {
            prompt: prompt.to_string(),
            positive_suffix: self.positive_suffix.clone(),
            negative_prompt: self.negative_prompt.clone(),
            steps: self.steps,
            condition_strengths: BTreeMap::from([
                ("depth".to_string(), self.strengths.depth),
                ("scribble".to_string(), self.strengths.scribble),
            ]),
            seed: None,
        }
    }
}
