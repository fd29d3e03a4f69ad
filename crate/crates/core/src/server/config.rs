use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chat::EndpointConfig;
use crate::predict::{Backend, ExtractMode, OracleBackend, Registry, RegistryOptions, RemoteBackend};
use crate::roofline::{load_peaks, MachinePeaks, NormRanges};
use crate::synth::{MetadataStore, OracleModel};

pub const ENV_PORT: &str = "COUNTERLENS_PORT";
pub const ENV_REMOTE_URL: &str = "COUNTERLENS_REMOTE_URL";
pub const ENV_API_KEY: &str = "COUNTERLENS_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("invalid server config: {0}")]
    Invalid(String),
}

/// One entry of the backend registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Oracle {
        id: String,
        /// Directory of `*.meta.json` sidecars; sources with an embedded
        /// metadata header need none.
        #[serde(default)]
        metadata_dir: Option<PathBuf>,
        /// `[[machine]]` TOML; built-in peaks when absent.
        #[serde(default)]
        peaks: Option<PathBuf>,
        #[serde(default)]
        model: Option<OracleModel>,
    },
    Remote {
        id: String,
        #[serde(flatten)]
        endpoint: EndpointConfig,
        /// Empty means any.
        #[serde(default)]
        architectures: Vec<String>,
        #[serde(default)]
        temperature: f64,
        /// Single-slot model servers must not receive overlapping calls.
        #[serde(default)]
        serialized: bool,
    },
}

impl BackendConfig {
    pub fn id(&self) -> &str {
        match self {
            BackendConfig::Oracle { id, .. } | BackendConfig::Remote { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Largest accepted `source`, in bytes.
    #[serde(default = "default_max_source_bytes")]
    pub max_source_bytes: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_health_ttl_ms")]
    pub health_ttl_ms: u64,
    /// Normalization ranges TOML; defaults when absent.
    #[serde(default)]
    pub ranges: Option<PathBuf>,
    #[serde(default)]
    pub extract_mode: ExtractMode,
    /// `["*"]` allows any origin; empty disables CORS headers.
    #[serde(default = "default_cors")]
    pub cors_origins: Vec<String>,
    #[serde(default)]
    pub default_backend: Option<String>,
    #[serde(default, rename = "backend")]
    pub backends: Vec<BackendConfig>,
}

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_max_source_bytes() -> usize {
    1 << 20
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_health_ttl_ms() -> u64 {
    5_000
}

fn default_cors() -> Vec<String> {
    vec!["*".into()]
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: default_host(),
            port: default_port(),
            max_source_bytes: default_max_source_bytes(),
            timeout_ms: default_timeout_ms(),
            health_ttl_ms: default_health_ttl_ms(),
            ranges: None,
            extract_mode: ExtractMode::Strict,
            cors_origins: default_cors(),
            default_backend: None,
            backends: vec![BackendConfig::Oracle { id: "oracle".into(), metadata_dir: None, peaks: None, model: None }],
        }
    }
}

impl ServerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServerConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File { path: path.display().to_string(), message: e.to_string() })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.ranges {
            fix(p);
        }
        for b in &mut self.backends {
            if let BackendConfig::Oracle { metadata_dir, peaks, .. } = b {
                metadata_dir.iter_mut().chain(peaks.iter_mut()).for_each(fix);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        if self.max_source_bytes == 0 {
            return Err(ConfigError::Invalid("max_source_bytes must be positive".into()));
        }
        if self.backends.is_empty() {
            return Err(ConfigError::Invalid("at least one [[backend]] is required".into()));
        }
        Ok(())
    }

    /// Applies the port and remote endpoint environment overrides.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(p) = get(ENV_PORT) {
            self.port = p.trim().parse().map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={p} is not a port")))?;
        }
        let url = get(ENV_REMOTE_URL);
        let key = get(ENV_API_KEY);
        for b in &mut self.backends {
            if let BackendConfig::Remote { endpoint, .. } = b {
                if let Some(u) = &url {
                    endpoint.url = u.clone();
                }
                if let Some(k) = &key {
                    endpoint.api_key = Some(k.clone());
                }
            }
        }
        Ok(())
    }

    pub fn norm_ranges(&self) -> Result<NormRanges, ConfigError> {
        match &self.ranges {
            None => Ok(NormRanges::default()),
            Some(p) => NormRanges::load(p)
                .map_err(|e| ConfigError::File { path: p.display().to_string(), message: e.to_string() }),
        }
    }

    pub fn registry(&self) -> Result<Registry, ConfigError> {
        let ranges = self.norm_ranges()?;
        let mut backends: Vec<Arc<dyn Backend>> = Vec::new();
        for b in &self.backends {
            match b {
                BackendConfig::Oracle { id, metadata_dir, peaks, model } => {
                    let store = match metadata_dir {
                        Some(dir) => MetadataStore::load_dir(dir).map_err(|e| ConfigError::File {
                            path: dir.display().to_string(),
                            message: e.to_string(),
                        })?,
                        None => MetadataStore::new(),
                    };
                    let peaks = match peaks {
                        Some(p) => load_peaks(p)
                            .map_err(|e| ConfigError::File { path: p.display().to_string(), message: e.to_string() })?,
                        None => MachinePeaks::builtin_architectures()
                            .iter()
                            .filter_map(|a| MachinePeaks::builtin(a))
                            .collect(),
                    };
                    let model = model.clone().unwrap_or_default();
                    backends.push(Arc::new(OracleBackend::new(id.clone(), store, model, peaks, ranges.clone())));
                }
                BackendConfig::Remote { id, endpoint, architectures, temperature, serialized } => {
                    let remote = RemoteBackend::new(
                        id.clone(),
                        endpoint.clone(),
                        architectures.clone(),
                        *temperature,
                        *serialized,
                    )
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    backends.push(Arc::new(remote));
                }
            }
        }
        let options = RegistryOptions {
            ranges,
            mode: self.extract_mode,
            timeout: Duration::from_millis(self.timeout_ms),
            health_ttl: Duration::from_millis(self.health_ttl_ms),
        };
        Registry::new(backends, self.default_backend.as_deref(), options)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
