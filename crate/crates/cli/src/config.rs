//! Service configuration from the environment.

use std::path::PathBuf;

use pandemic::scenario::DEFAULT_SEARCH_CAP;
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{var}: {message}")]
    Invalid { var: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub port: u16,
    /// Directory holding case-count CSVs that requests may name.
    pub data_dir: Option<PathBuf>,
    /// Most schedules one search may evaluate.
    pub search_cap: usize,
    /// MCMC seed for requests that do not set one.
    pub default_seed: u64,
    /// Allowed browser origin; `None` allows any.
    pub cors_origin: Option<String>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            data_dir: None,
            search_cap: DEFAULT_SEARCH_CAP,
            default_seed: mcmc::McmcConfig::default().seed,
            cors_origin: None,
        }
    }
}

/// Accepts 1 to 65535.
pub fn parse_port(s: &str) -> Result<u16, String> {
    match s.trim().parse::<u32>() {
        Ok(p) if (1..=65535).contains(&p) => Ok(p as u16),
        Ok(p) => Err(format!("port {p} outside 1-65535")),
        Err(_) => Err(format!("not a port number: {s:?}")),
    }
}

impl AppConfig {
    /// Reads `PPL_PORT`, `PPL_DATA_DIR`, `PPL_SEARCH_CAP`, `PPL_SEED` and
    /// `PPL_CORS_ORIGIN`; unset variables keep the defaults.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Some(v) = get("PPL_PORT") {
            c.port = parse_port(&v).map_err(|message| ConfigError::Invalid { var: "PPL_PORT", message })?;
        }
        if let Some(v) = get("PPL_DATA_DIR") {
            c.data_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = get("PPL_SEARCH_CAP") {
            c.search_cap = v.trim().parse().map_err(|_| ConfigError::Invalid {
                var: "PPL_SEARCH_CAP",
                message: format!("not a count: {v:?}"),
            })?;
        }
        if let Some(v) = get("PPL_SEED") {
            c.default_seed = v.trim().parse().map_err(|_| ConfigError::Invalid {
                var: "PPL_SEED",
                message: format!("not a seed: {v:?}"),
            })?;
        }
        c.cors_origin = get("PPL_CORS_ORIGIN").filter(|v| !v.is_empty());
        Ok(c)
    }
}
