//! Settings resolution: defaults, then environment, then config file, then
//! flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use coqex_core::providers::{ProviderMode, ENV_ENDPOINT, ENV_TIMEOUT_MS};
use coqex_core::{PipelineConfig, RankingStrategy, Strategy};
use serde::Deserialize;

use crate::cli::SettingsArgs;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub strategy: Option<String>,
    pub alpha: Option<f64>,
    pub similarity_threshold: Option<f64>,
    pub explanation_strategy: Option<String>,
    pub k: Option<usize>,
    pub provider: Option<String>,
    pub endpoint: Option<String>,
    pub timeout_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub allow_degrade: Option<bool>,
    pub cache_dir: Option<PathBuf>,
    pub similarity_table: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        toml::from_str(&raw).map_err(|e| format!("config {}: {e}", path.display()))
    }
}

/// Environment values that feed the resolution.
#[derive(Debug, Default, Clone)]
pub struct Env {
    pub endpoint: Option<String>,
    pub timeout_ms: Option<String>,
}

impl Env {
    pub fn from_process() -> Self {
        Env {
            endpoint: std::env::var(ENV_ENDPOINT).ok().filter(|s| !s.trim().is_empty()),
            timeout_ms: std::env::var(ENV_TIMEOUT_MS).ok().filter(|s| !s.trim().is_empty()),
        }
    }
}

fn parse<T: std::str::FromStr<Err = String>>(value: Option<&String>, default: T) -> Result<T, String> {
    value.map_or(Ok(default), |v| v.parse())
}

pub fn resolve(args: &SettingsArgs, env: &Env) -> Result<PipelineConfig, String> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut config = PipelineConfig::default();
    let provider = &mut config.provider;

    let env_timeout = env
        .timeout_ms
        .as_deref()
        .map(|v| v.trim().parse::<u64>().map_err(|_| format!("{ENV_TIMEOUT_MS}: not a number of milliseconds: {v:?}")))
        .transpose()?;
    let endpoint = args.endpoint.clone().or(file.endpoint).or_else(|| env.endpoint.clone());
    let timeout_ms = args.timeout_ms.or(file.timeout_ms).or(env_timeout);

    config.strategy = parse::<Strategy>(args.strategy.as_ref().or(file.strategy.as_ref()), Strategy::default())?;
    config.explanation_strategy = parse::<RankingStrategy>(
        args.explanation_strategy.as_ref().or(file.explanation_strategy.as_ref()),
        RankingStrategy::default(),
    )?;
    if let Some(alpha) = args.alpha.or(file.alpha) {
        config.context.alpha = alpha;
    }
    if let Some(t) = args.similarity_threshold.or(file.similarity_threshold) {
        config.context.similarity_threshold = t;
    }
    if let Some(k) = args.k.or(file.k) {
        config.k = k;
    }
    provider.mode = parse::<ProviderMode>(args.provider.as_ref().or(file.provider.as_ref()), ProviderMode::Offline)?;
    provider.endpoint = match provider.mode {
        ProviderMode::Remote => endpoint,
        ProviderMode::Offline => {
            if endpoint.is_some() {
                log::debug!("endpoint ignored with the offline provider");
            }
            None
        }
    };
    if let Some(ms) = timeout_ms {
        if ms == 0 {
            return Err("timeout must be positive".into());
        }
        provider.timeout = Duration::from_millis(ms);
    }
    if let Some(n) = args.max_in_flight.or(file.max_in_flight) {
        provider.max_in_flight = n;
    }
    provider.allow_degrade = args.allow_degrade || file.allow_degrade.unwrap_or(false);
    provider.cache_dir = args.cache_dir.clone().or(file.cache_dir);
    provider.similarity_table = args.similarity_table.clone().or(file.similarity_table);
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}
