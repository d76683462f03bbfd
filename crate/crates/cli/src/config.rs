use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use streetclear::pipeline::DEFAULT_GAMMA;

/// Settings read from `--config`. Every field is optional; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gamma: Option<f64>,
    pub dilation: Option<usize>,
    pub spec: Option<PathBuf>,
    /// Manifest path, or `"fallback"` for harmonic diffusion.
    pub weights: Option<String>,
    pub fallback_on_missing: Option<bool>,
    pub out_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: FileConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(g) = cfg.gamma {
            check_gamma(g).map_err(|e| crate::CliError::Usage(format!("config {}: {e}", path.display())))?;
        }
        Ok(cfg)
    }
}

/// Resolved pipeline settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub gamma: f64,
    pub dilation: usize,
    pub spec: Option<PathBuf>,
    pub weights: String,
    pub fallback_on_missing: bool,
    pub out_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn merge(file: &FileConfig, flags: &crate::cli::StageFlags) -> Self {
        PipelineConfig {
            gamma: flags.gamma.or(file.gamma).unwrap_or(DEFAULT_GAMMA),
            dilation: flags.dilation.or(file.dilation).unwrap_or(0),
            spec: flags.spec.clone().or_else(|| file.spec.clone()),
            weights: flags
                .weights
                .clone()
                .or_else(|| file.weights.clone())
                .unwrap_or_else(|| "fallback".into()),
            fallback_on_missing: flags.fallback_on_missing || file.fallback_on_missing.unwrap_or(false),
            out_dir: file.out_dir.clone(),
            report: file.report.clone(),
        }
    }
}

pub fn check_gamma(g: f64) -> Result<f64, String> {
    if g > 0.0 && g <= 1.0 {
        Ok(g)
    } else {
        Err(format!("gamma must lie in (0, 1], got {g}"))
    }
}

pub fn parse_gamma(s: &str) -> Result<f64, String> {
    let g: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    check_gamma(g)
}
