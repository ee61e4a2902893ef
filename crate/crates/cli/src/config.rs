//! Scenario configuration files. Every block rejects unknown keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumRollConfig {
    #[serde(rename = "N")]
    pub n: f64,
    pub g: f64,
    pub y0: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_y_max")]
    pub y_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    /// Write every `sample_every`-th step.
    #[serde(default = "one")]
    pub sample_every: usize,
    pub out: Option<PathBuf>,
    pub tolerance: Option<ToleranceOverride>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(default)]
    pub y_lo: f64,
    #[serde(default = "default_profile_hi")]
    pub y_hi: f64,
    #[serde(default = "default_profile_points")]
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffpotScanConfig {
    pub g: f64,
    pub y0: f64,
    #[serde(rename = "N_lo", default = "default_n_lo")]
    pub n_lo: f64,
    #[serde(rename = "N_hi", default = "default_n_hi")]
    pub n_hi: f64,
    #[serde(rename = "N_points", default = "default_n_points")]
    pub n_points: usize,
    #[serde(default = "default_chi_max")]
    pub chi_max: f64,
    #[serde(default = "default_chi_points")]
    pub chi_points: usize,
    #[serde(default = "default_scan_y_hi")]
    pub y_hi: f64,
    #[serde(default = "default_coarse")]
    pub y_coarse_points: usize,
    pub profile: Option<ProfileConfig>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<ToleranceOverride>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kz_min: f64,
    pub kz_max: f64,
    pub kz_count: usize,
    pub kperp_max: f64,
    pub kperp_count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchwingerConfig {
    pub e: f64,
    pub m: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub grid: GridConfig,
    pub t_end: f64,
    pub dt_out: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Initial occupancy of every mode.
    #[serde(default)]
    pub n_init: f64,
    /// Also write the per-mode CSV.
    #[serde(default)]
    pub modes: bool,
    pub out: Option<PathBuf>,
    pub tolerance: Option<ToleranceOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    GroundState,
    Thermal,
    InvertedOscillator,
    Qvlasov,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalityConfig {
    pub preset: Preset,
    pub t_end: f64,
    pub dt_out: f64,
    /// Oscillator frequency for the ground-state and thermal presets.
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub theta0: Option<f64>,
    pub kappa: Option<f64>,
    pub e: Option<f64>,
    pub m: Option<f64>,
    #[serde(rename = "E0")]
    pub e0: Option<f64>,
    pub kz: Option<Vec<f64>>,
    pub kperp: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<ToleranceOverride>,
}

fn one() -> usize {
    1
}
fn default_width() -> f64 {
    0.5
}
fn default_y_max() -> f64 {
    8.0
}
fn default_points() -> usize {
    1601
}
fn default_dt() -> f64 {
    0.01
}
fn default_profile_hi() -> f64 {
    3.0
}
fn default_profile_points() -> usize {
    301
}
fn default_n_lo() -> f64 {
    2.0
}
fn default_n_hi() -> f64 {
    200.0
}
fn default_n_points() -> usize {
    199
}
fn default_chi_max() -> f64 {
    100.0
}
fn default_chi_points() -> usize {
    400
}
fn default_scan_y_hi() -> f64 {
    5.0
}
fn default_coarse() -> usize {
    51
}
fn default_cutoff() -> f64 {
    20.0
}
fn default_omega() -> f64 {
    1.0
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("`{field}` must be a finite number > 0 (got {v})");
    }
    Ok(())
}

pub fn finite(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        bail!("`{field}` must be finite (got {v})");
    }
    Ok(())
}
