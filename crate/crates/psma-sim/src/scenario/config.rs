//! Scenario configuration: the single declarative input of a run.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Multiple-access scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Power-domain sparse code multiple access: codebooks reused by up to
    /// `l_t` users per cell, separated by SIC inside a codebook.
    Psma,
    /// Sparse code multiple access: at most one user per codebook per cell.
    Scma,
    /// Power-domain NOMA on the bare subcarrier axis.
    Pdnoma,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Psma => "psma",
            Scheme::Scma => "scma",
            Scheme::Pdnoma => "pdnoma",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psma" => Ok(Scheme::Psma),
            "scma" => Ok(Scheme::Scma),
            "pdnoma" => Ok(Scheme::Pdnoma),
            other => Err(Error::InvalidConfig {
                field: "scheme".into(),
                reason: format!("unknown scheme `{other}` (expected psma|scma|pdnoma)"),
            }),
        }
    }
}

fn default_noise_power() -> f64 {
    1e-8
}
fn default_epsilon() -> f64 {
    1e-4
}
fn default_upsilon() -> f64 {
    1e-3
}
fn default_nu() -> f64 {
    0.1
}

/// All network-level parameters of one scenario.
///
/// The on-disk form is a UTF-8 JSON object whose keys match these field
/// names exactly; unknown keys are rejected. Solver tolerances and the noise
/// power may be omitted and take the documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of base stations; index 0 is the macro BS.
    pub num_bs: usize,
    /// Total number of users across all cells.
    pub num_users: usize,
    /// Number of subcarriers.
    pub num_subcarriers: usize,
    /// Number of codebooks drawn from the `C(num_subcarriers, codebook_size)`
    /// possible subcarrier subsets.
    pub num_codebooks: usize,
    /// Nonzero subcarriers per codebook.
    pub codebook_size: usize,
    /// Macro cell radius in meters.
    pub macro_radius: f64,
    /// Small cell radius in meters.
    pub small_radius: f64,
    /// Path-loss exponent; gains scale as `d^(2*path_loss_exponent)`.
    pub path_loss_exponent: f64,
    /// Per-BS transmit power budget in watts.
    pub p_max: Vec<f64>,
    /// Receiver noise power in watts.
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
    /// Maximum users superposed on one codebook per cell.
    pub l_t: usize,
    /// Maximum number of active codebook assignments touching one subcarrier
    /// per cell.
    pub k: usize,
    /// Scheme to simulate.
    pub scheme: Scheme,
    /// Base seed; all randomness derives from it.
    pub seed: u64,
    /// Inner (dual / surrogate) convergence tolerance.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Outer alternation convergence tolerance.
    #[serde(default = "default_upsilon")]
    pub upsilon: f64,
    /// Base step size for the budget-multiplier subgradient updates.
    #[serde(default = "default_nu")]
    pub nu1: f64,
    /// Base step size for the SIC-multiplier subgradient updates.
    #[serde(default = "default_nu")]
    pub nu2: f64,
}

/// Number of distinct `u`-subsets of `n` items, saturating at `u64::MAX`.
pub(crate) fn binomial(n: usize, u: usize) -> u64 {
    if u > n {
        return 0;
    }
    let u = u.min(n - u);
    let mut acc: u128 = 1;
    for i in 0..u {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

impl ScenarioConfig {
    /// Check every structural invariant, reporting the offending field.
    pub fn validate(&self) -> Result<()> {
        fn invalid(field: &str, reason: String) -> Error {
            Error::InvalidConfig {
                field: field.into(),
                reason,
            }
        }
        if self.num_bs < 1 {
            return Err(invalid("num_bs", "need at least one base station".into()));
        }
        if self.num_users < 1 {
            return Err(invalid("num_users", "need at least one user".into()));
        }
        if self.num_subcarriers < 1 {
            return Err(invalid(
                "num_subcarriers",
                "need at least one subcarrier".into(),
            ));
        }
        if self.codebook_size == 0 || self.codebook_size > self.num_subcarriers {
            return Err(invalid(
                "codebook_size",
                format!(
                    "codebook_size {} must be in 1..={}",
                    self.codebook_size, self.num_subcarriers
                ),
            ));
        }
        let max_codebooks = binomial(self.num_subcarriers, self.codebook_size);
        if self.num_codebooks == 0 || self.num_codebooks as u64 > max_codebooks {
            return Err(invalid(
                "num_codebooks",
                format!(
                    "num_codebooks {} must be in 1..={} for {} subcarriers taken {}",
                    self.num_codebooks, max_codebooks, self.num_subcarriers, self.codebook_size
                ),
            ));
        }
        if self.l_t < 1 {
            return Err(invalid("l_t", "need l_t >= 1".into()));
        }
        if self.k < 1 {
            return Err(invalid("k", "need k >= 1".into()));
        }
        if !(self.macro_radius > 0.0) {
            return Err(invalid("macro_radius", "radius must be > 0".into()));
        }
        if !(self.small_radius > 0.0) {
            return Err(invalid("small_radius", "radius must be > 0".into()));
        }
        if self.p_max.len() != self.num_bs {
            return Err(invalid(
                "p_max",
                format!("expected {} entries, got {}", self.num_bs, self.p_max.len()),
            ));
        }
        if self.p_max.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid("p_max", "budgets must be finite and >= 0".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(invalid("noise_power", "noise power must be > 0".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "tolerance must be > 0".into()));
        }
        if !(self.upsilon > 0.0) {
            return Err(invalid("upsilon", "tolerance must be > 0".into()));
        }
        if !(self.nu1 > 0.0) {
            return Err(invalid("nu1", "step size must be > 0".into()));
        }
        if !(self.nu2 > 0.0) {
            return Err(invalid("nu2", "step size must be > 0".into()));
        }
        if !self.path_loss_exponent.is_finite() {
            return Err(invalid("path_loss_exponent", "must be finite".into()));
        }
        Ok(())
    }

    /// Largest per-BS budget; used to normalize convergence thresholds.
    pub fn p_ref(&self) -> f64 {
        self.p_max
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }
}

/// Parse a scenario from its JSON text.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Load and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text)
}
