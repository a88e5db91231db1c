//! Run configuration: a TOML file whose every key has a default, so an empty
//! file (or none) gives the desk-scale study.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use moeaar::local_search::LambdaRule;
use moeaar::simulator::SourceKind;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RidgeL,
    Lasso,
    EnetL,
    MoeaarL0,
    MoeaarL1,
    MoeaarL2,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::RidgeL, Method::Lasso, Method::EnetL, Method::MoeaarL0, Method::MoeaarL1, Method::MoeaarL2];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RidgeL => "ridge-l",
            Method::Lasso => "lasso",
            Method::EnetL => "enet-l",
            Method::MoeaarL0 => "moeaar-l0",
            Method::MoeaarL1 => "moeaar-l1",
            Method::MoeaarL2 => "moeaar-l2",
        }
    }

    /// Penalty model name for the evolutionary variants.
    pub fn penalty_name(self) -> Option<&'static str> {
        match self {
            Method::MoeaarL0 => Some("l0"),
            Method::MoeaarL1 => Some("l1"),
            Method::MoeaarL2 => Some("l2L"),
            _ => None,
        }
    }
}

impl FromStr for Method {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown method {s:?} (expected one of ridge-l, lasso, enet-l, moeaar-l0, moeaar-l1, moeaar-l2)")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub n_sources: usize,
    pub n_sensors: usize,
    pub n_rois: usize,
    pub r_cortex: f64,
    /// Seed of the source-space layout, fixed across repeats.
    pub space_seed: u64,
    pub radii: [f64; 3],
    pub conductivities: [f64; 3],
    pub series_terms: usize,
    pub series_tol: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        let h = moeaar::HeadModel64::default();
        Self {
            n_sources: 500,
            n_sensors: 32,
            n_rois: 8,
            r_cortex: 0.8,
            space_seed: 1,
            radii: h.radii,
            conductivities: h.conductivities,
            series_terms: h.series_terms,
            series_tol: h.series_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub kinds: Vec<SourceKind>,
    pub snr: Vec<f64>,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    /// Gaussian spread; absent means twice the median grid spacing.
    pub spread: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let d = moeaar::simulator::SuiteOptions::<f64>::default();
        Self {
            kinds: d.kinds,
            snr: d.snr_levels,
            amplitude_min: d.amplitude_range.0,
            amplitude_max: d.amplitude_range.1,
            spread: d.spread,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicConfig {
    /// Number of log-spaced λ values searched by GCV.
    pub grid_size: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// ENET-L uses λ₂ = enet_l2_ratio · λ₁.
    pub enet_l2_ratio: f64,
}

impl Default for ClassicConfig {
    fn default() -> Self {
        Self { grid_size: 30, tol: 1e-7, max_iter: 20_000, enet_l2_ratio: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRuleName {
    L1Ratio,
    ModeMatched,
}

impl From<LambdaRuleName> for LambdaRule {
    fn from(r: LambdaRuleName) -> Self {
        match r {
            LambdaRuleName::L1Ratio => LambdaRule::L1Ratio,
            LambdaRuleName::ModeMatched => LambdaRule::ModeMatched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoeaarSettings {
    pub iterations: usize,
    pub crossover_fraction: f64,
    pub mutation_fraction: f64,
    pub sigma0_factor: f64,
    pub clamp_factor: f64,
    pub local_search: bool,
    pub lsts_max_iter: usize,
    pub lsts_tol: f64,
    pub lambda_rule: LambdaRuleName,
    pub inject_context: bool,
    pub lsts_roi_free: bool,
}

impl Default for MoeaarSettings {
    fn default() -> Self {
        let c = moeaar::coevolution::MoeaarConfig::<f64>::new(moeaar::PenaltyModel64::l0(), 0);
        Self {
            iterations: c.iterations,
            crossover_fraction: c.crossover_fraction,
            mutation_fraction: c.mutation_fraction,
            sigma0_factor: c.sigma0_factor,
            clamp_factor: c.clamp_factor,
            local_search: c.local_search,
            lsts_max_iter: c.lsts_max_iter,
            lsts_tol: c.lsts_tol,
            lambda_rule: match c.lambda_rule {
                LambdaRule::L1Ratio => LambdaRuleName::L1Ratio,
                LambdaRule::ModeMatched => LambdaRuleName::ModeMatched,
            },
            inject_context: c.inject_context,
            lsts_roi_free: c.lsts_roi_free,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; repeat `r` uses `seed + r` for both the suite and the solvers.
    pub seed: u64,
    pub repeat: usize,
    pub out: PathBuf,
    pub methods: Vec<Method>,
    /// Fill `runtime_ms` in results.csv. Off by default so the file is
    /// byte-reproducible; results.json always carries the timings.
    pub record_runtime: bool,
    pub head: HeadConfig,
    pub suite: SuiteConfig,
    pub classic: ClassicConfig,
    pub moeaar: MoeaarSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            repeat: 10,
            out: PathBuf::from("moeaar-out"),
            methods: Method::ALL.to_vec(),
            record_runtime: false,
            head: HeadConfig::default(),
            suite: SuiteConfig::default(),
            classic: ClassicConfig::default(),
            moeaar: MoeaarSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| BenchError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(BenchError::Usage(format!("config: {msg}")));
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.repeat == 0 {
            return bad("repeat must be at least 1");
        }
        if self.suite.kinds.is_empty() || self.suite.snr.is_empty() {
            return bad("the suite needs at least one kind and one snr level");
        }
        if self.suite.snr.iter().any(|&s| !(s >= 0.0)) {
            return bad("snr levels must be non-negative");
        }
        if !(self.suite.amplitude_min > 0.0 && self.suite.amplitude_min <= self.suite.amplitude_max) {
            return bad("amplitudes must satisfy 0 < min <= max");
        }
        if self.head.n_rois < 4 {
            return bad("the suite needs at least 4 ROIs");
        }
        if self.classic.grid_size == 0 || !(self.classic.tol > 0.0) || self.classic.max_iter == 0 {
            return bad("classic grid_size, tol and max_iter must be positive");
        }
        if !(self.classic.enet_l2_ratio >= 0.0) {
            return bad("enet_l2_ratio must be non-negative");
        }
        Ok(())
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}
