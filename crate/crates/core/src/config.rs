//! Experiment configuration read from TOML. Unknown keys are rejected.
//!
//! ```toml
//! [apparatus]
//! sagnac_visibility = 0.9992774
//! reflection = "i"
//! lc_label = "lc"
//! nim_label = "nim"
//!
//! [[apparatus.elements]]
//! label = "lc"
//! phase = [3.141592653589793, 0.0, 0.0]
//! amplitude_transmission = 1.0
//!
//! [[apparatus.elements]]
//! label = "nim"
//! phase = [-3.141592653589793, 0.0, 0.0]
//! amplitude_transmission = 0.36055512754639896
//!
//! [scan]
//! n_steps = 100
//! phase_start = 0.0
//! phase_end = 12.566370614359172
//! mean_counts_per_step = 20000.0
//! seed = 0
//! noise = "poisson"
//!
//! [campaign]
//! n_runs = 761
//! master_seed = 0
//! lc_systematic = false
//!
//! [analysis]
//! binning = "freedman-diaconis"   # or an integer bin count
//!
//! [sweep]
//! epsilons = [0.0, 0.001, 0.002, 0.003, 0.005, 0.0075, 0.01, 0.02, 0.05]
//! direction = [0.0, 1.0, 0.0]
//! n_runs = 200
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section and key is optional; missing values take the defaults above.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Binning;
use crate::hypercomplex::{PhaseVector, Quaternion};
use crate::interferometer::{InterferometerError, PhaseElement, SagnacModel};
use crate::photonsim::{NoiseModel, ScanConfig, ScanError, DEFAULT_MEAN_COUNTS, DEFAULT_STEPS};

/// Sagnac visibility for which commuting phases give a Mach-Zehnder
/// visibility of 0.038.
pub const DEFAULT_SAGNAC_VISIBILITY: f64 = 0.9992774;
pub const DEFAULT_NIM_INTENSITY_TRANSMISSION: f64 = 0.13;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid apparatus: {0}")]
    Apparatus(#[from] InterferometerError),
    #[error("invalid scan: {0}")]
    Scan(#[from] ScanError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReflectionSpec {
    /// `"i"`, `"j"` or `"k"`.
    Named(String),
    /// `[w, x, y, z]`
    Components([f64; 4]),
}

impl Default for ReflectionSpec {
    fn default() -> Self {
        Self::Named("i".into())
    }
}

impl ReflectionSpec {
    pub fn quaternion(&self) -> Result<Quaternion, ConfigError> {
        match self {
            Self::Named(name) => match name.as_str() {
                "i" => Ok(Quaternion::I),
                "j" => Ok(Quaternion::J),
                "k" => Ok(Quaternion::K),
                other => Err(ConfigError::Invalid(format!(
                    "reflection must be \"i\", \"j\", \"k\" or [w, x, y, z], got \"{other}\""
                ))),
            },
            Self::Components([w, x, y, z]) => Ok(Quaternion::new(*w, *x, *y, *z)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementConfig {
    pub label: String,
    /// `[phi1, phi2, phi3]` in radians.
    pub phase: [f64; 3],
    #[serde(default = "one")]
    pub amplitude_transmission: f64,
}

fn one() -> f64 {
    1.0
}

impl ElementConfig {
    fn element(&self) -> PhaseElement {
        let [a, b, c] = self.phase;
        PhaseElement::new(
            self.label.clone(),
            PhaseVector::new(a, b, c),
            self.amplitude_transmission,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApparatusConfig {
    pub sagnac_visibility: f64,
    pub reflection: ReflectionSpec,
    /// Element toggled between runs.
    pub lc_label: String,
    /// Element removed for the liquid-crystal-only configurations.
    pub nim_label: String,
    /// Clockwise order.
    pub elements: Vec<ElementConfig>,
}

impl Default for ApparatusConfig {
    fn default() -> Self {
        Self {
            sagnac_visibility: DEFAULT_SAGNAC_VISIBILITY,
            reflection: ReflectionSpec::default(),
            lc_label: "lc".into(),
            nim_label: "nim".into(),
            elements: vec![
                ElementConfig {
                    label: "lc".into(),
                    phase: [PI, 0.0, 0.0],
                    amplitude_transmission: 1.0,
                },
                ElementConfig {
                    label: "nim".into(),
                    phase: [-PI, 0.0, 0.0],
                    amplitude_transmission: DEFAULT_NIM_INTENSITY_TRANSMISSION.sqrt(),
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub n_steps: usize,
    pub phase_start: f64,
    pub phase_end: f64,
    pub mean_counts_per_step: f64,
    pub seed: u64,
    pub noise: NoiseModel,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_STEPS,
            phase_start: 0.0,
            phase_end: 4.0 * PI,
            mean_counts_per_step: DEFAULT_MEAN_COUNTS,
            seed: 0,
            noise: NoiseModel::Poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub n_runs: usize,
    pub master_seed: u64,
    /// Also run the liquid-crystal-only toggle (NIM removed).
    pub lc_systematic: bool,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            n_runs: 761,
            master_seed: 0,
            lc_systematic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinningSpec {
    Named(String),
    Bins(usize),
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self::Named("freedman-diaconis".into())
    }
}

impl BinningSpec {
    pub fn binning(&self) -> Result<Binning, ConfigError> {
        match self {
            Self::Named(n) if n == "freedman-diaconis" => Ok(Binning::FreedmanDiaconis),
            Self::Named(n) => Err(ConfigError::Invalid(format!(
                "binning must be \"freedman-diaconis\" or a bin count, got \"{n}\""
            ))),
            Self::Bins(0) => Err(ConfigError::Invalid("bin count must be positive".into())),
            Self::Bins(n) => Ok(Binning::Fixed(*n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub binning: BinningSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub direction: [f64; 3],
    pub n_runs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.0, 0.001, 0.002, 0.003, 0.005, 0.0075, 0.01, 0.02, 0.05],
            direction: [0.0, 1.0, 0.0],
            n_runs: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub apparatus: ApparatusConfig,
    pub scan: ScanSection,
    pub campaign: CampaignSection,
    pub analysis: AnalysisSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// Models derived from the apparatus description.
#[derive(Debug, Clone, PartialEq)]
pub struct Configurations {
    /// Every element active.
    pub both: SagnacModel,
    /// Liquid crystal switched off, metamaterial in place.
    pub nim_only: SagnacModel,
    /// Metamaterial removed, liquid crystal active.
    pub lc_only: SagnacModel,
    /// Metamaterial removed, liquid crystal off.
    pub none: SagnacModel,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let configs = self.configurations()?;
        self.scan_config().validate()?;
        if self.campaign.n_runs == 0 {
            return Err(ConfigError::Invalid("campaign.n_runs must be at least 1".into()));
        }
        if self.sweep.n_runs == 0 {
            return Err(ConfigError::Invalid("sweep.n_runs must be at least 1".into()));
        }
        let [a, b, c] = self.sweep.direction;
        if ((a * a + b * b + c * c).sqrt() - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid("sweep.direction must be a unit vector".into()));
        }
        if self.sweep.epsilons.iter().any(|e| !e.is_finite()) {
            return Err(ConfigError::Invalid("sweep.epsilons must be finite".into()));
        }
        self.analysis.binning.binning()?;
        let mut labels: Vec<_> = self.apparatus.elements.iter().map(|e| e.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid("element labels must be unique".into()));
        }
        drop(configs);
        Ok(())
    }

    pub fn apparatus_model(&self) -> Result<SagnacModel, ConfigError> {
        let a = &self.apparatus;
        Ok(SagnacModel::new(
            a.sagnac_visibility,
            a.reflection.quaternion()?,
            a.elements.iter().map(ElementConfig::element).collect(),
        )?)
    }

    pub fn configurations(&self) -> Result<Configurations, ConfigError> {
        let both = self.apparatus_model()?;
        let lc = &self.apparatus.lc_label;
        let nim = &self.apparatus.nim_label;
        let nim_only = both.switched_off(lc)?;
        let lc_only = both.without(nim)?;
        let none = lc_only.switched_off(lc)?;
        Ok(Configurations {
            both,
            nim_only,
            lc_only,
            none,
        })
    }

    pub fn scan_config(&self) -> ScanConfig {
        let s = &self.scan;
        ScanConfig {
            n_steps: s.n_steps,
            phase_start: s.phase_start,
            phase_end: s.phase_end,
            mean_counts_per_step: s.mean_counts_per_step,
            rng_seed: s.seed,
            noise: s.noise,
        }
    }

    pub fn sweep_direction(&self) -> PhaseVector {
        let [a, b, c] = self.sweep.direction;
        PhaseVector::new(a, b, c)
    }
}
