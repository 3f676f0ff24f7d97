//! Run configuration, read from TOML.
//!
//! Every section is optional and every key has a default, so an empty file
//! is a valid configuration. Unknown keys are rejected with their location.
//!
//! ```toml
//! seed = 0
//! output_dir = "out"
//!
//! [arch]
//! preset = "base"        # or "large"
//! # path = "arch.toml"   # full architecture description, replaces the preset
//! # blocks = 6           # transformer overrides applied on top
//!
//! [workload]
//! duration_s = 5.5
//! batch = 4
//! precision = "fp32"     # or "mixed"
//!
//! [memory]
//! optimizer = "adam"
//! mixed_scheme = "autocast"
//!
//! [device]
//! name = "a40"
//! reference = "a40"
//!
//! [[device.profiles]]
//! key = "orin"
//! name = "Jetson Orin"
//! memory_gb = 32.0
//! os_reserve_gb = 1.5
//! supports_mixed = true
//! anchors = [{ arch = "base", duration_s = 5.5, batch = 4, precision = "fp32", seconds = 0.6 }]
//!
//! [fl]
//! clients = 10
//! per_round = 10
//! rounds = 150
//!
//! [agg]
//! method = "loss_weighted"
//! alpha = 1.0
//!
//! [sim]
//! dim = 10
//!
//! [trend]
//! doubling_months = 18.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, Precision, WorkloadSpec};
use crate::archcost::FlopConvention;
use crate::device::{self, Anchor, DeviceProfile, GB};
use crate::error::{Error, Result};
use crate::fedagg::AggregationConfig;
use crate::trainprofile::{MixedScheme, Optimizer, TrainOptions};
use crate::trend::{DEFAULT_BASE_YEAR, DEFAULT_DOUBLING_MONTHS};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "FEDSPEECH_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub preset: String,
    pub path: Option<PathBuf>,
    pub blocks: Option<u64>,
    pub model_dim: Option<u64>,
    pub heads: Option<u64>,
    pub ffn_dim: Option<u64>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            preset: "base".into(),
            path: None,
            blocks: None,
            model_dim: None,
            heads: None,
            ffn_dim: None,
        }
    }
}

impl ArchConfig {
    pub fn resolve(&self) -> Result<ArchitectureSpec> {
        let mut arch = match &self.path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<ArchitectureSpec>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => ArchitectureSpec::preset(&self.preset)?,
        };
        if let Some(v) = self.blocks {
            arch.transformer.blocks = v;
        }
        if let Some(v) = self.model_dim {
            arch.transformer.model_dim = v;
        }
        if let Some(v) = self.heads {
            arch.transformer.heads = v;
        }
        if let Some(v) = self.ffn_dim {
            arch.transformer.ffn_dim = v;
        }
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub duration_s: f64,
    pub batch: u64,
    pub precision: Precision,
    pub sample_rate_hz: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            duration_s: 5.5,
            batch: 4,
            precision: Precision::Fp32,
            sample_rate_hz: WorkloadSpec::DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

impl WorkloadConfig {
    pub fn resolve(&self) -> Result<WorkloadSpec> {
        let w = WorkloadSpec {
            sample_rate_hz: self.sample_rate_hz,
            ..WorkloadSpec::new(self.duration_s, self.batch, self.precision)
        };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub optimizer: Optimizer,
    pub mixed_scheme: MixedScheme,
    pub flop_convention: FlopConvention,
    pub store_attention_scores: bool,
    /// Fixed κ instead of the reference calibration.
    pub kappa: Option<f64>,
}

impl MemoryConfig {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            optimizer: self.optimizer,
            mixed_scheme: self.mixed_scheme,
            cost: crate::archcost::CostOptions {
                convention: self.flop_convention,
                store_attention_scores: self.store_attention_scores,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    pub arch: String,
    pub duration_s: f64,
    pub batch: u64,
    pub precision: Precision,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfileConfig {
    pub key: String,
    pub name: String,
    pub memory_gb: f64,
    #[serde(default)]
    pub os_reserve_gb: f64,
    #[serde(default)]
    pub supports_mixed: bool,
    #[serde(default)]
    pub anchors: Vec<AnchorConfig>,
}

impl DeviceProfileConfig {
    pub fn resolve(&self) -> Result<DeviceProfile> {
        if !(self.memory_gb.is_finite() && self.memory_gb > 0.0 && self.os_reserve_gb >= 0.0) {
            return Err(Error::Config(format!("device '{}': memory sizes must be positive", self.key)));
        }
        let p = DeviceProfile {
            key: self.key.clone(),
            name: self.name.clone(),
            memory_total: (self.memory_gb * GB).round() as u64,
            os_reserve: (self.os_reserve_gb * GB).round() as u64,
            supports_mixed: self.supports_mixed,
            anchors: self
                .anchors
                .iter()
                .map(|a| Anchor::new(&a.arch, a.duration_s, a.batch, a.precision, a.seconds))
                .collect(),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub name: String,
    pub reference: String,
    /// Extra profiles; a key equal to a built-in replaces it.
    pub profiles: Vec<DeviceProfileConfig>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            name: "a40".into(),
            reference: "a40".into(),
            profiles: Vec::new(),
        }
    }
}

impl DeviceConfig {
    pub fn custom_profiles(&self) -> Result<Vec<DeviceProfile>> {
        self.profiles.iter().map(DeviceProfileConfig::resolve).collect()
    }

    pub fn lookup(&self, key: &str) -> Result<DeviceProfile> {
        device::lookup(key, &self.custom_profiles()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlConfig {
    pub clients: usize,
    pub per_round: usize,
    pub rounds: usize,
    pub batch: u64,
    pub local_epochs: u32,
    pub precision: Precision,
    pub round_overhead_s: f64,
    /// Manifest to partition; a generated corpus-scale manifest when absent.
    pub manifest: Option<PathBuf>,
    /// Per-client device keys, cycled over the clients. Empty means `device.name` for all.
    pub devices: Vec<String>,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            clients: 10,
            per_round: 10,
            rounds: 150,
            batch: 4,
            local_epochs: 1,
            precision: Precision::Fp32,
            round_overhead_s: 0.0,
            manifest: None,
            devices: Vec::new(),
        }
    }
}

/// Synthetic quadratic federated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub clients: usize,
    pub per_round: usize,
    pub rounds: usize,
    pub dim: usize,
    pub center: f64,
    pub spread: f64,
    pub learning_rate: f64,
    pub local_steps: u32,
    /// Move client 0 this far from the center along every coordinate.
    pub outlier_offset: Option<f64>,
    pub pre_training_loss: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            clients: 10,
            per_round: 10,
            rounds: 100,
            dim: 10,
            center: 5.0,
            spread: 1.0,
            learning_rate: 0.1,
            local_steps: 5,
            outlier_offset: None,
            pre_training_loss: false,
        }
    }
}

impl SimConfig {
    pub fn resolve(&self, seed: u64) -> Result<crate::fedagg::SyntheticFLConfig> {
        let mut cfg = crate::fedagg::SyntheticFLConfig::gaussian(self.clients, self.dim, self.center, self.spread, seed)?;
        cfg.per_round = self.per_round;
        cfg.rounds = self.rounds;
        cfg.learning_rate = self.learning_rate;
        cfg.local_steps = self.local_steps;
        cfg.pre_training_loss = self.pre_training_loss;
        if let (Some(offset), Some(first)) = (self.outlier_offset, cfg.optima.first_mut()) {
            first.iter_mut().for_each(|x| *x = self.center + offset);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrendConfig {
    pub base_year: f64,
    pub doubling_months: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        Self {
            base_year: DEFAULT_BASE_YEAR,
            doubling_months: DEFAULT_DOUBLING_MONTHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub arch: ArchConfig,
    pub workload: WorkloadConfig,
    pub memory: MemoryConfig,
    pub device: DeviceConfig,
    pub fl: FlConfig,
    pub agg: AggregationConfig,
    pub sim: SimConfig,
    pub trend: TrendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            arch: ArchConfig::default(),
            workload: WorkloadConfig::default(),
            memory: MemoryConfig::default(),
            device: DeviceConfig::default(),
            fl: FlConfig::default(),
            agg: AggregationConfig::default(),
            sim: SimConfig::default(),
            trend: TrendConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `explicit` if given, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    /// Validate everything that can be checked without running a command.
    pub fn validate(&self) -> Result<()> {
        self.arch.resolve()?;
        self.workload.resolve()?;
        self.agg.validate()?;
        self.device.custom_profiles()?;
        if let Some(k) = self.memory.kappa {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::Config(format!("memory.kappa must be >= 0, got {k}")));
            }
        }
        let fl = &self.fl;
        if fl.per_round == 0 || fl.per_round > fl.clients {
            return Err(Error::InvalidSampleSize {
                per_round: fl.per_round,
                total: fl.clients,
            });
        }
        if fl.rounds == 0 || fl.batch == 0 || fl.local_epochs == 0 {
            return Err(Error::Config("fl.rounds, fl.batch and fl.local_epochs must be >= 1".into()));
        }
        if !(self.trend.doubling_months.is_finite() && self.trend.doubling_months > 0.0) {
            return Err(Error::Config("trend.doubling_months must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn module_doc_example_parses() {
        let doc = include_str!("config.rs");
        let example: String = doc
            .lines()
            .take_while(|l| l.starts_with("//!"))
            .skip_while(|l| !l.contains("```toml"))
            .skip(1)
            .take_while(|l| !l.contains("```"))
            .map(|l| l.trim_start_matches("//!").trim_start_matches(' '))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::from_toml(&example).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.device.lookup("orin").unwrap().anchors.len(), 1);
        assert_eq!(cfg.agg.method, crate::fedagg::AggregationMethod::LossWeighted);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = RunConfig::from_toml("[workload]\nduration_s = 5.5\nbatchsize = 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("batchsize") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn overrides_apply_to_preset() {
        let cfg = RunConfig::from_toml("[arch]\npreset = \"large\"\nblocks = 2\n").unwrap();
        let arch = cfg.arch.resolve().unwrap();
        assert_eq!(arch.transformer.blocks, 2);
        assert_eq!(arch.transformer.model_dim, 1024);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "[workload]\nduration_s = 0.0\n",
            "[arch]\npreset = \"huge\"\n",
            "[fl]\nclients = 5\nper_round = 6\n",
            "[agg]\nalpha = -1.0\n",
            "[trend]\ndoubling_months = 0.0\n",
        ] {
            let cfg = RunConfig::from_toml(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn arch_file_replaces_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("arch.toml");
        let mut arch = ArchitectureSpec::base();
        arch.name = "tiny".into();
        arch.transformer.blocks = 1;
        std::fs::write(&path, toml::to_string(&arch).unwrap()).unwrap();
        let cfg = ArchConfig {
            path: Some(path),
            ..Default::default()
        };
        assert_eq!(cfg.resolve().unwrap(), arch);
    }
}
