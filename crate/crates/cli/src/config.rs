//! The flat config file, its environment overrides, and resolution into
//! library settings.

use std::path::{Path, PathBuf};

use genattr::eval::{ExperimentConfig, ExperimentKind, Preset};
use genattr::optim::PlateauConfig;
use genattr::LossKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Prefix of environment variables overriding config keys, e.g.
/// `GENATTR_TRAIN_STEPS=500`.
pub const ENV_PREFIX: &str = "GENATTR_";

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

/// Every key is optional; anything unset falls back to the preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// Directory holding the four uncompressed MNIST IDX files.
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Trained autoencoders are reused from here across runs.
    pub cache_dir: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    /// Worker threads; 0 means one per core.
    pub jobs: Option<usize>,

    pub trials: Option<usize>,
    pub probes: Option<usize>,
    pub subset_size: Option<usize>,
    pub histogram_bins: Option<usize>,
    pub qualities: Option<Vec<u8>>,

    pub train_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub train_learning_rate: Option<f64>,
    /// Encoder widths, input first; the decoder mirrors them.
    pub layer_dims: Option<Vec<usize>>,
    pub train_loss: Option<LossKind>,

    pub restarts: Option<usize>,
    pub inversion_steps: Option<usize>,
    pub inversion_learning_rate: Option<f64>,
    pub inversion_loss: Option<LossKind>,
    /// Reduce-on-plateau shrink factor; 0 disables the scheduler.
    pub plateau_factor: Option<f64>,
    pub plateau_patience: Option<usize>,
    pub confidence_floor: Option<f64>,
}

pub const KEYS: &[&str] = &[
    "data_dir",
    "out",
    "cache_dir",
    "preset",
    "seed",
    "jobs",
    "trials",
    "probes",
    "subset_size",
    "histogram_bins",
    "qualities",
    "train_steps",
    "batch_size",
    "train_learning_rate",
    "layer_dims",
    "train_loss",
    "restarts",
    "inversion_steps",
    "inversion_learning_rate",
    "inversion_loss",
    "plateau_factor",
    "plateau_patience",
    "confidence_floor",
];

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Config built from `GENATTR_<KEY>` variables. Values are read as
    /// TOML (`GENATTR_QUALITIES="[90, 50]"`), falling back to a bare string.
    pub fn from_env(vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let mut table = toml::Table::new();
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                continue;
            }
            let parsed = format!("v = {value}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or(toml::Value::String(value));
            table.insert(key, parsed);
        }
        table.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("environment: {e}")))
    }

    /// Keys set in `over` replace those in `self`.
    pub fn merge(self, over: CliConfig) -> CliConfig {
        macro_rules! pick {
            ($($f:ident),*) => { CliConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            data_dir,
            out,
            cache_dir,
            preset,
            seed,
            jobs,
            trials,
            probes,
            subset_size,
            histogram_bins,
            qualities,
            train_steps,
            batch_size,
            train_learning_rate,
            layer_dims,
            train_loss,
            restarts,
            inversion_steps,
            inversion_learning_rate,
            inversion_loss,
            plateau_factor,
            plateau_patience,
            confidence_floor
        )
    }

    pub fn preset(&self) -> Preset {
        self.preset.unwrap_or(Preset::Paper)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from("data/mnist"))
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    /// Experiment settings: the preset, then every override.
    pub fn experiment(&self, kind: ExperimentKind) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::preset(kind, self.preset());
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src.clone() { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            seed => master_seed,
            trials => trials,
            probes => probes_per_generator,
            subset_size => subset_size,
            histogram_bins => histogram_bins,
            qualities => qualities,
            train_steps => train.steps,
            batch_size => train.batch_size,
            train_learning_rate => train.learning_rate,
            layer_dims => train.layer_dims,
            train_loss => train.loss_kind,
            restarts => inversion.restarts,
            inversion_steps => inversion.steps,
            inversion_learning_rate => inversion.learning_rate,
            inversion_loss => inversion.loss_kind,
            confidence_floor => inversion.confidence_floor,
        );
        match (self.plateau_factor, self.plateau_patience) {
            (Some(0.0), _) => cfg.inversion.scheduler = None,
            (None, None) => {}
            (f, p) => {
                let base = cfg.inversion.scheduler.unwrap_or_default();
                cfg.inversion.scheduler = Some(PlateauConfig {
                    factor: f.unwrap_or(base.factor),
                    patience: p.unwrap_or(base.patience),
                    ..base
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// This config with every key filled in from `cfg`, so the file alone
    /// reproduces the run.
    pub fn resolved(&self, cfg: &ExperimentConfig) -> CliConfig {
        let sched = cfg.inversion.scheduler;
        CliConfig {
            data_dir: Some(self.data_dir()),
            out: Some(self.out()),
            cache_dir: self.cache_dir.clone(),
            preset: Some(self.preset()),
            seed: Some(cfg.master_seed),
            jobs: Some(self.jobs.unwrap_or(0)),
            trials: Some(cfg.trials),
            probes: Some(cfg.probes_per_generator),
            subset_size: Some(cfg.subset_size),
            histogram_bins: Some(cfg.histogram_bins),
            qualities: Some(cfg.qualities.clone()),
            train_steps: Some(cfg.train.steps),
            batch_size: Some(cfg.train.batch_size),
            train_learning_rate: Some(cfg.train.learning_rate),
            layer_dims: Some(cfg.train.layer_dims.clone()),
            train_loss: Some(cfg.train.loss_kind),
            restarts: Some(cfg.inversion.restarts),
            inversion_steps: Some(cfg.inversion.steps),
            inversion_learning_rate: Some(cfg.inversion.learning_rate),
            inversion_loss: Some(cfg.inversion.loss_kind),
            plateau_factor: Some(sched.map_or(0.0, |s| s.factor)),
            plateau_patience: Some(sched.map_or(PlateauConfig::default().patience, |s| s.patience)),
            confidence_floor: Some(cfg.inversion.confidence_floor),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Write the resolved config next to a command's outputs.
pub fn write_resolved(dir: &Path, cfg: &CliConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    genattr::write_atomic(dir.join(RESOLVED_CONFIG_FILE), cfg.to_toml().as_bytes())?;
    Ok(())
}
