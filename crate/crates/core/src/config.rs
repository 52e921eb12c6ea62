//! Run configuration for the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fomgen::{FomConfig, FomError};
use crate::gpr::GprOptions;
use crate::interpolation::InterpolationOptions;
use crate::pod::DEFAULT_ENERGY_THRESHOLD;
use crate::rom::{n_synth_for_total, MappingKind, RegressorKind, TrainOptions};
use crate::transport::{Epsilon, SinkhornOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("fom: {0}")]
    Fom(#[from] FomError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Offline/online model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomSection {
    pub n_checkpoints: usize,
    /// Total dictionary size `N_tot`; synthetic snapshots per interval follow
    /// from `n_synth_for_total`.
    pub n_total_synthetic: usize,
    /// Entropic regularization as a fraction of the mean transport cost.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_marginal_tol")]
    pub marginal_tol: f64,
    #[serde(default)]
    pub mapping: MappingKind,
    #[serde(default)]
    pub regressor: RegressorKind,
    #[serde(default)]
    pub correction: bool,
    #[serde(default = "default_pod_threshold")]
    pub pod_threshold: f64,
}

fn default_epsilon() -> f64 {
    1e-2
}

fn default_marginal_tol() -> f64 {
    SinkhornOptions::default().marginal_tol
}

fn default_pod_threshold() -> f64 {
    DEFAULT_ENERGY_THRESHOLD
}

/// Training/test protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Training snapshots are every `train_every`-th reference snapshot.
    #[serde(default = "default_train_every")]
    pub train_every: usize,
    /// The training trajectory is simulated with `train_dt_factor · dt`.
    #[serde(default = "default_dt_factor")]
    pub train_dt_factor: usize,
    /// Test times are training times plus these fractions of the training
    /// save interval; each must land on a reference save time.
    #[serde(default = "default_offsets")]
    pub test_time_offsets: Vec<f64>,
    /// Checkpoint counts swept by `sweep` when `--checkpoints` is absent.
    /// Unset means the members of {2, 3, 5, 9, 17} that fit the data.
    #[serde(default)]
    pub sweep_checkpoints: Option<Vec<usize>>,
}

fn default_train_every() -> usize {
    2
}

fn default_dt_factor() -> usize {
    1
}

fn default_offsets() -> Vec<f64> {
    vec![0.5]
}

const DEFAULT_SWEEP: [usize; 5] = [2, 3, 5, 9, 17];

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            train_every: default_train_every(),
            train_dt_factor: default_dt_factor(),
            test_time_offsets: default_offsets(),
            sweep_checkpoints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Relative paths resolve against the config file's directory.
    pub work_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Reference simulation (fine time step).
    pub fom: FomConfig,
    pub rom: RomSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// Parses and validates; `work_dir` is resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        if cfg.paths.work_dir.is_relative() {
            cfg.paths.work_dir = base.join(&cfg.paths.work_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Checks every section before any work is done.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.fom.validate()?;
        self.training_fom()?.validate()?;
        let n_t = self.n_training_snapshots()?;
        let r = &self.rom;
        self.check_counts(r.n_checkpoints, n_t)?;
        if !(r.epsilon > 0.0 && r.epsilon.is_finite()) {
            return invalid("rom.epsilon must be positive");
        }
        if !(r.marginal_tol > 0.0 && r.marginal_tol.is_finite()) {
            return invalid("rom.marginal_tol must be positive");
        }
        if !(r.pod_threshold > 0.0 && r.pod_threshold <= 1.0) {
            return invalid("rom.pod_threshold must lie in (0, 1]");
        }
        self.train_options(r.n_checkpoints)?;
        for &c in self.eval.sweep_checkpoints.iter().flatten() {
            self.check_counts(c, n_t)?;
        }
        self.test_steps()?;
        Ok(())
    }

    fn check_counts(&self, n_checkpoints: usize, n_t: usize) -> Result<(), ConfigError> {
        if n_checkpoints < 2 || n_checkpoints > n_t {
            return invalid(format!("{n_checkpoints} checkpoints requested for {n_t} training snapshots (need 2 ≤ N_c ≤ N_T)"));
        }
        if self.rom.n_total_synthetic < n_checkpoints {
            return invalid(format!(
                "rom.n_total_synthetic = {} is below N_c = {n_checkpoints}",
                self.rom.n_total_synthetic
            ));
        }
        Ok(())
    }

    /// Training simulation: coarser step, saved at every `train_every`-th
    /// reference save time.
    pub fn training_fom(&self) -> Result<FomConfig, ConfigError> {
        let e = &self.eval;
        if e.train_every == 0 || e.train_dt_factor == 0 {
            return invalid("eval.train_every and eval.train_dt_factor must be at least 1");
        }
        let fine_steps = e.train_every * self.fom.save_stride;
        if !fine_steps.is_multiple_of(e.train_dt_factor) {
            return invalid(format!(
                "eval.train_dt_factor = {} must divide train_every · save_stride = {fine_steps}",
                e.train_dt_factor
            ));
        }
        let mut cfg = self.fom.clone();
        cfg.dt = self.fom.dt * e.train_dt_factor as f64;
        cfg.save_stride = fine_steps / e.train_dt_factor;
        Ok(cfg)
    }

    pub fn n_training_snapshots(&self) -> Result<usize, ConfigError> {
        Ok(self.training_fom()?.n_snapshots()?)
    }

    /// Test-time offsets in units of reference save steps.
    pub fn test_steps(&self) -> Result<Vec<usize>, ConfigError> {
        let every = self.eval.train_every as f64;
        if self.eval.test_time_offsets.is_empty() {
            return invalid("eval.test_time_offsets must not be empty");
        }
        self.eval
            .test_time_offsets
            .iter()
            .map(|&f| {
                let s = f * every;
                let k = s.round();
                if !(f > 0.0 && f < 1.0) || (s - k).abs() > 1e-9 || k < 1.0 || k >= every {
                    return invalid(format!(
                        "test offset {f} is not a multiple of 1/{} strictly inside (0, 1): test times must fall between training times on reference save points",
                        self.eval.train_every
                    ));
                }
                Ok(k as usize)
            })
            .collect()
    }

    /// Checkpoint counts for `sweep` without an explicit list.
    pub fn sweep_checkpoints(&self) -> Result<Vec<usize>, ConfigError> {
        if let Some(list) = &self.eval.sweep_checkpoints {
            return Ok(list.clone());
        }
        let n_t = self.n_training_snapshots()?;
        Ok(DEFAULT_SWEEP
            .into_iter()
            .filter(|&c| c <= n_t && c <= self.rom.n_total_synthetic)
            .collect())
    }

    pub fn n_synth(&self, n_checkpoints: usize) -> Result<usize, ConfigError> {
        n_synth_for_total(self.rom.n_total_synthetic, n_checkpoints)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn train_options(&self, n_checkpoints: usize) -> Result<TrainOptions, ConfigError> {
        let r = &self.rom;
        let sinkhorn = SinkhornOptions {
            epsilon: Epsilon::RelativeToMeanCost(r.epsilon),
            marginal_tol: r.marginal_tol,
            ..Default::default()
        };
        sinkhorn
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("rom: {e}")))?;
        Ok(TrainOptions {
            n_checkpoints,
            interpolation: InterpolationOptions {
                sinkhorn,
                ..Default::default()
            },
            mapping: r.mapping,
            regressor: r.regressor,
            n_synth: self.n_synth(n_checkpoints)?,
            correction: r.correction,
            pod_threshold: r.pod_threshold,
            gpr: GprOptions::default(),
        })
    }

    pub fn work_dir(&self) -> &Path {
        &self.paths.work_dir
    }
}
