//! JSON-loadable settings shared by the CLI and the experiment runner.

use std::path::{Path, PathBuf};

use krylov_core::nn::{AdamConfig, ArchKind, Architecture, NetworkSpec, TrainConfig};
use krylov_core::states::Basis;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::{fsutil, usage};

/// Network size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 16/32/64 conv channels, dense 64/32; FCN 256/128/64/32.
    #[default]
    Desk,
    /// 256/512/1024 conv channels, dense 256/128; FCN 1024/512/256/128.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub profile: Profile,
    pub kernel: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            profile: Profile::Desk,
            kernel: 5,
            epochs: 100,
            batch_size: 32,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            seed: self.seed,
        }
    }

    pub fn architecture(&self, kind: ArchKind) -> Architecture {
        match (kind, self.profile) {
            (ArchKind::Cnn, Profile::Desk) => Architecture::desk_cnn(self.kernel),
            (ArchKind::Cnn, Profile::Full) => Architecture::full_cnn(self.kernel),
            (ArchKind::Fcn, Profile::Desk) => Architecture::desk_fcn(),
            (ArchKind::Fcn, Profile::Full) => Architecture::full_fcn(),
        }
    }

    pub fn network_spec(&self, kind: ArchKind, n: usize) -> NetworkSpec {
        NetworkSpec { input_channels: 4, input_len: n, architecture: self.architecture(kind) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 {
            return Err(usage!("kernel must be at least 1"));
        }
        self.train_config().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BasisSweep,
    BetaSweep,
    TimeTarget,
}

/// An experiment description, as read from `--spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n: usize,
    pub m: usize,
    /// Defaults: `[0, 1, 3]` for beta sweeps, `[0]` otherwise.
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    /// Defaults: all four for basis sweeps, energy and Krylov for time
    /// targets, energy for beta sweeps.
    #[serde(default)]
    pub bases: Option<Vec<Basis>>,
    pub seed: u64,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    pub output_dir: PathBuf,
}

fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| usage!("invalid experiment spec: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| usage!("{} is not UTF-8", path.display()))?;
        Self::from_json(&text)
    }

    /// Fills in defaults and checks every field.
    pub fn resolved(&self) -> Result<Self> {
        let mut s = self.clone();
        let betas = s.betas.take().unwrap_or_else(|| match s.kind {
            ExperimentKind::BetaSweep => vec![0.0, 1.0, 3.0],
            _ => vec![0.0],
        });
        let bases = s.bases.take().unwrap_or_else(|| match s.kind {
            ExperimentKind::BasisSweep => Basis::ALL.to_vec(),
            ExperimentKind::TimeTarget => vec![Basis::Energy, Basis::Krylov],
            ExperimentKind::BetaSweep => vec![Basis::Energy],
        });
        if s.n < 2 {
            return Err(usage!("n must be at least 2"));
        }
        if s.m < 3 {
            return Err(usage!("m must be at least 3 to fill train/val/test"));
        }
        if betas.is_empty() || betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(usage!("betas must be a non-empty list of finite values >= 0"));
        }
        if bases.is_empty() {
            return Err(usage!("bases must not be empty"));
        }
        if s.kind == ExperimentKind::BetaSweep && !(2..=3).contains(&betas.len()) {
            return Err(usage!("a beta sweep needs 2 or 3 betas, got {}", betas.len()));
        }
        s.train.validate()?;
        for kind in [ArchKind::Cnn, ArchKind::Fcn] {
            s.train
                .network_spec(kind, s.n)
                .layers()
                .map_err(|e| usage!("n = {} does not fit the {kind:?} architecture: {e}", s.n))?;
        }
        s.betas = Some(betas);
        s.bases = Some(bases);
        Ok(s)
    }

    pub fn betas(&self) -> &[f64] {
        self.betas.as_deref().unwrap_or(&[])
    }

    pub fn bases(&self) -> &[Basis] {
        self.bases.as_deref().unwrap_or(&[])
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        usage!("invalid JSON: {e}")
    }
}
