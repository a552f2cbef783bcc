//! Run configuration: defaults, optionally overlaid by a JSON file, then by
//! command-line flags.

use std::fs;
use std::path::Path;

use neuroprint::eval::{CvConfig, DEFAULT_FOLDS};
use neuroprint::nn::{ArchConfig, TrainConfig};
use neuroprint::pipeline::PreprocessConfig;
use neuroprint::stats::DEFAULT_PERMUTATIONS;
use neuroprint::synth::{ConditionSnr, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub subjects: usize,
    pub trials: usize,
    pub fs: f64,
    pub snr: ConditionSnr,
    pub noise_rms: f64,
    pub bump_gain: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        SynthSection {
            subjects: s.n_subjects,
            trials: s.trials,
            fs: s.fs,
            snr: s.snr,
            noise_rms: s.noise_rms,
            bump_gain: s.bump_gain,
        }
    }
}

/// Everything a command may need. One global seed drives synthesis, fold
/// splits, model initialization and permutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub folds: usize,
    pub alpha: f64,
    pub n_perm: usize,
    pub train: TrainSection,
    pub arch: ArchConfig,
    pub preprocess: PreprocessConfig,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            folds: DEFAULT_FOLDS,
            alpha: DEFAULT_ALPHA,
            n_perm: DEFAULT_PERMUTATIONS,
            train: TrainSection::default(),
            arch: ArchConfig::default(),
            preprocess: PreprocessConfig::default(),
            synth: SynthSection::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, or the file at `path` laid over them.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            k: self.folds,
            arch: self.arch.clone(),
            train: TrainConfig {
                epochs: self.train.epochs,
                batch_size: self.train.batch_size,
                lr: self.train.lr,
                seed: self.seed,
            },
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            n_subjects: self.synth.subjects,
            trials: self.synth.trials,
            fs: self.synth.fs,
            snr: self.synth.snr.clone(),
            noise_rms: self.synth.noise_rms,
            bump_gain: self.synth.bump_gain,
            seed: self.seed,
        }
    }

    pub fn validate_cv(&self) -> CliResult<()> {
        if self.folds < 2 {
            return Err(CliError::config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.train.epochs == 0 {
            return Err(CliError::config("epochs must be positive"));
        }
        if self.train.batch_size == 0 {
            return Err(CliError::config("batch must be positive"));
        }
        self.cv().train.validate()?;
        Ok(())
    }

    pub fn validate_alpha(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}
