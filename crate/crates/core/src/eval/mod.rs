//! Cross-validated subject identification, channel sweeps and ablations.

mod folds;
mod report;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{build_network, inputs_from_dataset, predict, train, ArchConfig, NetworkSpec, TrainConfig};

pub use folds::{stratified_kfold, stratified_kfold_labels, FoldAssignment};
pub use report::{EvalReport, ReportMeta};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub k: usize,
    pub arch: ArchConfig,
    /// `train.seed` also seeds the fold split and every per-fold model.
    pub train: TrainConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: DEFAULT_FOLDS,
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// splitmix64 step, used to give each fold its own streams.
pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn network_spec(ds: &Dataset, arch: &ArchConfig) -> NetworkSpec {
    NetworkSpec::new(ds.fs, ds.n_channels(), ds.n_post(), ds.n_subjects).with_arch(arch.clone())
}

fn meta_for(ds: &Dataset, cfg: &CvConfig) -> ReportMeta {
    let first = ds.epochs.first().map(|e| e.condition);
    let condition = first.filter(|c| ds.epochs.iter().all(|e| e.condition == *c));
    ReportMeta {
        condition,
        channels: ds.channel_labels(),
        spectral_block: cfg.arch.use_spectral_block,
        k: cfg.k,
        seed: cfg.train.seed,
        epochs: cfg.train.epochs,
        n_epochs: ds.len(),
        shuffled_labels: false,
    }
}

/// Trains one model per fold on the remaining folds and scores the held-out
/// fold. Folds run in parallel; results are keyed by fold id.
pub fn cross_validate_with_folds(ds: &Dataset, cfg: &CvConfig, folds: &FoldAssignment) -> Result<EvalReport> {
    if folds.folds.len() != ds.len() {
        return Err(Error::InvalidArgument(format!(
            "fold assignment covers {} epochs, dataset has {}",
            folds.folds.len(),
            ds.len()
        )));
    }
    let spec = network_spec(ds, &cfg.arch);
    spec.validate()?;
    let results: Vec<Vec<(usize, usize)>> = (0..folds.k)
        .into_par_iter()
        .map(|fold| -> Result<Vec<(usize, usize)>> {
            let train_idx = folds.train_indices(fold);
            let test_idx = folds.test_indices(fold);
            debug_assert!(test_idx.iter().all(|i| !train_idx.contains(i)));
            let (x_train, y_train) = inputs_from_dataset(ds, &train_idx)?;
            let (x_test, y_test) = inputs_from_dataset(ds, &test_idx)?;
            let mut state = build_network(&spec, derive_seed(cfg.train.seed, fold as u64, 0))?;
            let tcfg = TrainConfig {
                seed: derive_seed(cfg.train.seed, fold as u64, 1),
                ..cfg.train.clone()
            };
            train(&mut state, &x_train, &y_train, &tcfg)?;
            let pred = predict(&state, &x_test)?;
            log::debug!("fold {fold}: {} train / {} test", train_idx.len(), test_idx.len());
            Ok(y_test.into_iter().zip(pred).collect())
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_folds(&results, ds.n_subjects, meta_for(ds, cfg)))
}

pub fn cross_validate(ds: &Dataset, cfg: &CvConfig) -> Result<EvalReport> {
    let folds = stratified_kfold(ds, cfg.k, cfg.train.seed)?;
    cross_validate_with_folds(ds, cfg, &folds)
}

/// Copy of the dataset with subject labels randomly permuted across epochs.
pub fn permute_subjects(ds: &Dataset, seed: u64) -> Dataset {
    let mut labels = ds.labels();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = ds.clone();
    for (e, l) in out.epochs.iter_mut().zip(labels) {
        e.subject = l;
    }
    out
}

/// Cross-validation on permuted labels; estimates the chance level.
pub fn shuffled_label_control(ds: &Dataset, cfg: &CvConfig, seed: u64) -> Result<EvalReport> {
    let mut report = cross_validate(&permute_subjects(ds, seed), cfg)?;
    report.meta.shuffled_labels = true;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub report: EvalReport,
}

/// Single-channel cross-validation for each label, in the order given. One
/// fold assignment is shared by all channels.
pub fn channel_sweep<S: AsRef<str> + Sync>(ds: &Dataset, labels: &[S], cfg: &CvConfig) -> Result<Vec<SweepRow>> {
    let projections: Vec<Dataset> = labels
        .iter()
        .map(|l| ds.select_channels(&[l.as_ref()]))
        .collect::<Result<_>>()?;
    let folds = stratified_kfold(ds, cfg.k, cfg.train.seed)?;
    projections
        .par_iter()
        .map(|proj| {
            let report = cross_validate_with_folds(proj, cfg, &folds)?;
            Ok(SweepRow {
                label: proj.channel_labels()[0].clone(),
                mean_accuracy: report.mean_accuracy,
                std_accuracy: report.std_accuracy,
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    /// `"all"` or the single channel label.
    pub channels: String,
    pub spectral_block: bool,
    pub report: EvalReport,
}

/// `{all channels, one channel} x {spectral block on, off}` on shared folds.
pub fn ablation_compare(ds: &Dataset, single_channel: &str, cfg: &CvConfig) -> Result<Vec<AblationArm>> {
    let single = ds.select_channels(&[single_channel])?;
    let label = single.channel_labels()[0].clone();
    let folds = stratified_kfold(ds, cfg.k, cfg.train.seed)?;
    let arms: Vec<(&Dataset, String, bool)> = vec![
        (ds, "all".to_string(), true),
        (ds, "all".to_string(), false),
        (&single, label.clone(), true),
        (&single, label, false),
    ];
    arms.into_par_iter()
        .map(|(data, channels, spectral)| {
            let arm_cfg = CvConfig {
                arch: ArchConfig {
                    use_spectral_block: spectral,
                    ..cfg.arch.clone()
                },
                ..cfg.clone()
            };
            Ok(AblationArm {
                channels,
                spectral_block: spectral,
                report: cross_validate_with_folds(data, &arm_cfg, &folds)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
