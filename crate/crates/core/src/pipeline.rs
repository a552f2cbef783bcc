//! Continuous recording to model-ready epochs: decimate, band-pass, cut,
//! baseline-correct.

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ms_to_samples, Dataset, Epoch, Recording};
use crate::dsp::{decimate, decimation_filter, design_butterworth_bandpass, filtfilt};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Rate after downsampling, Hz.
    pub target_fs: f64,
    /// Band-pass edges, Hz.
    pub band: (f64, f64),
    /// Butterworth prototype order.
    pub order: usize,
    /// Post-onset window, ms.
    pub epoch_ms: f64,
    /// Pre-onset baseline window, ms.
    pub baseline_ms: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_fs: 250.0,
            band: (30.0, 120.0),
            order: 5,
            epoch_ms: 2000.0,
            baseline_ms: 500.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(self.target_fs > 0.0) {
            return Err(Error::InvalidArgument("target_fs must be positive".into()));
        }
        if !(lo > 0.0 && lo < hi && hi < self.target_fs / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "band ({lo}, {hi}) Hz must lie inside (0, {}) Hz",
                self.target_fs / 2.0
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("order must be positive".into()));
        }
        if !(self.epoch_ms > 0.0 && self.baseline_ms > 0.0) {
            return Err(Error::InvalidArgument(
                "epoch_ms and baseline_ms must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the full chain on a continuous recording. Filtering happens on the
/// continuous signal, before epochs are cut.
/// Amplitude gain of the zero-phase preprocessing chain at `freq` for a
/// recording sampled at `fs_in`: both filters are applied forward and back.
pub fn chain_gain(cfg: &PreprocessConfig, fs_in: f64, freq: f64) -> Result<f64> {
    cfg.validate()?;
    let bandpass = design_butterworth_bandpass(cfg.order, cfg.band.0, cfg.band.1, cfg.target_fs)?;
    let mut gain = bandpass.response(freq, cfg.target_fs).norm().powi(2);
    if let Some(lp) = decimation_filter(fs_in, cfg.target_fs)? {
        gain *= lp.response(freq, fs_in).norm().powi(2);
    }
    Ok(gain)
}

pub fn preprocess(recording: &Recording, cfg: &PreprocessConfig) -> Result<Dataset> {
    cfg.validate()?;
    let factor = crate::dsp::resample::decimation_factor(recording.fs, cfg.target_fs)?;
    let bandpass = design_butterworth_bandpass(cfg.order, cfg.band.0, cfg.band.1, cfg.target_fs)?;

    let raw: Vec<Vec<f64>> = recording
        .samples
        .axis_iter(Axis(0))
        .map(|row| row.to_vec())
        .collect();
    let rows: Vec<Vec<f64>> = raw
        .par_iter()
        .map(|row| {
            let down = decimate(row, recording.fs, cfg.target_fs)?;
            filtfilt(&bandpass, &down)
        })
        .collect::<Result<_>>()?;
    drop(raw);

    let n_ch = rows.len();
    let n_dec = rows.first().map_or(0, |r| r.len());
    let fs = cfg.target_fs;
    let pre = ms_to_samples(cfg.baseline_ms, fs);
    let total = ms_to_samples(cfg.baseline_ms + cfg.epoch_ms, fs);

    let mut epochs = Vec::with_capacity(recording.events.len());
    for ev in &recording.events {
        let onset = (ev.onset as f64 / factor as f64).round() as usize;
        if onset < pre {
            return Err(Error::InsufficientMargin {
                onset: ev.onset,
                needed: pre * factor,
            });
        }
        let start = onset - pre;
        if start + total > n_dec {
            return Err(Error::EventPastEnd {
                onset: ev.onset,
                len: recording.n_samples(),
            });
        }
        let data = Array2::from_shape_fn((n_ch, total), |(c, t)| rows[c][start + t]);
        let epoch = Epoch {
            data,
            fs,
            pre_onset_ms: cfg.baseline_ms,
            subject: ev.subject,
            condition: ev.condition,
            session: ev.session,
            word: ev.word,
        };
        epochs.push(baseline_correct_window(&epoch, cfg.baseline_ms)?);
    }

    let n_subjects = recording
        .events
        .iter()
        .map(|e| e.subject + 1)
        .max()
        .unwrap_or(0);
    Dataset::new(
        epochs,
        recording.montage.clone(),
        fs,
        n_subjects,
        cfg.baseline_ms,
        cfg.epoch_ms,
    )
}

/// Subtracts each channel's mean over the 500 ms before onset.
pub fn baseline_correct(epoch: &Epoch) -> Result<Epoch> {
    baseline_correct_window(epoch, crate::data::DEFAULT_PRE_ONSET_MS)
}

/// Subtracts each channel's mean over the last `baseline_ms` before onset
/// from the whole epoch, baseline window included.
pub fn baseline_correct_window(epoch: &Epoch, baseline_ms: f64) -> Result<Epoch> {
    let onset = epoch.onset_index();
    let width = ms_to_samples(baseline_ms, epoch.fs);
    if width == 0 || epoch.pre_onset_ms + 1e-9 < baseline_ms || width > onset {
        return Err(Error::InvalidArgument(format!(
            "missing pre-onset margin: epoch carries {} ms, baseline needs {baseline_ms} ms",
            epoch.pre_onset_ms
        )));
    }
    let mut out = epoch.clone();
    for mut row in out.data.axis_iter_mut(Axis(0)) {
        let mean = row.slice(s![onset - width..onset]).sum() / width as f64;
        row.mapv_inplace(|v| v - mean);
    }
    Ok(out)
}
