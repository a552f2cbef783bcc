//! Recordings, epochs and the labeled dataset container.

mod io;
mod montage;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, load_recording, save_dataset, save_recording, HEADER_FILE, RECORDING_HEADER_FILE};
pub use montage::{
    canonical_label, is_speech_montage, montage_from_labels, position, speech_montage, ChannelId,
    SPEECH_MONTAGE,
};

/// Default pre-onset margin carried inside each epoch.
pub const DEFAULT_PRE_ONSET_MS: f64 = 500.0;
/// Length of the classified post-onset window.
pub const DEFAULT_EPOCH_MS: f64 = 2000.0;

/// Experimental condition of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    ImaginedSpeech,
    OvertSpeech,
    SpeechPerception,
    RestingState,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::ImaginedSpeech,
        Condition::OvertSpeech,
        Condition::SpeechPerception,
        Condition::RestingState,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::ImaginedSpeech => "imagined_speech",
            Condition::OvertSpeech => "overt_speech",
            Condition::SpeechPerception => "speech_perception",
            Condition::RestingState => "resting_state",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "imaginedspeech" | "imagined" | "imagery" => Ok(Condition::ImaginedSpeech),
            "overtspeech" | "overt" => Ok(Condition::OvertSpeech),
            "speechperception" | "perception" => Ok(Condition::SpeechPerception),
            "restingstate" | "rest" | "resting" => Ok(Condition::RestingState),
            _ => Err(Error::InvalidArgument(format!("unknown condition '{s}'"))),
        }
    }
}

/// A trial marker in a continuous recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Sample index of trial onset.
    pub onset: usize,
    pub subject: usize,
    pub condition: Condition,
    pub session: u32,
    pub word: u32,
}

/// Continuous multichannel signal in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub samples: Array2<f64>,
    pub fs: f64,
    pub montage: Vec<ChannelId>,
    pub events: Vec<Event>,
}

impl Recording {
    /// Validates shape and rate. Event margins depend on the epoching
    /// parameters and are checked when the recording is cut.
    pub fn new(
        samples: Array2<f64>,
        fs: f64,
        montage: Vec<ChannelId>,
        events: Vec<Event>,
    ) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if samples.nrows() != montage.len() {
            return Err(Error::InvalidDataset(format!(
                "recording has {} rows but montage lists {} channels",
                samples.nrows(),
                montage.len()
            )));
        }
        Ok(Recording {
            samples,
            fs,
            montage,
            events,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }
}

/// Samples covering `ms` milliseconds at `fs`.
pub fn ms_to_samples(ms: f64, fs: f64) -> usize {
    (ms * fs / 1000.0).round() as usize
}

/// A labeled trial: pre-onset margin followed by the post-onset window.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// channels × time, microvolts.
    pub data: Array2<f64>,
    pub fs: f64,
    pub pre_onset_ms: f64,
    pub subject: usize,
    pub condition: Condition,
    pub session: u32,
    pub word: u32,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.data.ncols()
    }

    /// Number of samples before onset.
    pub fn onset_index(&self) -> usize {
        ms_to_samples(self.pre_onset_ms, self.fs)
    }

    /// The window after onset, the part that gets classified.
    pub fn post_onset(&self) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., self.onset_index()..])
    }

    pub fn baseline(&self) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., ..self.onset_index()])
    }
}

/// Fixed-length labeled trials sharing rate, montage and length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub epochs: Vec<Epoch>,
    pub montage: Vec<ChannelId>,
    pub fs: f64,
    pub n_subjects: usize,
    pub pre_onset_ms: f64,
    pub epoch_ms: f64,
}

impl Dataset {
    pub fn new(
        epochs: Vec<Epoch>,
        montage: Vec<ChannelId>,
        fs: f64,
        n_subjects: usize,
        pre_onset_ms: f64,
        epoch_ms: f64,
    ) -> Result<Self> {
        let ds = Dataset {
            epochs,
            montage,
            fs,
            n_subjects,
            pre_onset_ms,
            epoch_ms,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Expected samples per epoch, margin included.
    pub fn n_times(&self) -> usize {
        ms_to_samples(self.pre_onset_ms + self.epoch_ms, self.fs)
    }

    pub fn n_channels(&self) -> usize {
        self.montage.len()
    }

    pub fn onset_index(&self) -> usize {
        ms_to_samples(self.pre_onset_ms, self.fs)
    }

    /// Length of the classified post-onset window.
    pub fn n_post(&self) -> usize {
        self.n_times() - self.onset_index()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.subject).collect()
    }

    /// Checks every invariant; unbalanced classes only produce a warning.
    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if self.pre_onset_ms < 0.0 || self.epoch_ms <= 0.0 {
            return Err(Error::InvalidDataset(
                "pre_onset_ms must be >= 0 and epoch_ms > 0".into(),
            ));
        }
        let n_times = self.n_times();
        let n_ch = self.montage.len();
        for (i, ep) in self.epochs.iter().enumerate() {
            if ep.n_channels() != n_ch {
                return Err(Error::InvalidDataset(format!(
                    "epoch {i} has {} channels, montage has {n_ch}",
                    ep.n_channels()
                )));
            }
            if ep.n_times() != n_times {
                return Err(Error::InvalidDataset(format!(
                    "epoch {i} has {} samples, expected {n_times}",
                    ep.n_times()
                )));
            }
            if ep.fs != self.fs || ep.pre_onset_ms != self.pre_onset_ms {
                return Err(Error::InvalidDataset(format!(
                    "epoch {i} disagrees with dataset fs or pre-onset margin"
                )));
            }
            if ep.subject >= self.n_subjects {
                return Err(Error::InvalidDataset(format!(
                    "epoch {i} has subject {} but dataset declares {} subjects",
                    ep.subject, self.n_subjects
                )));
            }
        }
        for (cond, counts) in self.class_counts() {
            let first = counts[0];
            if counts.iter().any(|&c| c != first) {
                log::warn!("unbalanced classes in {cond}: per-subject counts {counts:?}");
            }
        }
        Ok(())
    }

    /// Per-condition trial counts per subject, for conditions present.
    pub fn class_counts(&self) -> BTreeMap<Condition, Vec<usize>> {
        let mut out: BTreeMap<Condition, Vec<usize>> = BTreeMap::new();
        for ep in &self.epochs {
            out.entry(ep.condition)
                .or_insert_with(|| vec![0; self.n_subjects])[ep.subject] += 1;
        }
        out
    }

    /// Same metadata, only the given epochs (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            epochs: indices.iter().map(|&i| self.epochs[i].clone()).collect(),
            montage: self.montage.clone(),
            fs: self.fs,
            n_subjects: self.n_subjects,
            pre_onset_ms: self.pre_onset_ms,
            epoch_ms: self.epoch_ms,
        }
    }

    pub fn filter_condition(&self, condition: Condition) -> Dataset {
        let idx: Vec<usize> = self
            .epochs
            .iter()
            .enumerate()
            .filter(|(_, e)| e.condition == condition)
            .map(|(i, _)| i)
            .collect();
        self.subset(&idx)
    }

    /// Keeps only the listed channels, in the order given.
    pub fn select_channels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Dataset> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("no channels selected".into()));
        }
        let rows: Vec<usize> = labels
            .iter()
            .map(|l| position(&self.montage, l.as_ref()))
            .collect::<Result<_>>()?;
        let montage: Vec<ChannelId> = rows
            .iter()
            .enumerate()
            .map(|(index, &r)| ChannelId {
                label: self.montage[r].label.clone(),
                index,
            })
            .collect();
        let epochs = self
            .epochs
            .iter()
            .map(|ep| Epoch {
                data: ep.data.select(Axis(0), &rows),
                ..ep.clone()
            })
            .collect();
        Dataset::new(
            epochs,
            montage,
            self.fs,
            self.n_subjects,
            self.pre_onset_ms,
            self.epoch_ms,
        )
    }

    pub fn channel_labels(&self) -> Vec<String> {
        self.montage.iter().map(|c| c.label.clone()).collect()
    }
}
