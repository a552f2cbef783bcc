//! On-disk formats. A dataset directory holds `header.json` plus one raw
//! f32 LE file per epoch; a recording directory holds `recording.json` plus
//! one row-major f32 LE sample file.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{montage_from_labels, ms_to_samples, Condition, Dataset, Epoch, Event, Recording};
use crate::error::{Error, Result};

pub const HEADER_FILE: &str = "header.json";
pub const RECORDING_HEADER_FILE: &str = "recording.json";
const RECORDING_SAMPLES_FILE: &str = "recording.bin";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    fs: f64,
    channels: Vec<String>,
    subjects: usize,
    pre_onset_ms: f64,
    epoch_ms: f64,
    epochs: Vec<EpochEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpochEntry {
    file: String,
    subject: usize,
    condition: Condition,
    session: u32,
    word: u32,
}

fn epoch_file_name(i: usize) -> String {
    format!("epoch_{i:06}.bin")
}

/// Writes `dataset` to the directory `path`, creating it if needed.
/// Output bytes depend only on the dataset contents.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut entries = Vec::with_capacity(dataset.epochs.len());
    for (i, ep) in dataset.epochs.iter().enumerate() {
        let file = epoch_file_name(i);
        let mut bytes = Vec::with_capacity(ep.data.len() * 4);
        for row in ep.data.rows() {
            for &v in row {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let fpath = dir.join(&file);
        fs::write(&fpath, bytes).map_err(|e| Error::io(&fpath, e))?;
        entries.push(EpochEntry {
            file,
            subject: ep.subject,
            condition: ep.condition,
            session: ep.session,
            word: ep.word,
        });
    }

    let header = Header {
        fs: dataset.fs,
        channels: dataset.channel_labels(),
        subjects: dataset.n_subjects,
        pre_onset_ms: dataset.pre_onset_ms,
        epoch_ms: dataset.epoch_ms,
        epochs: entries,
    };
    let hpath = dir.join(HEADER_FILE);
    let mut text = serde_json::to_string_pretty(&header).map_err(|e| Error::Json {
        path: hpath.clone(),
        source: e,
    })?;
    text.push('\n');
    fs::write(&hpath, text).map_err(|e| Error::io(&hpath, e))
}

/// Reads a dataset directory and validates every invariant.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let dir = path.as_ref();
    let hpath = dir.join(HEADER_FILE);
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: Header = serde_json::from_str(&text)
        .map_err(|e| Error::MalformedHeader(format!("{}: {e}", hpath.display())))?;

    if !(header.fs > 0.0 && header.fs.is_finite()) {
        return Err(Error::MalformedHeader(format!(
            "fs must be positive, got {}",
            header.fs
        )));
    }
    if header.channels.is_empty() {
        return Err(Error::MalformedHeader("no channels listed".into()));
    }
    let montage = montage_from_labels(&header.channels)?;
    let n_ch = montage.len();
    let n_times = ms_to_samples(header.pre_onset_ms + header.epoch_ms, header.fs);
    let expected = n_ch * n_times;

    let mut epochs = Vec::with_capacity(header.epochs.len());
    for entry in &header.epochs {
        if entry.file.contains('/') || entry.file.contains('\\') || entry.file.contains("..") {
            return Err(Error::MalformedHeader(format!(
                "epoch file '{}' must be a bare file name",
                entry.file
            )));
        }
        let fpath = dir.join(&entry.file);
        let bytes = fs::read(&fpath).map_err(|e| Error::io(&fpath, e))?;
        if bytes.len() % 4 != 0 || bytes.len() / 4 != expected {
            return Err(Error::SampleCountMismatch {
                file: entry.file.clone(),
                expected,
                found: bytes.len() / 4,
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let data = Array2::from_shape_vec((n_ch, n_times), values)
            .expect("length checked against header");
        epochs.push(Epoch {
            data,
            fs: header.fs,
            pre_onset_ms: header.pre_onset_ms,
            subject: entry.subject,
            condition: entry.condition,
            session: entry.session,
            word: entry.word,
        });
    }

    Dataset::new(
        epochs,
        montage,
        header.fs,
        header.subjects,
        header.pre_onset_ms,
        header.epoch_ms,
    )
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordingHeader {
    fs: f64,
    channels: Vec<String>,
    n_samples: usize,
    file: String,
    events: Vec<Event>,
}

fn f32_bytes<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<u8> {
    values.flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn save_recording(recording: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bpath = dir.join(RECORDING_SAMPLES_FILE);
    fs::write(&bpath, f32_bytes(recording.samples.iter())).map_err(|e| Error::io(&bpath, e))?;
    let header = RecordingHeader {
        fs: recording.fs,
        channels: recording.montage.iter().map(|c| c.label.clone()).collect(),
        n_samples: recording.n_samples(),
        file: RECORDING_SAMPLES_FILE.into(),
        events: recording.events.clone(),
    };
    let hpath = dir.join(RECORDING_HEADER_FILE);
    let mut text = serde_json::to_string_pretty(&header).map_err(|e| Error::Json {
        path: hpath.clone(),
        source: e,
    })?;
    text.push('\n');
    fs::write(&hpath, text).map_err(|e| Error::io(&hpath, e))
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let dir = path.as_ref();
    let hpath = dir.join(RECORDING_HEADER_FILE);
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: RecordingHeader = serde_json::from_str(&text)
        .map_err(|e| Error::MalformedHeader(format!("{}: {e}", hpath.display())))?;
    if header.file.contains(['/', '\\']) || header.file.contains("..") {
        return Err(Error::MalformedHeader(format!(
            "sample file '{}' must be a bare file name",
            header.file
        )));
    }
    let montage = montage_from_labels(&header.channels)?;
    let expected = montage.len() * header.n_samples;
    let bpath = dir.join(&header.file);
    let bytes = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    if bytes.len() % 4 != 0 || bytes.len() / 4 != expected {
        return Err(Error::SampleCountMismatch {
            file: header.file.clone(),
            expected,
            found: bytes.len() / 4,
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let samples = Array2::from_shape_vec((montage.len(), header.n_samples), values)
        .expect("length checked against header");
    Recording::new(samples, header.fs, montage, header.events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SPEECH_MONTAGE;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(seed: u64, n_subjects: usize, per_subject: usize, n_ch: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = 40.0;
        let n_times = ms_to_samples(2500.0, fs);
        let montage = montage_from_labels(&SPEECH_MONTAGE[..n_ch]).unwrap();
        let mut epochs = Vec::new();
        for s in 0..n_subjects {
            for k in 0..per_subject {
                // f32-representable values so the round trip is exact
                let data = Array2::from_shape_fn((n_ch, n_times), |_| {
                    rng.random_range(-200.0f32..200.0) as f64
                });
                epochs.push(Epoch {
                    data,
                    fs,
                    pre_onset_ms: 500.0,
                    subject: s,
                    condition: Condition::ALL[k % 4],
                    session: (k / 4) as u32,
                    word: (k % 12) as u32,
                });
            }
        }
        Dataset::new(epochs, montage, fs, n_subjects, 500.0, 2000.0).unwrap()
    }

    #[test]
    fn loads_two_subjects_four_epochs() {
        let ds = random_dataset(1, 2, 4, 10);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), 8);
        assert_eq!(back, ds);
    }

    #[test]
    fn header_row_mismatch_is_reported() {
        let ds = random_dataset(2, 1, 2, 9);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        // claim a tenth channel the binaries do not hold
        let hpath = dir.path().join(HEADER_FILE);
        let text = fs::read_to_string(&hpath).unwrap();
        let mut header: Header = serde_json::from_str(&text).unwrap();
        header.channels.push("P5".into());
        fs::write(&hpath, serde_json::to_string(&header).unwrap()).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("sample-count mismatch"), "{err}");
    }

    #[test]
    fn unknown_label_rejected() {
        let ds = random_dataset(3, 1, 1, 2);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let hpath = dir.path().join(HEADER_FILE);
        let text = fs::read_to_string(&hpath).unwrap().replace("\"F3\"", "\"ZZ9\"");
        fs::write(&hpath, text).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::UnknownChannel(_))
        ));
    }

    #[test]
    fn malformed_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(HEADER_FILE), "{\"fs\": 250}").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = random_dataset(4, 2, 0, 3);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn saving_is_byte_deterministic() {
        let ds = random_dataset(5, 2, 3, 4);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        save_dataset(&ds, a.path()).unwrap();
        save_dataset(&ds, b.path()).unwrap();
        for name in [HEADER_FILE, "epoch_000000.bin", "epoch_000005.bin"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn load_after_save_is_identity(seed in any::<u64>(), subjects in 1usize..4, per in 0usize..4, ch in 1usize..6) {
            let ds = random_dataset(seed, subjects, per, ch);
            let dir = tempfile::tempdir().unwrap();
            save_dataset(&ds, dir.path()).unwrap();
            let back = load_dataset(dir.path()).unwrap();
            for (x, y) in ds.epochs.iter().zip(&back.epochs) {
                for (a, b) in x.data.iter().zip(y.data.iter()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn recording_round_trip() {
        use crate::data::speech_montage;
        let samples = Array2::from_shape_fn((10, 300), |(c, t)| (c * 300 + t) as f32 as f64 * 0.25);
        let ev = Event {
            onset: 150,
            subject: 1,
            condition: Condition::OvertSpeech,
            session: 2,
            word: 3,
        };
        let rec = Recording::new(samples, 100.0, speech_montage(), vec![ev]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_recording(&rec, dir.path()).unwrap();
        assert_eq!(load_recording(dir.path()).unwrap(), rec);

        fs::write(dir.path().join(RECORDING_SAMPLES_FILE), [0u8; 8]).unwrap();
        let err = load_recording(dir.path()).unwrap_err();
        assert!(err.to_string().contains("sample-count mismatch"));
    }
}
