//! 10-20 / 10-10 electrode labels and the speech-area montage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channels over Broca's and Wernicke's areas.
pub const SPEECH_MONTAGE: [&str; 10] = [
    "AF3", "F3", "F5", "FC3", "FC5", "T7", "C5", "TP7", "CP5", "P5",
];

const KNOWN_LABELS: &[&str] = &[
    "Nz", "Fp1", "Fpz", "Fp2", "AF9", "AF7", "AF5", "AF3", "AF1", "AFz", "AF2", "AF4", "AF6",
    "AF8", "AF10", "F9", "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8", "F10", "FT9",
    "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "FT10", "T9", "T7", "C5",
    "C3", "C1", "Cz", "C2", "C4", "C6", "T8", "T10", "TP9", "TP7", "CP5", "CP3", "CP1", "CPz",
    "CP2", "CP4", "CP6", "TP8", "TP10", "P9", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6",
    "P8", "P10", "PO9", "PO7", "PO5", "PO3", "PO1", "POz", "PO2", "PO4", "PO6", "PO8", "PO10",
    "O1", "Oz", "O2", "O9", "O10", "Iz", "T3", "T4", "T5", "T6", "A1", "A2", "M1", "M2",
];

/// Returns the canonical spelling of a 10-20 label, matching case-insensitively.
pub fn canonical_label(label: &str) -> Option<&'static str> {
    let trimmed = label.trim();
    KNOWN_LABELS
        .iter()
        .copied()
        .find(|known| known.eq_ignore_ascii_case(trimmed))
}

/// A named electrode and its row in the sample matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelId {
    pub label: String,
    pub index: usize,
}

/// Builds a montage from labels, canonicalizing spelling and rejecting
/// unknown or duplicated names.
pub fn montage_from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<ChannelId>> {
    let mut montage: Vec<ChannelId> = Vec::with_capacity(labels.len());
    for (index, raw) in labels.iter().enumerate() {
        let label = canonical_label(raw.as_ref())
            .ok_or_else(|| Error::UnknownChannel(raw.as_ref().to_string()))?;
        if montage.iter().any(|c| c.label == label) {
            return Err(Error::InvalidDataset(format!(
                "duplicate channel label '{label}'"
            )));
        }
        montage.push(ChannelId {
            label: label.to_string(),
            index,
        });
    }
    Ok(montage)
}

/// The ten speech-area channels in their conventional order.
pub fn speech_montage() -> Vec<ChannelId> {
    montage_from_labels(&SPEECH_MONTAGE).expect("speech montage labels are valid")
}

/// True when the montage holds exactly the speech-area channel set.
pub fn is_speech_montage(montage: &[ChannelId]) -> bool {
    montage.len() == SPEECH_MONTAGE.len()
        && SPEECH_MONTAGE
            .iter()
            .all(|l| montage.iter().any(|c| c.label == *l))
}

/// Finds the row index of `label` in a montage.
pub fn position(montage: &[ChannelId], label: &str) -> Result<usize> {
    let wanted = canonical_label(label).unwrap_or(label);
    montage
        .iter()
        .position(|c| c.label == wanted)
        .ok_or_else(|| Error::UnknownChannel(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes_case() {
        assert_eq!(canonical_label("t7"), Some("T7"));
        assert_eq!(canonical_label("FCZ"), Some("FCz"));
        assert_eq!(canonical_label("X99"), None);
    }

    #[test]
    fn rejects_unknown_and_duplicate() {
        assert!(matches!(
            montage_from_labels(&["T7", "Q1"]),
            Err(Error::UnknownChannel(_))
        ));
        assert!(montage_from_labels(&["T7", "t7"]).is_err());
    }

    #[test]
    fn speech_montage_is_recognized() {
        let m = speech_montage();
        assert_eq!(m.len(), 10);
        assert!(is_speech_montage(&m));
        assert_eq!(position(&m, "T7").unwrap(), 5);
        let mut reversed = m.clone();
        reversed.reverse();
        assert!(is_speech_montage(&reversed));
        assert!(!is_speech_montage(&m[..9]));
    }
}
