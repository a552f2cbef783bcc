use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::data::{montage_from_labels, Condition, Epoch};

/// Subject-specific tone on the first channel only; the others are noise.
fn tone_dataset(n_subjects: usize, per_subject: usize, seed: u64) -> Dataset {
    let fs = 100.0;
    let labels = ["T7", "F3", "CP5"];
    let n_times = 250;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut epochs = Vec::new();
    for s in 0..n_subjects {
        let f = 10.0 + 8.0 * s as f64;
        for w in 0..per_subject {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let data = Array2::from_shape_fn((3, n_times), |(c, t)| {
                let tone = if c == 0 {
                    (std::f64::consts::TAU * f * t as f64 / fs + phase).sin()
                } else {
                    0.0
                };
                tone + noise.sample(&mut rng)
            });
            epochs.push(Epoch {
                data,
                fs,
                pre_onset_ms: 500.0,
                subject: s,
                condition: Condition::ImaginedSpeech,
                session: 0,
                word: w as u32,
            });
        }
    }
    Dataset::new(epochs, montage_from_labels(&labels).unwrap(), fs, n_subjects, 500.0, 2000.0).unwrap()
}

fn quick_cfg() -> CvConfig {
    CvConfig {
        k: 3,
        arch: ArchConfig::default(),
        train: TrainConfig {
            epochs: 15,
            batch_size: 16,
            lr: 1e-2,
            seed: 1,
        },
    }
}

#[test]
fn separable_tones_are_identified() {
    let ds = tone_dataset(3, 12, 0);
    let r = cross_validate(&ds, &quick_cfg()).unwrap();
    assert!(r.mean_accuracy >= 85.0, "{r:?}");
    assert_eq!(r.fold_accuracy.len(), 3);
    assert_eq!(r.meta.condition, Some(Condition::ImaginedSpeech));
    let rows: Vec<u64> = r.confusion.iter().map(|row| row.iter().sum()).collect();
    assert_eq!(rows, vec![12, 12, 12]);
    assert!(r.fold_accuracy.iter().all(|a| (0.0..=100.0).contains(a)));
}

#[test]
fn cross_validation_is_deterministic() {
    let ds = tone_dataset(3, 6, 1);
    let mut cfg = quick_cfg();
    cfg.train.epochs = 2;
    let a = cross_validate(&ds, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| cross_validate(&ds, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn sweep_ranks_informative_channel_first() {
    let ds = tone_dataset(3, 12, 2);
    let rows = channel_sweep(&ds, &["T7", "F3", "CP5"], &quick_cfg()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].label, "T7");
    assert!(rows[0].mean_accuracy > rows[1].mean_accuracy);
    assert!(rows[0].mean_accuracy > rows[2].mean_accuracy);
}

#[test]
fn one_label_sweep_matches_cross_validate() {
    let ds = tone_dataset(3, 6, 3);
    let mut cfg = quick_cfg();
    cfg.train.epochs = 2;
    let rows = channel_sweep(&ds, &["F3"], &cfg).unwrap();
    let direct = cross_validate(&ds.select_channels(&["F3"]).unwrap(), &cfg).unwrap();
    assert_eq!(rows[0].report, direct);
    assert!(channel_sweep(&ds, &["Oz"], &cfg).is_err());
}

#[test]
fn ablation_has_four_arms() {
    let ds = tone_dataset(3, 6, 4);
    let mut cfg = quick_cfg();
    cfg.train.epochs = 2;
    let arms = ablation_compare(&ds, "T7", &cfg).unwrap();
    assert_eq!(arms.len(), 4);
    let keys: Vec<(String, bool)> = arms.iter().map(|a| (a.channels.clone(), a.spectral_block)).collect();
    assert_eq!(
        keys,
        vec![
            ("all".to_string(), true),
            ("all".to_string(), false),
            ("T7".to_string(), true),
            ("T7".to_string(), false)
        ]
    );
    // same folds in every arm: identical per-subject test counts per fold
    assert!(arms.iter().all(|a| a.report.meta.k == 3));
}

#[test]
fn permuted_labels_keep_class_counts() {
    let ds = tone_dataset(3, 6, 5);
    let p = permute_subjects(&ds, 9);
    let mut a = ds.labels();
    let mut b = p.labels();
    assert_ne!(a, b);
    a.sort();
    b.sort();
    assert_eq!(a, b);
}
