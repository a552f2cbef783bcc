use super::*;
use crate::dsp::periodogram;
use crate::neurofeat::{envelope_summary, plv_contrast, speech_labels};
use crate::pipeline::preprocess;
use crate::stats::{mean, sample_std};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 2,
        trials: 12,
        seed,
        ..Default::default()
    }
}

#[test]
fn profiles_respect_grids() {
    let p = make_profiles(9, 3).unwrap();
    assert_eq!(p.len(), 9);
    for i in 0..9 {
        for j in i + 1..9 {
            assert!((p[i].peak_freq - p[j].peak_freq).abs() >= 5.0);
            assert!((p[i].latency_ms - p[j].latency_ms).abs() >= 150.0);
        }
        assert!(p[i].oscillators.iter().all(|o| (30.0..=120.0).contains(&o.freq)));
        assert!(p[i].locked_pairs.iter().all(|l| (0.0..=1.0).contains(&l.strength)));
        assert_eq!(p[i].locked_pairs.len(), 2);
        assert_ne!(p[i].locked_pairs[0].b, p[i].locked_pairs[1].b);
    }
    assert_eq!(make_profiles(2, 5).unwrap(), make_profiles(2, 5).unwrap());
}

#[test]
fn grids_run_out() {
    assert!(matches!(make_profiles(40, 0), Err(Error::GridExhausted(_))));
    assert!(matches!(make_profiles(13, 0), Err(Error::GridExhausted(_))));
    assert!(make_profiles(12, 0).is_ok());
    assert!(make_profiles(1, 0).is_err());
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = small(0);
    cfg.snr.resting_state = 0.0;
    assert!(generate(&cfg).unwrap_err().is_config_error());
    let mut cfg = small(0);
    cfg.fs = 333.0;
    assert!(generate(&cfg).unwrap_err().is_config_error());
}

#[test]
fn same_seed_same_recording() {
    let cfg = SynthConfig {
        trials: 2,
        ..small(11)
    };
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.events, b.events);
    assert_eq!(a.events.len(), 2 * 4 * 2);
    let c = generate(&SynthConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn subjects_have_distinct_spectral_peaks() {
    let cfg = small(1);
    let profiles = make_profiles(cfg.n_subjects, cfg.seed).unwrap();
    let ds = preprocess(&generate(&cfg).unwrap(), &PreprocessConfig::default()).unwrap();
    let t7 = ds.select_channels(&["T7"]).unwrap();
    let mut peaks = Vec::new();
    for s in 0..2 {
        let mut avg: Vec<f64> = Vec::new();
        let mut freqs = Vec::new();
        for e in t7.epochs.iter().filter(|e| e.subject == s && e.condition == Condition::ImaginedSpeech) {
            let (f, p) = periodogram(&e.post_onset().row(0).to_vec(), ds.fs);
            if avg.is_empty() {
                avg = vec![0.0; p.len()];
                freqs = f;
            }
            avg.iter_mut().zip(&p).for_each(|(a, v)| *a += v);
        }
        let i = (0..avg.len()).max_by(|&a, &b| avg[a].total_cmp(&avg[b])).unwrap();
        assert!((freqs[i] - profiles[s].peak_freq).abs() <= 1.0, "{} vs {}", freqs[i], profiles[s].peak_freq);
        peaks.push(freqs[i]);
    }
    assert!((peaks[0] - peaks[1]).abs() >= 5.0);
}

/// Per trial: post-onset minus pre-onset mean of the baseline-corrected
/// channel-mean envelope. Returns (mean, std) across trials.
fn bump_statistic(ds: &crate::data::Dataset, condition: Condition, subject: usize) -> (f64, f64) {
    let onset = ds.onset_index();
    let per_trial: Vec<f64> = ds
        .epochs
        .iter()
        .enumerate()
        .filter(|(_, e)| e.condition == condition && e.subject == subject)
        .map(|(i, _)| {
            let one = ds.subset(&[i]);
            let s = envelope_summary(&one, condition, subject).unwrap();
            mean(&s.mean[onset..]) - mean(&s.mean[..onset])
        })
        .collect();
    (mean(&per_trial), sample_std(&per_trial))
}

#[test]
fn resting_state_has_no_envelope_bump() {
    let cfg = small(2);
    let ds = preprocess(&generate(&cfg).unwrap(), &PreprocessConfig::default()).unwrap();
    for s in 0..2 {
        let (m, sd) = bump_statistic(&ds, Condition::RestingState, s);
        assert!(m.abs() <= 2.0 * sd, "rest subject {s}: {m} vs {sd}");
        let (mi, _) = bump_statistic(&ds, Condition::ImaginedSpeech, s);
        assert!(mi > m, "imagined {mi} vs rest {m}");
    }
}

#[test]
fn locked_pairs_are_recoverable() {
    let cfg = small(3);
    let profiles = make_profiles(cfg.n_subjects, cfg.seed).unwrap();
    let ds = preprocess(&generate(&cfg).unwrap(), &PreprocessConfig::default()).unwrap();
    let r = plv_contrast(
        &ds,
        Condition::ImaginedSpeech,
        Condition::RestingState,
        0.01,
        &speech_labels(),
        Some(0),
    )
    .unwrap();
    for lp in &profiles[0].locked_pairs {
        let c = r.get(&lp.a, &lp.b).unwrap();
        assert!(c.significant && c.mean_difference > 0.0, "{c:?}");
    }
}
