//! Phase-locking connectivity and envelope summaries.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{position, ChannelId, Condition, Dataset, Epoch, SPEECH_MONTAGE};
use crate::dsp::{analytic_envelope, analytic_phase_fft, hilbert_fir};
use crate::error::{Error, Result};
use crate::stats::{mean, paired_ttest, sample_std};

/// Taps of the Hilbert FIR used for envelopes.
pub const ENVELOPE_TAPS: usize = 30;

/// Phase-locking value of two equally long signals.
pub fn plv(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "PLV inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let pa = analytic_phase_fft(x)?;
    let pb = analytic_phase_fft(y)?;
    Ok(plv_from_phasors(&phasors(&pa), &phasors(&pb)))
}

fn phasors(phase: &[f64]) -> Vec<Complex64> {
    phase.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
}

fn plv_from_phasors(a: &[Complex64], b: &[Complex64]) -> f64 {
    let sum: Complex64 = a.iter().zip(b).map(|(u, v)| u * v.conj()).sum();
    (sum.norm() / a.len() as f64).clamp(0.0, 1.0)
}

/// PLV between two channels over the post-onset window of one epoch.
pub fn plv_pair(epoch: &Epoch, montage: &[ChannelId], ch_a: &str, ch_b: &str) -> Result<f64> {
    let ia = position(montage, ch_a)?;
    let ib = position(montage, ch_b)?;
    let post = epoch.post_onset();
    let a: Vec<f64> = post.row(ia).to_vec();
    let b: Vec<f64> = post.row(ib).to_vec();
    plv(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPlv {
    pub a: String,
    pub b: String,
    /// One value per trial, in dataset order.
    pub per_trial: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlvResult {
    pub condition: Condition,
    pub subject: Option<usize>,
    pub pairs: Vec<PairPlv>,
}

impl PlvResult {
    pub fn get(&self, a: &str, b: &str) -> Option<&PairPlv> {
        self.pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

/// Default channels for connectivity analyses.
pub fn speech_labels() -> Vec<String> {
    SPEECH_MONTAGE.iter().map(|s| s.to_string()).collect()
}

fn resolve(ds: &Dataset, labels: &[String]) -> Result<Vec<(String, usize)>> {
    labels
        .iter()
        .map(|l| {
            let i = position(&ds.montage, l)?;
            Ok((ds.montage[i].label.clone(), i))
        })
        .collect()
}

/// All-pairs per-trial PLV for one condition, optionally for one subject.
pub fn plv_matrix(ds: &Dataset, condition: Condition, labels: &[String], subject: Option<usize>) -> Result<PlvResult> {
    let chans = resolve(ds, labels)?;
    let trials: Vec<&Epoch> = ds
        .epochs
        .iter()
        .filter(|e| e.condition == condition && subject.is_none_or(|s| e.subject == s))
        .collect();
    if trials.is_empty() {
        return Err(Error::EmptyDataset(format!("no {condition} epochs to analyse")));
    }
    // per trial: PLV for every unordered pair (i < j)
    let per_trial: Vec<Vec<f64>> = trials
        .par_iter()
        .map(|e| -> Result<Vec<f64>> {
            let post = e.post_onset();
            let ph: Vec<Vec<Complex64>> = chans
                .iter()
                .map(|&(_, row)| Ok(phasors(&analytic_phase_fft(&post.row(row).to_vec())?)))
                .collect::<Result<_>>()?;
            let mut out = Vec::new();
            for i in 0..ph.len() {
                for j in i + 1..ph.len() {
                    out.push(plv_from_phasors(&ph[i], &ph[j]));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    let mut k = 0;
    for i in 0..chans.len() {
        for j in i + 1..chans.len() {
            let values: Vec<f64> = per_trial.iter().map(|t| t[k]).collect();
            pairs.push(PairPlv {
                a: chans[i].0.clone(),
                b: chans[j].0.clone(),
                mean: mean(&values),
                per_trial: values,
            });
            k += 1;
        }
    }
    Ok(PlvResult {
        condition,
        subject,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairContrast {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub p: f64,
    /// Mean of `cond_a - cond_b` per-trial PLV.
    pub mean_difference: f64,
    pub direction: Direction,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub cond_a: Condition,
    pub cond_b: Condition,
    pub alpha: f64,
    pub n_pairs: usize,
    pub pairs: Vec<PairContrast>,
}

impl ContrastResult {
    pub fn get(&self, a: &str, b: &str) -> Option<&PairContrast> {
        self.pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn n_significant(&self) -> usize {
        self.pairs.iter().filter(|p| p.significant).count()
    }
}

/// Epoch indices of `condition` grouped by subject, in dataset order.
fn by_subject(ds: &Dataset, condition: Condition, subject: Option<usize>) -> BTreeMap<usize, Vec<usize>> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in ds.epochs.iter().enumerate() {
        if e.condition == condition && subject.is_none_or(|s| e.subject == s) {
            map.entry(e.subject).or_default().push(i);
        }
    }
    map
}

/// Paired t-test per channel pair on per-trial PLV, pairing the k-th trial
/// of `cond_a` with the k-th trial of `cond_b` within each subject.
pub fn plv_contrast(
    ds: &Dataset,
    cond_a: Condition,
    cond_b: Condition,
    alpha: f64,
    labels: &[String],
    subject: Option<usize>,
) -> Result<ContrastResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let ga = by_subject(ds, cond_a, subject);
    let gb = by_subject(ds, cond_b, subject);
    let subjects: Vec<usize> = ga.keys().chain(gb.keys()).copied().collect();
    let mut idx_a = Vec::new();
    let mut idx_b = Vec::new();
    for s in subjects.iter().copied().collect::<std::collections::BTreeSet<_>>() {
        let (a, b) = (ga.get(&s).map_or(0, Vec::len), gb.get(&s).map_or(0, Vec::len));
        if a != b {
            return Err(Error::DegeneratePairing(format!(
                "subject {s} has {a} {cond_a} trials but {b} {cond_b} trials"
            )));
        }
        idx_a.extend(ga.get(&s).into_iter().flatten());
        idx_b.extend(gb.get(&s).into_iter().flatten());
    }
    if idx_a.len() < 2 {
        return Err(Error::DegeneratePairing(format!(
            "need at least 2 paired trials, found {}",
            idx_a.len()
        )));
    }
    let ra = plv_matrix(&ds.subset(&idx_a), cond_a, labels, None)?;
    let rb = plv_matrix(&ds.subset(&idx_b), cond_b, labels, None)?;
    let pairs = ra
        .pairs
        .iter()
        .zip(&rb.pairs)
        .map(|(pa, pb)| {
            let diffs: Vec<f64> = pa.per_trial.iter().zip(&pb.per_trial).map(|(x, y)| x - y).collect();
            let md = mean(&diffs);
            let (t, p) = if sample_std(&diffs) > 0.0 {
                let r = paired_ttest(&pa.per_trial, &pb.per_trial)?;
                (r.statistic, r.p)
            } else if md == 0.0 {
                (0.0, 1.0)
            } else {
                (md.signum() * f64::INFINITY, 0.0)
            };
            let direction = if md > 0.0 {
                Direction::Increase
            } else if md < 0.0 {
                Direction::Decrease
            } else {
                Direction::None
            };
            Ok(PairContrast {
                a: pa.a.clone(),
                b: pa.b.clone(),
                t,
                p,
                mean_difference: md,
                direction,
                significant: p < alpha,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ContrastResult {
        cond_a,
        cond_b,
        alpha,
        n_pairs: idx_a.len(),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub subject: usize,
    pub condition: Condition,
    pub n_trials: usize,
    /// Sample times relative to onset.
    pub times_ms: Vec<f64>,
    pub mean: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Per trial: 30-tap Hilbert envelope of every channel, baseline-subtracted
/// with the pre-onset mean, averaged across channels. Summarized as mean and
/// mean ± sample std across trials.
pub fn envelope_summary(ds: &Dataset, condition: Condition, subject: usize) -> Result<EnvelopeSummary> {
    let trials: Vec<&Epoch> = ds
        .epochs
        .iter()
        .filter(|e| e.condition == condition && e.subject == subject)
        .collect();
    if trials.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no {condition} epochs for subject {subject}"
        )));
    }
    let onset = ds.onset_index();
    if onset == 0 {
        return Err(Error::InsufficientMargin { onset: 0, needed: 1 });
    }
    let fir = hilbert_fir(ENVELOPE_TAPS)?;
    let n_times = ds.n_times();
    let traces: Vec<Vec<f64>> = trials
        .par_iter()
        .map(|e| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; n_times];
            for row in e.data.rows() {
                let env = analytic_envelope(&row.to_vec(), &fir)?;
                let base = mean(&env[..onset]);
                for (a, v) in acc.iter_mut().zip(&env) {
                    *a += v - base;
                }
            }
            let c = e.n_channels() as f64;
            acc.iter_mut().for_each(|v| *v /= c);
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut mean_tr = vec![0.0; n_times];
    let mut upper = vec![0.0; n_times];
    let mut lower = vec![0.0; n_times];
    let mut column = vec![0.0; traces.len()];
    for t in 0..n_times {
        for (c, tr) in column.iter_mut().zip(&traces) {
            *c = tr[t];
        }
        let m = mean(&column);
        let sd = if column.len() > 1 { sample_std(&column) } else { 0.0 };
        mean_tr[t] = m;
        upper[t] = m + sd;
        lower[t] = m - sd;
    }
    let times_ms = (0..n_times)
        .map(|i| (i as f64 - onset as f64) * 1000.0 / ds.fs)
        .collect();
    Ok(EnvelopeSummary {
        subject,
        condition,
        n_trials: traces.len(),
        times_ms,
        mean: mean_tr,
        upper,
        lower,
    })
}
