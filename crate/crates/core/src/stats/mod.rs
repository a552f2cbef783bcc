//! Hypothesis tests: Kruskal-Wallis, permutation t-tests and the paired
//! t-test, plus the distribution tails they rely on.

mod special;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use special::{beta_reg, chi2_sf, gamma_q, ln_gamma, t_sf};

/// Default permutation count, with add-one smoothing on the p-value.
pub const DEFAULT_PERMUTATIONS: usize = 10_000;
const MIN_PERMUTATIONS: usize = 100;
const PERMUTATION_CHUNK: usize = 1000;

/// A test statistic and its p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_permutations: Option<usize>,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn sample_std(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Ranks with ties resolved to their mid-rank (1-based).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Kruskal-Wallis H with tie correction; p from chi-square with g - 1 df.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(
            "Kruskal-Wallis needs at least 2 groups".into(),
        ));
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(Error::InvalidArgument("Kruskal-Wallis group is empty".into()));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    if pooled.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN observation".into()));
    }
    let n = pooled.len() as f64;
    let ranks = midranks(&pooled);
    let df = groups.len() - 1;

    let mut offset = 0;
    let mut sum_term = 0.0;
    for g in groups {
        let len = g.as_ref().len();
        let r: f64 = ranks[offset..offset + len].iter().sum();
        sum_term += r * r / len as f64;
        offset += len;
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0);

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p: 1.0,
            df: Some(df as f64),
            n_permutations: None,
        });
    }
    let h = (h_raw / correction).max(0.0);
    Ok(TestResult {
        statistic: h,
        p: chi2_sf(h, df)?,
        df: Some(df as f64),
        n_permutations: None,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

/// Welch's unequal-variance t statistic.
pub fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let se = (variance(a) / a.len() as f64 + variance(b) / b.len() as f64).sqrt();
    ratio(mean(a) - mean(b), se)
}

/// One-sample t statistic of paired differences.
pub fn paired_t(diffs: &[f64]) -> f64 {
    let se = sample_std(diffs) / (diffs.len() as f64).sqrt();
    ratio(mean(diffs), se)
}

/// Two-sided permutation t-test. Unpaired uses Welch's t over label
/// permutations; paired uses the differences' t over random sign flips.
/// `p = (1 + #{|t_perm| >= |t_obs|}) / (1 + n_perm)`.
///
/// Permutations run in fixed chunks, each with its own ChaCha stream, so the
/// result does not depend on the thread count.
pub fn permutation_ttest(
    a: &[f64],
    b: &[f64],
    n_perm: usize,
    seed: u64,
    paired: bool,
) -> Result<TestResult> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {n_perm}"
        )));
    }
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "permutation t-test needs at least 2 observations per sample".into(),
        ));
    }
    if paired && a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }

    let n_chunks = n_perm.div_ceil(PERMUTATION_CHUNK);
    let (t_obs, exceed) = if paired {
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let t_obs = paired_t(&diffs);
        let threshold = t_obs.abs() * (1.0 - 1e-12);
        let exceed: usize = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = chunk_rng(seed, chunk);
                let count = chunk_len(chunk, n_perm);
                let mut flipped = diffs.clone();
                (0..count)
                    .filter(|_| {
                        for (f, d) in flipped.iter_mut().zip(&diffs) {
                            *f = if rng.random::<bool>() { *d } else { -*d };
                        }
                        paired_t(&flipped).abs() >= threshold
                    })
                    .count()
            })
            .sum();
        (t_obs, exceed)
    } else {
        let t_obs = welch_t(a, b);
        let threshold = t_obs.abs() * (1.0 - 1e-12);
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let exceed: usize = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = chunk_rng(seed, chunk);
                let count = chunk_len(chunk, n_perm);
                let mut shuffled = pooled.clone();
                (0..count)
                    .filter(|_| {
                        shuffled.shuffle(&mut rng);
                        let (pa, pb) = shuffled.split_at(a.len());
                        welch_t(pa, pb).abs() >= threshold
                    })
                    .count()
            })
            .sum();
        (t_obs, exceed)
    };

    Ok(TestResult {
        statistic: t_obs,
        p: (1 + exceed) as f64 / (1 + n_perm) as f64,
        df: None,
        n_permutations: Some(n_perm),
    })
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_len(chunk: usize, total: usize) -> usize {
    PERMUTATION_CHUNK.min(total - chunk * PERMUTATION_CHUNK)
}

/// Paired two-sided t-test with `n - 1` degrees of freedom.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sd = sample_std(&diffs);
    if !(sd > 0.0) {
        return Err(Error::DegeneratePairing(
            "differences have zero variance".into(),
        ));
    }
    let n = diffs.len();
    let t = mean(&diffs) / (sd / (n as f64).sqrt());
    let df = n - 1;
    let p = (2.0 * t_sf(t.abs(), df)?).min(1.0);
    Ok(TestResult {
        statistic: t,
        p,
        df: Some(df as f64),
        n_permutations: None,
    })
}
