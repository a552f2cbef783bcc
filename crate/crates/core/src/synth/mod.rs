//! Seeded synthetic recordings with subject-specific high-gamma signatures.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{ms_to_samples, speech_montage, Condition, Event, Recording, SPEECH_MONTAGE};
use crate::error::{Error, Result};
use crate::pipeline::{chain_gain, PreprocessConfig};

/// Channel carrying the full-strength subject oscillator.
pub const INFORMATIVE_CHANNEL: &str = "T7";
/// Trials per subject and condition in the original protocol.
pub const FULL_TRIALS: usize = 300;
pub const DESK_TRIALS: usize = 40;

pub const FREQ_GRID_START: f64 = 32.5;
pub const FREQ_GRID_STEP: f64 = 5.0;
pub const FREQ_GRID_SLOTS: usize = 18;
pub const LATENCY_GRID_START_MS: f64 = 250.0;
pub const LATENCY_GRID_STEP_MS: f64 = 150.0;
pub const LATENCY_GRID_SLOTS: usize = 12;

/// Oscillator gain on channels other than the informative one.
const SIDE_GAIN: f64 = 0.1;
/// Frequency offset per montage position, so side oscillators drift by whole
/// cycles against each other over a 2 s window.
const CHANNEL_OFFSET_HZ: f64 = 0.5;
const PARTNERS_PER_SUBJECT: usize = 2;
const BUMP_SIGMA_MS: f64 = 60.0;

const RAMP_MS: f64 = 250.0;
const PRE_MS: f64 = 500.0;
const POST_MS: f64 = 2000.0;
const GAP_MS: f64 = 250.0;
const LEAD_MS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub channel: String,
    pub freq: f64,
    pub gain: f64,
}

/// Pair whose phases are locked in the speech-production conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockedPair {
    pub a: String,
    pub b: String,
    /// Amplitude of the shared component relative to the source, in [0, 1].
    pub strength: f64,
    /// Phase lag of `b` behind `a`, radians.
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject: usize,
    pub peak_freq: f64,
    pub latency_ms: f64,
    pub oscillators: Vec<Oscillator>,
    pub locked_pairs: Vec<LockedPair>,
}

/// Amplitude SNR (oscillator RMS over in-band background RMS) per condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionSnr {
    pub imagined_speech: f64,
    pub overt_speech: f64,
    pub speech_perception: f64,
    pub resting_state: f64,
}

impl Default for ConditionSnr {
    fn default() -> Self {
        ConditionSnr {
            imagined_speech: 0.5,
            overt_speech: 0.5,
            speech_perception: 0.12,
            resting_state: 0.06,
        }
    }
}

impl ConditionSnr {
    pub fn get(&self, c: Condition) -> f64 {
        match c {
            Condition::ImaginedSpeech => self.imagined_speech,
            Condition::OvertSpeech => self.overt_speech,
            Condition::SpeechPerception => self.speech_perception,
            Condition::RestingState => self.resting_state,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// Trials per subject per condition.
    pub trials: usize,
    /// Raw sampling rate, Hz.
    pub fs: f64,
    pub snr: ConditionSnr,
    /// In-band (30-120 Hz) background RMS, µV.
    pub noise_rms: f64,
    /// Peak in-band RMS of the latency burst relative to the background.
    pub bump_gain: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 9,
            trials: DESK_TRIALS,
            fs: 500.0,
            snr: ConditionSnr::default(),
            noise_rms: 5.0,
            bump_gain: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_subjects must be at least 2, got {}",
                self.n_subjects
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        for c in Condition::ALL {
            let v = self.snr.get(c);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("snr.{c} must be positive, got {v}")));
            }
        }
        if !(self.noise_rms > 0.0 && self.noise_rms.is_finite()) {
            return Err(Error::InvalidArgument("noise_rms must be positive".into()));
        }
        if !(self.bump_gain >= 0.0 && self.bump_gain.is_finite()) {
            return Err(Error::InvalidArgument("bump_gain must be non-negative".into()));
        }
        // the preprocessing chain must accept this rate
        chain_gain(&PreprocessConfig::default(), self.fs, 60.0)?;
        Ok(())
    }
}

/// Distinct frequency and latency slots per subject, plus locked partners of
/// the informative channel.
pub fn make_profiles(n_subjects: usize, seed: u64) -> Result<Vec<SubjectProfile>> {
    if n_subjects < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 subjects, got {n_subjects}"
        )));
    }
    if n_subjects > FREQ_GRID_SLOTS {
        return Err(Error::GridExhausted(format!(
            "{n_subjects} subjects but only {FREQ_GRID_SLOTS} frequency slots at {FREQ_GRID_STEP} Hz spacing"
        )));
    }
    if n_subjects > LATENCY_GRID_SLOTS {
        return Err(Error::GridExhausted(format!(
            "{n_subjects} subjects but only {LATENCY_GRID_SLOTS} latency slots at {LATENCY_GRID_STEP_MS} ms spacing"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq_slots: Vec<usize> = (0..FREQ_GRID_SLOTS).collect();
    freq_slots.shuffle(&mut rng);
    let mut lat_slots: Vec<usize> = (0..LATENCY_GRID_SLOTS).collect();
    lat_slots.shuffle(&mut rng);
    let home = SPEECH_MONTAGE.iter().position(|&l| l == INFORMATIVE_CHANNEL).expect("informative channel");
    let others: Vec<&str> = SPEECH_MONTAGE.iter().copied().filter(|&l| l != INFORMATIVE_CHANNEL).collect();

    Ok((0..n_subjects)
        .map(|s| {
            let peak = FREQ_GRID_START + FREQ_GRID_STEP * freq_slots[s] as f64;
            let oscillators = SPEECH_MONTAGE
                .iter()
                .enumerate()
                .map(|(c, &label)| Oscillator {
                    channel: label.to_string(),
                    freq: peak + CHANNEL_OFFSET_HZ * (c as f64 - home as f64),
                    gain: if c == home { 1.0 } else { SIDE_GAIN },
                })
                .collect();
            let locked_pairs = others
                .choose_multiple(&mut rng, PARTNERS_PER_SUBJECT)
                .map(|&b| LockedPair {
                    a: INFORMATIVE_CHANNEL.to_string(),
                    b: b.to_string(),
                    strength: rng.random_range(0.7..=1.0),
                    lag: rng.random_range(0.0..FRAC_PI_2),
                })
                .collect();
            SubjectProfile {
                subject: s,
                peak_freq: peak,
                latency_ms: LATENCY_GRID_START_MS + LATENCY_GRID_STEP_MS * lat_slots[s] as f64,
                oscillators,
                locked_pairs,
            }
        })
        .collect())
}

/// Sample layout of one trial slot.
struct Layout {
    fs: f64,
    slot: usize,
    ramp: usize,
    pre: usize,
    post: usize,
    lead: usize,
}

impl Layout {
    fn new(fs: f64) -> Self {
        Layout {
            fs,
            slot: ms_to_samples(RAMP_MS * 2.0 + PRE_MS + POST_MS + GAP_MS, fs),
            ramp: ms_to_samples(RAMP_MS, fs),
            pre: ms_to_samples(PRE_MS, fs),
            post: ms_to_samples(POST_MS, fs),
            lead: ms_to_samples(LEAD_MS, fs),
        }
    }

    fn onset_in_slot(&self) -> usize {
        self.ramp + self.pre
    }

    /// Raised-cosine window covering pre-onset and post-onset spans.
    fn window(&self) -> Vec<f64> {
        let flat = self.pre + self.post;
        (0..self.slot)
            .map(|i| {
                if i < self.ramp {
                    0.5 - 0.5 * (PI * i as f64 / self.ramp as f64).cos()
                } else if i < self.ramp + flat {
                    1.0
                } else if i < 2 * self.ramp + flat {
                    let j = i - self.ramp - flat;
                    0.5 + 0.5 * (PI * j as f64 / self.ramp as f64).cos()
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// 1/f background of length `n`, scaled so its 30-120 Hz content has the
/// requested RMS in expectation.
struct PinkNoise {
    n: usize,
    shape: Vec<f64>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl PinkNoise {
    fn new(n: usize, fs: f64, band: (f64, f64), rms: f64) -> Self {
        let half = n.div_ceil(2);
        let mut shape = vec![0.0; half];
        let mut band_power = 0.0;
        for (k, g) in shape.iter_mut().enumerate().skip(1) {
            let f = k as f64 * fs / n as f64;
            *g = 1.0 / f.max(1.0).sqrt();
            if f >= band.0 && f <= band.1 {
                band_power += 2.0 * *g * *g;
            }
        }
        let scale = rms / band_power.sqrt();
        shape.iter_mut().for_each(|g| *g *= scale);
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        PinkNoise { n, shape, ifft }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.n];
        for k in 1..self.shape.len() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let c = Complex64::new(re, im) * (self.shape[k] / 2f64.sqrt());
            spec[k] = c;
            spec[self.n - k] = c.conj();
        }
        self.ifft.process(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }
}

struct Trial {
    subject: usize,
    condition: Condition,
    index: usize,
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    profiles: &'a [SubjectProfile],
    layout: Layout,
    window: Vec<f64>,
    noise: PinkNoise,
    pre_cfg: PreprocessConfig,
    band_fraction: f64,
}

impl Generator<'_> {
    /// Peak amplitude that reaches `rms_ratio * noise_rms` RMS after preprocessing.
    fn amplitude(&self, rms_ratio: f64, freq: f64) -> Result<f64> {
        let gain = chain_gain(&self.pre_cfg, self.cfg.fs, freq)?;
        Ok(2f64.sqrt() * rms_ratio * self.cfg.noise_rms / gain)
    }

    fn background(&self, stream: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        let n_ch = SPEECH_MONTAGE.len();
        let mut block = Array2::zeros((n_ch, self.layout.slot));
        for c in 0..n_ch {
            let x = self.noise.sample(&mut rng);
            block.row_mut(c).iter_mut().zip(x).for_each(|(b, v)| *b = v);
        }
        block
    }

    fn trial(&self, t: &Trial, stream: u64) -> Result<Array2<f64>> {
        let mut block = self.background(stream);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5EED_0F7A_1A15);
        rng.set_stream(stream);
        let p = &self.profiles[t.subject];
        let snr = self.cfg.snr.get(t.condition);
        let fs = self.layout.fs;
        let montage = speech_montage();
        let row_of = |label: &str| montage.iter().position(|c| c.label == label).expect("montage label");

        let mut home_phase = 0.0;
        for osc in &p.oscillators {
            let amp = self.amplitude(snr * osc.gain, osc.freq)?;
            let phase = rng.random_range(0.0..TAU);
            if osc.channel == INFORMATIVE_CHANNEL {
                home_phase = phase;
            }
            let w = TAU * osc.freq / fs;
            let mut row = block.row_mut(row_of(&osc.channel));
            for (i, v) in row.iter_mut().enumerate() {
                *v += amp * self.window[i] * (w * i as f64 + phase).sin();
            }
        }

        if matches!(t.condition, Condition::ImaginedSpeech | Condition::OvertSpeech) {
            for pair in &p.locked_pairs {
                let amp = self.amplitude(snr * pair.strength, p.peak_freq)?;
                let w = TAU * p.peak_freq / fs;
                let mut row = block.row_mut(row_of(&pair.b));
                for (i, v) in row.iter_mut().enumerate() {
                    *v += amp * self.window[i] * (w * i as f64 + home_phase - pair.lag).sin();
                }
            }
        }

        if t.condition != Condition::RestingState && self.cfg.bump_gain > 0.0 {
            let centre = self.layout.onset_in_slot() as f64 + p.latency_ms * fs / 1000.0;
            let sigma = BUMP_SIGMA_MS * fs / 1000.0;
            // white carrier; only part of its power falls inside the band
            let amp = self.cfg.bump_gain * self.cfg.noise_rms / self.band_fraction.sqrt();
            for mut row in block.rows_mut() {
                for (i, v) in row.iter_mut().enumerate() {
                    let g = (-0.5 * ((i as f64 - centre) / sigma).powi(2)).exp();
                    if g > 1e-6 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v += amp * g * z;
                    }
                }
            }
        }
        Ok(block)
    }
}

/// Continuous recording over the speech montage: a 1 s lead-in, then one
/// slot per trial ordered by subject, condition and trial index, then a 1 s
/// tail. Every slot draws from its own ChaCha stream.
pub fn generate(cfg: &SynthConfig) -> Result<Recording> {
    cfg.validate()?;
    let profiles = make_profiles(cfg.n_subjects, cfg.seed)?;
    let layout = Layout::new(cfg.fs);
    let pre_cfg = PreprocessConfig::default();
    let gen = Generator {
        cfg,
        profiles: &profiles,
        window: layout.window(),
        noise: PinkNoise::new(layout.slot, cfg.fs, pre_cfg.band, cfg.noise_rms),
        band_fraction: (pre_cfg.band.1 - pre_cfg.band.0) / (cfg.fs / 2.0),
        pre_cfg,
        layout,
    };
    let layout = &gen.layout;

    let mut trials = Vec::new();
    for subject in 0..cfg.n_subjects {
        for condition in Condition::ALL {
            for index in 0..cfg.trials {
                trials.push(Trial {
                    subject,
                    condition,
                    index,
                });
            }
        }
    }
    let n_ch = SPEECH_MONTAGE.len();
    let total = 2 * layout.lead + trials.len() * layout.slot;
    let mut samples = Array2::zeros((n_ch, total));

    // lead-in and tail reuse background slots on reserved streams
    let pad_slots = layout.lead.div_ceil(layout.slot);
    for (j, start) in [(0u64, 0usize), (1, total - layout.lead)] {
        let mut filled = 0;
        for k in 0..pad_slots {
            let b = gen.background(u64::MAX - 2 * k as u64 - j);
            let take = (layout.lead - filled).min(layout.slot);
            samples
                .slice_mut(s![.., start + filled..start + filled + take])
                .assign(&b.slice(s![.., ..take]));
            filled += take;
        }
    }

    const BATCH: usize = 64;
    let mut events = Vec::with_capacity(trials.len());
    for (b, chunk) in trials.chunks(BATCH).enumerate() {
        let blocks: Vec<Array2<f64>> = chunk
            .par_iter()
            .enumerate()
            .map(|(j, t)| gen.trial(t, (b * BATCH + j) as u64))
            .collect::<Result<_>>()?;
        for (j, (t, block)) in chunk.iter().zip(blocks).enumerate() {
            let start = layout.lead + (b * BATCH + j) * layout.slot;
            samples.slice_mut(s![.., start..start + layout.slot]).assign(&block);
            events.push(Event {
                onset: start + layout.onset_in_slot(),
                subject: t.subject,
                condition: t.condition,
                session: 0,
                word: t.index as u32,
            });
        }
    }
    Recording::new(samples, cfg.fs, speech_montage(), events)
}

#[cfg(test)]
mod tests;
