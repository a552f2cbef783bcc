//! Butterworth IIR design via analog prototype, band transform and the
//! prewarped bilinear transform, realized as second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
///
/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }
}

/// Cascade of second-order sections with an overall gain.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub gain: f64,
}

impl SosFilter {
    /// Complex response at `freq` Hz for sampling rate `fs`.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Magnitude response in dB (single pass).
    pub fn magnitude_db(&self, freq: f64, fs: f64) -> f64 {
        20.0 * self.response(freq, fs).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections
            .iter()
            .flat_map(|s| {
                let p = s.poles();
                if s.a2 == 0.0 {
                    vec![Complex64::new(-s.a1, 0.0)]
                } else {
                    p.to_vec()
                }
            })
            .collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Filter order as a count of sections.
    pub fn n_sections(&self) -> usize {
        self.sections.len()
    }

    /// Steady-state transposed-direct-form-II state for a unit step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut level = self.gain;
        self.sections
            .iter()
            .map(|s| {
                let y = s.dc_gain() * level;
                let z = [y - s.b0 * level, s.b2 * level - s.a2 * y];
                level = y;
                z
            })
            .collect()
    }

    /// Causal filtering starting from `state` (one pair per section).
    fn run(&self, x: &[f64], mut state: Vec<[f64; 2]>) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        for &v in x {
            let mut u = v * self.gain;
            for (s, z) in self.sections.iter().zip(state.iter_mut()) {
                let y = s.b0 * u + z[0];
                z[0] = s.b1 * u - s.a1 * y + z[1];
                z[1] = s.b2 * u - s.a2 * y;
                u = y;
            }
            out.push(u);
        }
        out
    }

    /// Causal, single-pass filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, vec![[0.0; 2]; self.sections.len()])
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be positive".into()));
    }
    Ok(())
}

fn check_edge(freq: f64, fs: f64) -> Result<()> {
    if !(fs > 0.0) {
        return Err(Error::InvalidArgument(format!("fs must be positive, got {fs}")));
    }
    if !(freq > 0.0 && freq < fs / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "edge frequency {freq} Hz outside (0, {}) Hz",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn prewarp(freq: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * freq / fs).tan()
}

fn bilinear(p: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + p) / (k - p)
}

/// Groups conjugate pole pairs and real poles into sections, then
/// attaches the (real) zeros two at a time.
fn to_sections(poles: &[Complex64], zeros: &[f64]) -> Vec<Biquad> {
    let tol = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut denominators: Vec<(f64, f64, usize)> = complex
        .iter()
        .map(|p| (-2.0 * p.re, p.norm_sqr(), 2))
        .collect();
    for pair in real.chunks(2) {
        match pair {
            [r1, r2] => denominators.push((-(r1 + r2), r1 * r2, 2)),
            [r] => denominators.push((-r, 0.0, 1)),
            _ => unreachable!(),
        }
    }

    let mut zeros = zeros.iter().copied();
    denominators
        .into_iter()
        .map(|(a1, a2, degree)| {
            let (b0, b1, b2) = if degree == 2 {
                let z1 = zeros.next().unwrap_or(0.0);
                let z2 = zeros.next().unwrap_or(0.0);
                (1.0, -(z1 + z2), z1 * z2)
            } else {
                let z1 = zeros.next().unwrap_or(0.0);
                (1.0, -z1, 0.0)
            };
            Biquad { b0, b1, b2, a1, a2 }
        })
        .collect()
}

fn normalized(sections: Vec<Biquad>, omega: f64) -> SosFilter {
    let mut filter = SosFilter {
        sections,
        gain: 1.0,
    };
    let z_inv = Complex64::from_polar(1.0, -omega);
    let mag = filter
        .sections
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
        .norm();
    filter.gain = 1.0 / mag;
    filter
}

/// Digital Butterworth band-pass of prototype order `order` (the
/// resulting filter has `2 * order` poles). Gain is -3.01 dB at both edges.
pub fn design_butterworth_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    fs: f64,
) -> Result<SosFilter> {
    check_order(order)?;
    check_edge(low_hz, fs)?;
    check_edge(high_hz, fs)?;
    if low_hz >= high_hz {
        return Err(Error::InvalidArgument(format!(
            "band edges must satisfy low < high, got {low_hz} >= {high_hz}"
        )));
    }
    let w1 = prewarp(low_hz, fs);
    let w2 = prewarp(high_hz, fs);
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let mut analog = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let scaled = p * bw / 2.0;
        let root = (scaled * scaled - w0 * w0).sqrt();
        analog.push(scaled + root);
        analog.push(scaled - root);
    }
    let poles: Vec<Complex64> = analog.iter().map(|&p| bilinear(p, fs)).collect();
    // order zeros at s = 0 map to z = 1, order zeros at infinity to z = -1
    let zeros: Vec<f64> = (0..order).flat_map(|_| [1.0, -1.0]).collect();

    let omega0 = 2.0 * (w0 / (2.0 * fs)).atan();
    let filter = normalized(to_sections(&poles, &zeros), omega0);
    assert!(filter.is_stable(), "band-pass design produced an unstable pole");
    Ok(filter)
}

/// Digital Butterworth low-pass, unit gain at DC.
pub fn design_butterworth_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<SosFilter> {
    check_order(order)?;
    check_edge(cutoff_hz, fs)?;
    let wc = prewarp(cutoff_hz, fs);
    let poles: Vec<Complex64> = prototype_poles(order)
        .into_iter()
        .map(|p| bilinear(p * wc, fs))
        .collect();
    let zeros = vec![-1.0; order];
    let filter = normalized(to_sections(&poles, &zeros), 0.0);
    assert!(filter.is_stable(), "low-pass design produced an unstable pole");
    Ok(filter)
}

/// Zero-phase forward-backward filtering with odd-reflection padding of
/// `3 * (2 * sections)` samples and steady-state initial conditions.
pub fn filtfilt(filter: &SosFilter, signal: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * 2 * filter.n_sections();
    let n = signal.len();
    if n <= pad {
        return Err(Error::SignalTooShort {
            len: n,
            needed: pad,
        });
    }
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let unit = filter.step_state();
    let scaled = |level: f64| -> Vec<[f64; 2]> {
        unit.iter().map(|z| [z[0] * level, z[1] * level]).collect()
    };

    let mut fwd = filter.run(&ext, scaled(ext[0]));
    fwd.reverse();
    let start = fwd[0];
    let mut back = filter.run(&fwd, scaled(start));
    back.reverse();
    Ok(back[pad..pad + n].to_vec())
}
