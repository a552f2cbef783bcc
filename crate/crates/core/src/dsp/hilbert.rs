//! Hilbert transformers: a windowed FIR design for envelopes and the exact
//! FFT analytic signal for instantaneous phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const MIN_HILBERT_TAPS: usize = 8;

/// Finite impulse response filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
}

impl FirFilter {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "FIR taps must be non-empty and finite".into(),
            ));
        }
        Ok(FirFilter { taps })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Delay in samples of a linear-phase design; half-integer for even lengths.
    pub fn group_delay(&self) -> f64 {
        (self.taps.len() as f64 - 1.0) / 2.0
    }

    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let w = -2.0 * PI * freq / fs;
        self.taps
            .iter()
            .enumerate()
            .map(|(k, &h)| Complex64::from_polar(h, w * k as f64))
            .sum()
    }

    /// Full causal convolution truncated to the input length.
    fn convolve_full(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let m = self.taps.len();
        let mut out = vec![0.0; n + m - 1];
        for (k, &h) in self.taps.iter().enumerate() {
            for (o, &v) in out[k..k + n].iter_mut().zip(x) {
                *o += h * v;
            }
        }
        out
    }
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hamming-windowed ideal Hilbert transformer. Odd lengths give a type-III
/// design, even lengths type IV. Taps are exactly odd-symmetric.
pub fn hilbert_fir(n_taps: usize) -> Result<FirFilter> {
    if n_taps < MIN_HILBERT_TAPS {
        return Err(Error::InvalidArgument(format!(
            "Hilbert FIR needs at least {MIN_HILBERT_TAPS} taps, got {n_taps}"
        )));
    }
    let window = hamming(n_taps);
    let center = (n_taps as f64 - 1.0) / 2.0;
    let mut taps = vec![0.0; n_taps];
    for k in 0..n_taps / 2 {
        let m = k as f64 - center;
        let ideal = (1.0 - (PI * m).cos()) / (PI * m);
        taps[k] = ideal * window[k];
        taps[n_taps - 1 - k] = -taps[k];
    }
    FirFilter::new(taps)
}

/// Windowed-sinc delay line with the same length (and delay) as `hilbert`.
fn matched_delay(len: usize) -> Vec<f64> {
    let window = hamming(len);
    let center = (len as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..len)
        .map(|k| {
            let m = k as f64 - center;
            let sinc = if m == 0.0 { 1.0 } else { (PI * m).sin() / (PI * m) };
            sinc * window[k]
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Magnitude of the analytic signal built with an FIR Hilbert transformer.
///
/// The real branch passes through a matched delay so both branches share
/// the filter's group delay; the output is re-aligned to the input by
/// `floor(group_delay)` samples. For even-length filters this leaves a
/// half-sample lag. The first and last `ceil(group_delay)` samples see
/// zero padding and are unreliable.
pub fn analytic_envelope(signal: &[f64], hilbert: &FirFilter) -> Result<Vec<f64>> {
    let m = hilbert.len();
    if signal.len() <= m {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            needed: m,
        });
    }
    let delay = FirFilter {
        taps: matched_delay(m),
    };
    let quad = hilbert.convolve_full(signal);
    let real = delay.convolve_full(signal);
    let shift = hilbert.group_delay().floor() as usize;
    Ok((0..signal.len())
        .map(|n| real[n + shift].hypot(quad[n + shift]))
        .collect())
}

/// Analytic signal via the one-sided spectrum.
pub fn analytic_signal_fft(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if n == 0 {
        return buf;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let weight = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= weight / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Instantaneous phase in (-π, π] of the FFT analytic signal.
pub fn analytic_phase_fft(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::InvalidArgument("empty signal".into()));
    }
    Ok(analytic_signal_fft(signal)
        .into_iter()
        .map(|z| {
            let p = z.im.atan2(z.re);
            if p <= -PI {
                PI
            } else {
                p
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unwrap(phase: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(phase.len());
        let mut offset = 0.0;
        for i in 0..phase.len() {
            if i > 0 {
                let d = phase[i] - phase[i - 1];
                if d > PI {
                    offset -= 2.0 * PI;
                } else if d < -PI {
                    offset += 2.0 * PI;
                }
            }
            out.push(phase[i] + offset);
        }
        out
    }

    #[test]
    fn taps_are_odd_symmetric() {
        for n in [8, 9, 30, 31, 64] {
            let h = hilbert_fir(n).unwrap();
            let asym = (0..n)
                .map(|k| (h.taps[k] + h.taps[n - 1 - k]).abs())
                .fold(0.0, f64::max);
            assert!(asym < 1e-12);
        }
    }

    #[test]
    fn thirty_tap_passband_is_flat() {
        // brute-force DTFT over the band
        let h = hilbert_fir(30).unwrap();
        for i in 0..=300 {
            let f = 0.1 + 0.3 * i as f64 / 300.0;
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, &t) in h.taps.iter().enumerate() {
                re += t * (2.0 * PI * f * k as f64).cos();
                im -= t * (2.0 * PI * f * k as f64).sin();
            }
            let mag = re.hypot(im);
            assert!((mag - 1.0).abs() <= 0.05, "f={f}: {mag}");
        }
    }

    #[test]
    fn too_few_taps() {
        assert!(hilbert_fir(4).is_err());
    }

    #[test]
    fn envelope_of_constant_amplitude_tone() {
        let fs = 250.0;
        let x: Vec<f64> = (0..1000)
            .map(|i| 2.0 * (2.0 * PI * 40.0 * i as f64 / fs).sin())
            .collect();
        let env = analytic_envelope(&x, &hilbert_fir(30).unwrap()).unwrap();
        for &e in &env[30..970] {
            assert!((e - 2.0).abs() < 0.1, "{e}");
        }
    }

    #[test]
    fn envelope_of_zero_is_zero() {
        let env = analytic_envelope(&[0.0; 100], &hilbert_fir(30).unwrap()).unwrap();
        assert!(env.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn envelope_tracks_am_modulator() {
        let fs = 250.0;
        let n = 2500;
        let modulator: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * (2.0 * PI * 3.0 * i as f64 / fs).sin())
            .collect();
        let x: Vec<f64> = (0..n)
            .map(|i| modulator[i] * (2.0 * PI * 50.0 * i as f64 / fs).sin())
            .collect();
        let env = analytic_envelope(&x, &hilbert_fir(30).unwrap()).unwrap();
        let r = pearson(&env[30..n - 30], &modulator[30..n - 30]);
        assert!(r > 0.95, "{r}");
    }

    #[test]
    fn envelope_sign_invariant_and_non_negative() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 29 % 47) as f64 - 23.0) * 0.1).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let h = hilbert_fir(30).unwrap();
        let a = analytic_envelope(&x, &h).unwrap();
        let b = analytic_envelope(&neg, &h).unwrap();
        assert!(a.iter().all(|&v| v >= 0.0));
        assert_eq!(a, b);
    }

    #[test]
    fn envelope_needs_longer_signal() {
        assert!(analytic_envelope(&[1.0; 30], &hilbert_fir(30).unwrap()).is_err());
    }

    #[test]
    fn fft_phase_slope_is_frequency() {
        let fs = 250.0;
        let x: Vec<f64> = (0..1000)
            .map(|i| (2.0 * PI * 10.0 * i as f64 / fs).cos())
            .collect();
        let ph = unwrap(&analytic_phase_fft(&x).unwrap());
        let slope = (ph[900] - ph[100]) / (800.0 / fs);
        assert!((slope / (2.0 * PI * 10.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn fft_phase_scale_invariant() {
        let x: Vec<f64> = (0..257).map(|i| ((i * 13 % 37) as f64 - 18.0) * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.7 * v).collect();
        let a = analytic_phase_fft(&x).unwrap();
        let b = analytic_phase_fft(&y).unwrap();
        for (p, q) in a.iter().zip(&b) {
            let d = (p - q).abs();
            assert!(d.min(2.0 * PI - d) < 1e-9);
        }
    }

    #[test]
    fn sin_lags_cos_by_quarter_cycle() {
        let fs = 200.0;
        let c: Vec<f64> = (0..400).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).cos()).collect();
        let s: Vec<f64> = (0..400).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let pc = analytic_phase_fft(&c).unwrap();
        let ps = analytic_phase_fft(&s).unwrap();
        for i in 20..380 {
            let mut d = pc[i] - ps[i];
            while d <= -PI {
                d += 2.0 * PI;
            }
            while d > PI {
                d -= 2.0 * PI;
            }
            assert!((d - PI / 2.0).abs() < 1e-6);
        }
        assert!(analytic_phase_fft(&[]).is_err());
        assert!(ps.iter().all(|&p| p > -PI && p <= PI));
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
