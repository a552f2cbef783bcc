use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT of a real signal.
pub fn fft_forward(signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// One-sided power spectral density (units²/Hz) with a rectangular window.
/// Returns `(frequencies, power)`.
pub fn periodogram(signal: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let spec = fft_forward(signal);
    let n_bins = n / 2 + 1;
    let scale = 1.0 / (fs * n as f64);
    let freqs = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    let power = (0..n_bins)
        .map(|k| {
            let p = spec[k].norm_sqr() * scale;
            let nyquist = n.is_multiple_of(2) && k == n / 2;
            if k == 0 || nyquist {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    (freqs, power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parseval_holds() {
        let x: Vec<f64> = (0..256).map(|i| ((i * 17 % 31) as f64 - 15.0) / 4.0).collect();
        let fs = 128.0;
        let (f, p) = periodogram(&x, fs);
        let df = f[1] - f[0];
        let power: f64 = p.iter().sum::<f64>() * df;
        let mean_sq: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((power - mean_sq).abs() < 1e-9 * mean_sq);
    }

    #[test]
    fn tone_peak_at_its_frequency() {
        let fs = 250.0;
        let x: Vec<f64> = (0..500)
            .map(|i| (2.0 * PI * 47.5 * i as f64 / fs).sin())
            .collect();
        let (f, p) = periodogram(&x, fs);
        let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert!((f[k] - 47.5).abs() < 1e-9);
    }
}
