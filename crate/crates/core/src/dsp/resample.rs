use super::iir::{design_butterworth_lowpass, filtfilt, SosFilter};
use crate::error::{Error, Result};

const ANTI_ALIAS_ORDER: usize = 8;

/// Integer-factor downsampling: zero-phase 8th-order Butterworth low-pass
/// at `0.4 * fs_out`, then every k-th sample starting at 0.
pub fn decimate(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    let factor = decimation_factor(fs_in, fs_out)?;
    let Some(lowpass) = decimation_filter(fs_in, fs_out)? else {
        return Ok(signal.to_vec());
    };
    let smooth = filtfilt(&lowpass, signal)?;
    Ok(smooth.into_iter().step_by(factor).collect())
}

/// Anti-alias filter used by [`decimate`]; `None` when no downsampling occurs.
pub fn decimation_filter(fs_in: f64, fs_out: f64) -> Result<Option<SosFilter>> {
    if decimation_factor(fs_in, fs_out)? == 1 {
        return Ok(None);
    }
    design_butterworth_lowpass(ANTI_ALIAS_ORDER, 0.4 * fs_out, fs_in).map(Some)
}

/// Returns the integer ratio `fs_in / fs_out`.
pub(crate) fn decimation_factor(fs_in: f64, fs_out: f64) -> Result<usize> {
    if !(fs_in > 0.0 && fs_out > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling rates must be positive, got {fs_in} -> {fs_out}"
        )));
    }
    if fs_out > fs_in {
        return Err(Error::InvalidArgument(format!(
            "cannot decimate upward: {fs_in} Hz -> {fs_out} Hz"
        )));
    }
    let ratio = fs_in / fs_out;
    let k = ratio.round();
    if (ratio - k).abs() > 1e-9 * ratio {
        return Err(Error::NonIntegerDecimation { fs_in, fs_out });
    }
    Ok(k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn length_law() {
        let y = decimate(&vec![1.0; 1000], 500.0, 250.0).unwrap();
        assert_eq!(y.len(), 500);
        let y = decimate(&vec![1.0; 1001], 1000.0, 250.0).unwrap();
        assert_eq!(y.len(), 251);
    }

    #[test]
    fn keeps_in_band_tone() {
        let x = tone(10.0, 1000.0, 4000);
        let y = decimate(&x, 1000.0, 250.0).unwrap();
        let expect = tone(10.0, 250.0, 1000);
        for i in 100..900 {
            assert!((y[i] - expect[i]).abs() < 0.01, "{i}: {} vs {}", y[i], expect[i]);
        }
    }

    #[test]
    fn rejects_bad_ratios() {
        assert!(matches!(
            decimate(&[0.0; 100], 500.0, 300.0),
            Err(Error::NonIntegerDecimation { .. })
        ));
        assert!(decimate(&[0.0; 100], 250.0, 500.0).is_err());
        assert_eq!(decimate(&[1.0, 2.0], 250.0, 250.0).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn cascaded_factors_match_single_factor() {
        // band-limited: components well below the final anti-alias corner
        let fs = 2000.0;
        let x: Vec<f64> = (0..8000)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * 12.0 * t).sin() + 0.5 * (2.0 * PI * 31.0 * t + 0.3).sin()
            })
            .collect();
        let two_step = decimate(&decimate(&x, fs, 1000.0).unwrap(), 1000.0, 250.0).unwrap();
        let one_step = decimate(&x, fs, 250.0).unwrap();
        assert_eq!(two_step.len(), one_step.len());
        let n = one_step.len();
        for i in n / 10..9 * n / 10 {
            assert!((two_step[i] - one_step[i]).abs() < 0.015, "{i}");
        }
    }
}
