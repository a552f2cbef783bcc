//! Signal processing kernels: Butterworth design and zero-phase filtering,
//! integer decimation, Hilbert transforms and spectra.

mod hilbert;
mod iir;
pub(crate) mod resample;
mod spectrum;

pub use hilbert::{analytic_envelope, analytic_phase_fft, analytic_signal_fft, hilbert_fir, FirFilter};
pub use iir::{design_butterworth_bandpass, design_butterworth_lowpass, filtfilt, Biquad, SosFilter};
pub use resample::{decimate, decimation_filter};
pub use spectrum::{fft_forward, periodogram};
