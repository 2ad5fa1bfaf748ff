//! Signal-processing primitives shared by the simulation and analysis code.
//!
//! Filters run single-pass (causal); every consumer of the octave filters
//! is an energy or decay measure, so their phase response is irrelevant.

pub mod decay;
pub mod filter;
pub mod fir;
pub mod resample;
pub mod savgol;
pub mod signal;
pub mod wav;
pub mod window;

pub use decay::edc;
pub use filter::{butter2_lowpass, lowpass_butter2, octave_band_filter, octave_bandpass, Biquad, Sos};
pub use fir::{design_band_fir, fractional_delay, interp_log_freq, OCTAVE_CENTERS_HZ};
pub use resample::resample;
pub use savgol::savitzky_golay_smooth;
pub use signal::{convolve, convolve_slices, energy, next_pow2, ImpulseResponse, Spectrum};
pub use wav::{read_wav, write_wav, WavFormat};
pub use window::{hann, hann_flank_window};

/// FFT size for spectra of short excerpts: next power of two at least four
/// times the excerpt length, never below 2048.
pub fn analysis_fft_size(excerpt_len: usize) -> usize {
    next_pow2(4 * excerpt_len).max(2048)
}
