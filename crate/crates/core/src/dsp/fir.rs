use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::signal::FftPair;
use super::window::{hann, kaiser};
use crate::error::{invalid, Result};

/// ISO octave centers used for frequency-dependent room data.
pub const OCTAVE_CENTERS_HZ: [f64; 7] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

/// Piecewise-linear interpolation on a log-frequency axis; values beyond the
/// first and last centers are held.
pub fn interp_log_freq(points: &[(f64, f64)], freq_hz: f64) -> f64 {
    debug_assert!(!points.is_empty());
    if freq_hz <= points[0].0 {
        return points[0].1;
    }
    let last = points[points.len() - 1];
    if freq_hz >= last.0 {
        return last.1;
    }
    let lf = freq_hz.ln();
    for w in points.windows(2) {
        let ((f0, v0), (f1, v1)) = (w[0], w[1]);
        if freq_hz <= f1 {
            let t = (lf - f0.ln()) / (f1.ln() - f0.ln());
            return v0 + t * (v1 - v0);
        }
    }
    last.1
}

/// Linear-phase FIR approximating the magnitude given at octave centers.
///
/// `taps` must be odd; the group delay is `(taps - 1) / 2` samples. A flat
/// target yields a scaled unit impulse exactly.
pub fn design_band_fir(points: &[(f64, f64)], taps: usize, sample_rate: u32) -> Result<Vec<f64>> {
    if points.is_empty() {
        return invalid("band FIR needs at least one gain point");
    }
    design_fir(taps, sample_rate, |f| interp_log_freq(points, f))
}

/// Value of the octave band containing `freq_hz`; band edges lie halfway
/// between centers on a log axis.
pub fn octave_step(points: &[(f64, f64)], freq_hz: f64) -> f64 {
    debug_assert!(!points.is_empty());
    for w in points.windows(2) {
        if freq_hz < (w[0].0 * w[1].0).sqrt() {
            return w[0].1;
        }
    }
    points[points.len() - 1].1
}

/// Linear-phase FIR whose magnitude follows `target(f)`, by frequency
/// sampling and a Hann window.
pub fn design_fir<F: Fn(f64) -> f64>(taps: usize, sample_rate: u32, target: F) -> Result<Vec<f64>> {
    if taps % 2 == 0 || taps == 0 {
        return invalid("band FIR length must be odd");
    }
    let fs = f64::from(sample_rate);
    let nfft = (8 * taps).next_power_of_two().max(2048);
    let spec: Vec<Complex64> = (0..nfft)
        .map(|k| {
            let kk = if k <= nfft / 2 { k } else { nfft - k };
            let f = kk as f64 * fs / nfft as f64;
            Complex64::new(target(f), 0.0)
        })
        .collect();
    let zero_phase = FftPair::new(nfft).real_inverse(spec);
    let half = taps / 2;
    let win = hann(taps + 2);
    Ok((0..taps)
        .map(|i| {
            let lag = i as isize - half as isize;
            let idx = lag.rem_euclid(nfft as isize) as usize;
            zero_phase[idx] * win[i + 1]
        })
        .collect())
}

/// Half-width of the fractional-delay kernel in samples.
const FRAC_DELAY_HALF_WIDTH: f64 = 16.0;

/// Kaiser-windowed sinc that delays by `delay` samples (may be fractional).
/// The kernel spans `delay +- 16` samples and is cut to `taps`.
pub fn fractional_delay(delay: f64, taps: usize) -> Vec<f64> {
    (0..taps)
        .map(|n| {
            let t = n as f64 - delay;
            if t.abs() >= FRAC_DELAY_HALF_WIDTH {
                return 0.0;
            }
            let s = if t.abs() < 1e-12 {
                1.0
            } else {
                (PI * t).sin() / (PI * t)
            };
            s * kaiser(t / FRAC_DELAY_HALF_WIDTH, 6.0)
        })
        .collect()
}

/// Magnitude response of an FIR at `freq_hz`.
pub fn fir_magnitude(h: &[f64], freq_hz: f64, sample_rate: u32) -> f64 {
    let w = 2.0 * PI * freq_hz / f64::from(sample_rate);
    h.iter()
        .enumerate()
        .map(|(n, &v)| Complex64::from_polar(v, -w * n as f64))
        .sum::<Complex64>()
        .norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_target_is_scaled_impulse() {
        let pts: Vec<(f64, f64)> = OCTAVE_CENTERS_HZ.iter().map(|&f| (f, 0.8)).collect();
        let h = design_band_fir(&pts, 65, 44100).unwrap();
        for (i, v) in h.iter().enumerate() {
            let want = if i == 32 { 0.8 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "tap {i}: {v}");
        }
    }

    #[test]
    fn follows_octave_gains_above_1k() {
        let gains = [0.9, 0.85, 0.8, 0.7, 0.6, 0.5, 0.45];
        let pts: Vec<(f64, f64)> = OCTAVE_CENTERS_HZ.iter().copied().zip(gains).collect();
        let h = design_band_fir(&pts, 65, 44100).unwrap();
        for (&f, &g) in OCTAVE_CENTERS_HZ.iter().zip(&gains).skip(3) {
            let m = fir_magnitude(&h, f, 44100);
            assert!((20.0 * (m / g).log10()).abs() < 0.5, "{f} Hz: {m} vs {g}");
        }
        let sym = h.iter().zip(h.iter().rev()).all(|(a, b)| (a - b).abs() < 1e-15);
        assert!(sym);
    }

    #[test]
    fn interpolation_holds_outside_range() {
        let pts = [(100.0, 1.0), (1000.0, 2.0)];
        assert_eq!(interp_log_freq(&pts, 10.0), 1.0);
        assert_eq!(interp_log_freq(&pts, 5000.0), 2.0);
        assert!((interp_log_freq(&pts, 316.227_766) - 1.5).abs() < 1e-6);
    }

    #[test]
    fn fractional_delay_integer_case() {
        let h = fractional_delay(10.0, 32);
        assert!((h[10] - 1.0).abs() < 1e-12);
        assert!(h.iter().enumerate().all(|(i, v)| i == 10 || v.abs() < 1e-12));
    }

    #[test]
    fn even_length_rejected() {
        assert!(design_band_fir(&[(1000.0, 1.0)], 64, 44100).is_err());
    }
}
