use std::f64::consts::{PI, SQRT_2};

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Result};

/// Second-order IIR section with `a0` normalized to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Filters `x` from rest (transposed direct form II).
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let (mut s1, mut s2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = self.b0 * v + s1;
                s1 = self.b1 * v - self.a1 * y + s2;
                s2 = self.b2 * v - self.a2 * y;
                y
            })
            .collect()
    }

    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        self.sections
            .iter()
            .fold(x.to_vec(), |acc, s| s.process(&acc))
    }

    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.response(freq_hz, sample_rate))
            .product()
    }

    pub fn gain_db(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        20.0 * self.response(freq_hz, sample_rate).norm().log10()
    }
}

/// 2nd-order Butterworth low-pass, bilinear transform with prewarping.
pub fn butter2_lowpass(fc_hz: f64, sample_rate: u32) -> Result<Biquad> {
    let fs = f64::from(sample_rate);
    if !(fc_hz > 0.0 && fc_hz < fs / 2.0) {
        return invalid(format!("cutoff {fc_hz} Hz outside (0, fs/2)"));
    }
    let k = (PI * fc_hz / fs).tan();
    let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
    let b0 = k * k * norm;
    Ok(Biquad {
        b0,
        b1: 2.0 * b0,
        b2: b0,
        a1: 2.0 * (k * k - 1.0) * norm,
        a2: (1.0 - SQRT_2 * k + k * k) * norm,
    })
}

/// Applies a 2nd-order Butterworth low-pass to `x`.
pub fn lowpass_butter2(x: &[f64], fc_hz: f64, sample_rate: u32) -> Result<Vec<f64>> {
    Ok(butter2_lowpass(fc_hz, sample_rate)?.process(x))
}

/// Order of the analog low-pass prototype behind the octave filters; the
/// band-pass has twice this order.
const OCTAVE_PROTOTYPE_ORDER: usize = 3;

/// 6th-order Butterworth octave band-pass with -3 dB edges at
/// `center / sqrt(2)` and `center * sqrt(2)`.
pub fn octave_bandpass(center_hz: f64, sample_rate: u32) -> Result<Sos> {
    let fs = f64::from(sample_rate);
    if !(center_hz > 0.0 && center_hz < fs / 2.0 / SQRT_2) {
        return invalid(format!("octave center {center_hz} Hz outside (0, fs/2/sqrt2)"));
    }
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let w_lo = warp(center_hz / SQRT_2);
    let w_hi = warp(center_hz * SQRT_2);
    let w0 = (w_lo * w_hi).sqrt();
    let bw = w_hi - w_lo;

    let n = OCTAVE_PROTOTYPE_ORDER;
    let mut upper = Vec::with_capacity(n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta) * bw;
        let disc = (p * p - 4.0 * w0 * w0).sqrt();
        for s in [(p + disc) / 2.0, (p - disc) / 2.0] {
            let z = (2.0 * fs + s) / (2.0 * fs - s);
            if z.im > 0.0 {
                upper.push(z);
            }
        }
    }
    if upper.len() != n {
        return invalid("octave band too wide for a complex-pole realization");
    }
    upper.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
    let mut sections: Vec<Biquad> = upper
        .iter()
        .map(|z| Biquad {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -2.0 * z.re,
            a2: z.norm_sqr(),
        })
        .collect();
    // Unity gain at the digital image of the analog center frequency.
    let f0 = fs / PI * (w0 / (2.0 * fs)).atan();
    let g = Sos {
        sections: sections.clone(),
    }
    .response(f0, fs)
    .norm();
    let s = &mut sections[0];
    s.b0 /= g;
    s.b2 /= g;
    Ok(Sos { sections })
}

/// Filters `x` through the octave band centered at `center_hz` (single pass).
pub fn octave_band_filter(x: &[f64], center_hz: f64, sample_rate: u32) -> Result<Vec<f64>> {
    Ok(octave_bandpass(center_hz, sample_rate)?.process(x))
}
