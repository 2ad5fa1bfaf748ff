//! Synchronized exponential sweeps: generation, deconvolution to impulse
//! responses, delay and SNR estimation from noise runs, and repeatability.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::signal::FftPair;
use crate::dsp::{next_pow2, ImpulseResponse};
use crate::error::{domain, invalid, Error, Result};

/// Silence kept ahead of the linear impulse response.
pub const PRE_WINDOW_S: f64 = 0.020;
/// Raised-cosine edge length of the linear-part window.
pub const WINDOW_EDGE_TAPS: usize = 128;
// Tikhonov floor of the spectral inverse relative to the peak sweep power.
const INVERSE_FLOOR: f64 = 1e-13;
const MIN_SILENCE: usize = 1024;
const PEAK_TO_RMS_MIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub f1: f64,
    pub f2: f64,
    pub nominal_duration_s: f64,
    pub sample_rate: u32,
    /// Synchronization rate constant in seconds.
    pub rate_constant_s: f64,
    pub actual_duration_s: f64,
}

impl SweepSpec {
    /// Rounds the rate constant so that every octave starts at a whole
    /// number of periods of `f1`, which keeps harmonic images in phase.
    pub fn new(f1: f64, f2: f64, duration_s: f64, sample_rate: u32) -> Result<Self> {
        let nyq = f64::from(sample_rate) / 2.0;
        if !(f1 > 0.0 && f1 < f2 && f2 <= nyq) {
            return domain(format!("need 0 < f1 < f2 <= fs/2, got f1={f1}, f2={f2}, fs={sample_rate}"));
        }
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return domain("sweep duration must be positive");
        }
        let ratio = (f2 / f1).ln();
        let k = (f1 * duration_s / ratio).round();
        if k < 1.0 {
            return domain("sweep too short for its start frequency");
        }
        let l = k / f1;
        Ok(Self {
            f1,
            f2,
            nominal_duration_s: duration_s,
            sample_rate,
            rate_constant_s: l,
            actual_duration_s: l * ratio,
        })
    }

    pub fn len_samples(&self) -> usize {
        (self.actual_duration_s * f64::from(self.sample_rate)).ceil() as usize
    }

    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f1 * (t / self.rate_constant_s).exp()
    }

    /// Writes the spec as JSON beside `output` (`<output>.sweep.json`).
    pub fn write_sidecar(&self, output: impl AsRef<Path>) -> Result<std::path::PathBuf> {
        let mut p = output.as_ref().as_os_str().to_owned();
        p.push(".sweep.json");
        let p = std::path::PathBuf::from(p);
        std::fs::write(&p, serde_json::to_string_pretty(self)?)?;
        Ok(p)
    }
}

pub fn generate_sweep(spec: &SweepSpec) -> Vec<f64> {
    let fs = f64::from(spec.sample_rate);
    let l = spec.rate_constant_s;
    (0..spec.len_samples())
        .map(|n| {
            let t = n as f64 / fs;
            (2.0 * PI * spec.f1 * l * ((t / l).exp() - 1.0)).sin()
        })
        .collect()
}

/// Deconvolved recording: the linear response starts at `reference_index`.
#[derive(Debug, Clone)]
pub struct Deconvolved {
    pub ir: ImpulseResponse,
    pub reference_index: usize,
}

impl Deconvolved {
    /// The response with the pre-window removed.
    pub fn linear(&self) -> Result<ImpulseResponse> {
        let k = self.reference_index;
        ImpulseResponse::new(self.ir.channels().iter().map(|c| c[k..].to_vec()).collect(), self.ir.sample_rate())
    }
}

fn raised_cosine_edges(len: usize, edge: usize) -> Vec<f64> {
    let edge = edge.min(len / 2);
    let mut w = vec![1.0; len];
    for i in 0..edge {
        let v = 0.5 - 0.5 * (PI * (i as f64 + 0.5) / edge as f64).cos();
        w[i] = v;
        w[len - 1 - i] = v;
    }
    w
}

/// Deconvolves each channel of `recording` by the generated sweep.
///
/// Harmonic distortion products land at negative lags, i.e. at the end of
/// the circular result, and fall outside the window that keeps
/// `PRE_WINDOW_S` before the linear response and everything after it up to
/// the end of the recorded decay.
pub fn deconvolve(recording: &ImpulseResponse, spec: &SweepSpec) -> Result<Deconvolved> {
    if recording.sample_rate() != spec.sample_rate {
        return invalid(format!(
            "recording rate {} differs from sweep rate {}",
            recording.sample_rate(),
            spec.sample_rate
        ));
    }
    let sweep = generate_sweep(spec);
    let n = sweep.len();
    if recording.len() <= n {
        return invalid(format!("recording has {} samples, sweep has {n}", recording.len()));
    }
    let pre = (PRE_WINDOW_S * f64::from(spec.sample_rate)).round() as usize;
    let tail = recording.len() - n + 1;
    let size = next_pow2(recording.len() + n + pre);
    let fft = FftPair::new(size);
    let x = fft.real_forward(&sweep);
    let peak = x.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let eps = peak * INVERSE_FLOOR;
    let inverse: Vec<Complex64> = x.iter().map(|c| c.conj() / (c.norm_sqr() + eps)).collect();
    let window = raised_cosine_edges(pre + tail, WINDOW_EDGE_TAPS);
    let channels = recording
        .channels()
        .iter()
        .map(|rec| {
            let y = fft.real_forward(rec);
            let h = fft.real_inverse(y.iter().zip(&inverse).map(|(a, b)| a * b).collect());
            (0..pre + tail)
                .map(|i| h[(i + size - pre) % size] * window[i])
                .collect()
        })
        .collect();
    Ok(Deconvolved {
        ir: ImpulseResponse::new(channels, spec.sample_rate)?,
        reference_index: pre,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySnr {
    pub delay_samples: usize,
    pub snr_db: f64,
}

/// Delay of `recording` behind `playback` and the SNR of the recorded part.
///
/// The noise floor is taken from the silence after the played segment, or
/// before it when the tail is too short.
pub fn estimate_delay_snr(playback: &[f64], recording: &[f64]) -> Result<DelaySnr> {
    if playback.is_empty() || recording.is_empty() {
        return invalid("playback and recording must be non-empty");
    }
    let size = next_pow2(playback.len() + recording.len());
    let fft = FftPair::new(size);
    let p = fft.real_forward(playback);
    let r = fft.real_forward(recording);
    let xc = fft.real_inverse(r.iter().zip(&p).map(|(a, b)| a * b.conj()).collect());
    let lags = &xc[..recording.len()];
    let (delay, peak) = lags
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    let rms = (lags.iter().map(|v| v * v).sum::<f64>() / lags.len() as f64).sqrt();
    if !(peak > PEAK_TO_RMS_MIN * rms) {
        return Err(Error::Numeric(format!(
            "no cross-correlation peak above the floor (peak/rms = {:.1})",
            peak / rms
        )));
    }
    let end = (delay + playback.len()).min(recording.len());
    let mean_power = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
    let noise = if recording.len() - end >= MIN_SILENCE {
        mean_power(&recording[end..])
    } else if delay >= MIN_SILENCE {
        mean_power(&recording[..delay])
    } else {
        return invalid(format!("need at least {MIN_SILENCE} silent samples before or after the noise run"));
    };
    let total = mean_power(&recording[delay..end]);
    let snr_db = if noise > 0.0 {
        10.0 * ((total - noise).max(0.0) / noise).log10()
    } else {
        f64::INFINITY
    };
    Ok(DelaySnr {
        delay_samples: delay,
        snr_db,
    })
}

/// Pearson correlation of two recordings over their common length.
pub fn repeatability(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return invalid("need at least two common samples");
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return invalid("zero-variance recording");
    }
    Ok(sab / (saa * sbb).sqrt())
}
