use std::f64::consts::PI;

use num_traits::Zero;

use super::signal::ImpulseResponse;
use super::window::kaiser;
use crate::error::{invalid, Result};

/// Stopband attenuation the anti-aliasing kernel is designed for (dB).
const STOPBAND_DB: f64 = 100.0;
/// Cutoff as a fraction of the lower Nyquist frequency.
const CUTOFF_FRACTION: f64 = 0.95;
/// Transition width as a fraction of the lower Nyquist frequency.
const TRANSITION_FRACTION: f64 = 0.1;
/// Largest interpolation factor that gets a precomputed polyphase bank.
const MAX_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b.is_zero() {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

struct Kernel {
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    /// Half-width in input samples.
    half_width: f64,
    beta: f64,
}

impl Kernel {
    fn new(fs_in: f64, fs_out: f64) -> Self {
        let nyq_low = 0.5 * fs_in.min(fs_out);
        let cutoff = CUTOFF_FRACTION * nyq_low / fs_in;
        let transition = 2.0 * PI * TRANSITION_FRACTION * nyq_low / fs_in;
        let taps = (STOPBAND_DB - 8.0) / (2.285 * transition);
        Self {
            cutoff,
            half_width: (taps / 2.0).ceil() + 1.0,
            beta: 0.1102 * (STOPBAND_DB - 8.7),
        }
    }

    fn eval(&self, tau: f64) -> f64 {
        if tau.abs() >= self.half_width {
            return 0.0;
        }
        2.0 * self.cutoff * sinc(2.0 * self.cutoff * tau) * kaiser(tau / self.half_width, self.beta)
    }
}

fn resample_channel(x: &[f64], fs_in: u32, fs_out: u32) -> Vec<f64> {
    let (fi, fo) = (u64::from(fs_in), u64::from(fs_out));
    let g = gcd(fi, fo);
    let (up, down) = (fo / g, fi / g);
    let out_len = ((x.len() as f64) * fo as f64 / fi as f64).round() as usize;
    let kernel = Kernel::new(fi as f64, fo as f64);
    let hw = kernel.half_width as i64;

    // Output m sits at input time m * down / up = base + phase / up.
    let bank: Option<Vec<Vec<f64>>> = (up <= MAX_PHASES).then(|| {
        (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                (-hw..=hw).map(|k| kernel.eval(frac - k as f64)).collect()
            })
            .collect()
    });

    (0..out_len as u64)
        .map(|m| {
            let num = m * down;
            let base = (num / up) as i64;
            let phase = num % up;
            let frac = phase as f64 / up as f64;
            let mut acc = 0.0;
            for (j, k) in (-hw..=hw).enumerate() {
                let idx = base + k;
                if idx < 0 || idx as usize >= x.len() {
                    continue;
                }
                let w = match &bank {
                    Some(b) => b[phase as usize][j],
                    None => kernel.eval(frac - k as f64),
                };
                acc += w * x[idx as usize];
            }
            acc
        })
        .collect()
}

/// Band-limited rational resampling with a Kaiser-windowed sinc kernel.
/// Equal rates return the input unchanged.
pub fn resample(ir: &ImpulseResponse, target_rate: u32) -> Result<ImpulseResponse> {
    if target_rate == 0 {
        return invalid("target sample rate must be positive");
    }
    if target_rate == ir.sample_rate() {
        return Ok(ir.clone());
    }
    let channels = ir
        .channels()
        .iter()
        .map(|c| resample_channel(c, ir.sample_rate(), target_rate))
        .collect();
    ImpulseResponse::new(channels, target_rate)
}
