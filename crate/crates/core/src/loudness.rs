//! Programme loudness of mono and stereo signals: K-weighting, 400 ms
//! gating blocks with 75 % overlap, absolute and relative gates.

use std::f64::consts::PI;

use crate::dsp::{Biquad, ImpulseResponse};
use crate::error::{domain, invalid, Result};

pub const ABSOLUTE_GATE_LUFS: f64 = -70.0;
pub const RELATIVE_GATE_LU: f64 = -10.0;
pub const BLOCK_S: f64 = 0.4;
pub const STEP_S: f64 = 0.1;
const OFFSET_DB: f64 = -0.691;
const MIN_RATE: u32 = 8000;

/// The two K-weighting stages (high shelf, then high pass) at `sample_rate`.
///
/// The analog prototypes are fitted so that at 48 kHz the coefficients match
/// the tabulated reference filter.
pub fn k_weighting(sample_rate: u32) -> [Biquad; 2] {
    let fs = f64::from(sample_rate);

    let f0 = 1681.974450955533;
    let g = 3.999843853973347;
    let q = 0.7071752369554196;
    let k = (PI * f0 / fs).tan();
    let vh = 10f64.powf(g / 20.0);
    let vb = vh.powf(0.4996667741545416);
    let a0 = 1.0 + k / q + k * k;
    let shelf = Biquad {
        b0: (vh + vb * k / q + k * k) / a0,
        b1: 2.0 * (k * k - vh) / a0,
        b2: (vh - vb * k / q + k * k) / a0,
        a1: 2.0 * (k * k - 1.0) / a0,
        a2: (1.0 - k / q + k * k) / a0,
    };

    let f0 = 38.13547087602444;
    let q = 0.5003270373238773;
    let k = (PI * f0 / fs).tan();
    let a0 = 1.0 + k / q + k * k;
    let highpass = Biquad {
        b0: 1.0,
        b1: -2.0,
        b2: 1.0,
        a1: 2.0 * (k * k - 1.0) / a0,
        a2: (1.0 - k / q + k * k) / a0,
    };
    [shelf, highpass]
}

fn to_lufs(mean_square: f64) -> f64 {
    if mean_square > 0.0 {
        OFFSET_DB + 10.0 * mean_square.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Channel-summed mean square of each gating block.
fn block_powers(signal: &ImpulseResponse) -> Result<Vec<f64>> {
    let fs = signal.sample_rate();
    if fs < MIN_RATE {
        return domain(format!("sample rate {fs} Hz below {MIN_RATE} Hz"));
    }
    let block = (BLOCK_S * f64::from(fs)).round() as usize;
    let step = (STEP_S * f64::from(fs)).round() as usize;
    if signal.len() < block {
        return invalid(format!("signal of {} samples is shorter than one {block}-sample block", signal.len()));
    }
    let nblocks = (signal.len() - block) / step + 1;
    let [shelf, hp] = k_weighting(fs);
    let mut powers = vec![0.0; nblocks];
    for ch in signal.channels() {
        let y = hp.process(&shelf.process(ch));
        let mut prefix = Vec::with_capacity(y.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &y {
            acc += v * v;
            prefix.push(acc);
        }
        for (j, p) in powers.iter_mut().enumerate() {
            let s = j * step;
            *p += (prefix[s + block] - prefix[s]) / block as f64;
        }
    }
    Ok(powers)
}

/// Integrated loudness in LUFS. Signals that never pass the absolute gate
/// yield negative infinity.
pub fn loudness_lufs(signal: &ImpulseResponse) -> Result<f64> {
    let powers = block_powers(signal)?;
    let gated_mean = |thresh: f64| {
        let kept: Vec<f64> = powers.iter().copied().filter(|&p| to_lufs(p) > thresh).collect();
        if kept.is_empty() {
            None
        } else {
            Some(kept.iter().sum::<f64>() / kept.len() as f64)
        }
    };
    let Some(abs_mean) = gated_mean(ABSOLUTE_GATE_LUFS) else {
        return Ok(f64::NEG_INFINITY);
    };
    let rel = to_lufs(abs_mean) + RELATIVE_GATE_LU;
    let thresh = rel.max(ABSOLUTE_GATE_LUFS);
    Ok(gated_mean(thresh).map_or(f64::NEG_INFINITY, to_lufs))
}

/// Scales `signal` to `target_lufs`; returns the scaled signal and the
/// applied gain in dB.
pub fn normalize_loudness(signal: &ImpulseResponse, target_lufs: f64) -> Result<(ImpulseResponse, f64)> {
    let mut gain_db = 0.0;
    let mut out = signal.clone();
    // A gain can move blocks across the absolute gate, so settle once more.
    for _ in 0..3 {
        let l = loudness_lufs(&out)?;
        if !l.is_finite() {
            return domain("signal is silent after gating; loudness cannot be normalized");
        }
        let step = target_lufs - l;
        if step.abs() < 1e-9 {
            break;
        }
        gain_db += step;
        out = signal.scaled(10f64.powf(gain_db / 20.0));
    }
    Ok((out, gain_db))
}
