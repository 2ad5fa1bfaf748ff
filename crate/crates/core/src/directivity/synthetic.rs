//! Built-in databases used when no measured data is supplied: a rigid
//! spherical head for HRIRs and a small two-way monitor for source
//! directivity.

use std::f64::consts::FRAC_PI_2;

use super::geometry::dot;
use super::{head_shadow_fir, DirectivityDb, DirectivityEntry, Direction, HeadShadowParams};
use crate::dsp::{convolve_slices, design_band_fir, fractional_delay, OCTAVE_CENTERS_HZ};
use crate::error::Result;
use crate::room::DEFAULT_SPEED_OF_SOUND;

const HRIR_TAPS: usize = 256;
const HRIR_BASE_DELAY: f64 = 40.0;
const MONITOR_TAPS: usize = 129;

/// Azimuth/elevation grid with one entry at each pole.
pub fn sphere_grid(az_step_deg: f64, el_step_deg: f64) -> Vec<Direction> {
    let mut out = vec![Direction::new(0.0, -90.0)];
    let n_el = (180.0 / el_step_deg).round() as i64;
    let n_az = (360.0 / az_step_deg).round() as i64;
    for i in 1..n_el {
        let el = -90.0 + i as f64 * el_step_deg;
        for j in 0..n_az {
            let az = j as f64 * az_step_deg;
            out.push(Direction::new(if az > 180.0 { az - 360.0 } else { az }, el));
        }
    }
    out.push(Direction::new(0.0, 90.0));
    out
}

/// Spherical-head parameters for the built-in HRIRs.
pub fn spherical_head_params() -> HeadShadowParams {
    HeadShadowParams {
        radius_m: 0.0875,
        shelf_depth_db: 12.0,
        crossover_hz: 1000.0,
        taps: 128,
    }
}

/// Woodworth path delay (s) to an ear whose axis makes `theta` with the
/// source direction.
fn woodworth_delay(radius: f64, theta: f64) -> f64 {
    let a = radius / DEFAULT_SPEED_OF_SOUND;
    if theta < FRAC_PI_2 {
        -a * theta.cos()
    } else {
        a * (theta - FRAC_PI_2)
    }
}

fn spherical_head_ear(params: &HeadShadowParams, d: Direction, ear_axis: [f64; 3], fs: u32) -> Result<Vec<f64>> {
    let theta = dot(d.unit_vector(), ear_axis).clamp(-1.0, 1.0).acos();
    let delay = HRIR_BASE_DELAY + woodworth_delay(params.radius_m, theta) * f64::from(fs);
    let shadow = head_shadow_fir(params, theta.to_degrees(), fs)?;
    let mut h = convolve_slices(&fractional_delay(delay, HRIR_TAPS), &shadow);
    h.truncate(HRIR_TAPS);
    Ok(h)
}

/// Rigid-sphere HRIR set on a 5 x 10 degree grid: Woodworth interaural delay
/// and a high-shelf shadow growing toward the contralateral side.
pub fn spherical_head_hrir_db(sample_rate: u32) -> Result<DirectivityDb> {
    let params = spherical_head_params();
    let entries = sphere_grid(5.0, 10.0)
        .into_iter()
        .map(|d| {
            let left = spherical_head_ear(&params, d, [0.0, 1.0, 0.0], sample_rate)?;
            let right = spherical_head_ear(&params, d, [0.0, -1.0, 0.0], sample_rate)?;
            Ok(DirectivityEntry {
                direction: d,
                fir: vec![left, right],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DirectivityDb::new("spherical-head", sample_rate, entries)
}

/// Off-axis attenuation (dB) of the monitor model at `freq_hz`.
fn monitor_attenuation_db(freq_hz: f64, off_axis_deg: f64) -> f64 {
    let depth = 20.0 * (1.0 - (-freq_hz / 2500.0).exp());
    let weight = 0.5 * (1.0 - off_axis_deg.to_radians().cos());
    // A driver narrows faster than the cosine law above a few kHz.
    depth * weight.powf(if freq_hz > 3000.0 { 0.7 } else { 1.0 })
}

/// Mono directivity set of a small active monitor on a 10 x 10 degree grid.
/// Each FIR is linear phase with a latency of 64 samples.
pub fn monitor_directivity_db(sample_rate: u32) -> Result<DirectivityDb> {
    let entries = sphere_grid(10.0, 10.0)
        .into_iter()
        .map(|d| {
            let off_axis = d.angle_to(&Direction::new(0.0, 0.0));
            let points: Vec<(f64, f64)> = OCTAVE_CENTERS_HZ
                .iter()
                .map(|&f| (f, 10f64.powf(-monitor_attenuation_db(f, off_axis) / 20.0)))
                .collect();
            Ok(DirectivityEntry {
                direction: d,
                fir: vec![design_band_fir(&points, MONITOR_TAPS, sample_rate)?],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DirectivityDb::new("monitor", sample_rate, entries)
}
