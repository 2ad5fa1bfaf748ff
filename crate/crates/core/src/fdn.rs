//! Feedback delay network for the late reverberation, fed by the first-order
//! image sources and rendered through one HRIR per virtual reverberation
//! source (VRS).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::directivity::{DirectivityDb, Direction};
use crate::dsp::fir::{design_fir, octave_step};
use crate::dsp::{convolve_slices, energy, ImpulseResponse, OCTAVE_CENTERS_HZ};
use crate::error::{invalid, Error, Result};
use crate::ism::{add_at, BandFirCache, ImageSource, RenderContext};
use crate::room::RoomModel;

/// Longest attenuation filter; shorter when the shortest delay requires it.
const MAX_ATTENUATION_TAPS: usize = 373;

#[derive(Debug, Clone, PartialEq)]
pub struct FdnConfig {
    pub n_channels: usize,
    /// Total loop delay per line, attenuation filter included.
    pub delays_samples: Vec<usize>,
    /// Row-major `n x n` orthogonal matrix.
    pub feedback_matrix: Vec<f64>,
    pub t60_by_octave: [f64; 7],
    /// VRS directions in the receiver frame.
    pub vrs_directions: Vec<Direction>,
    pub attenuation_firs: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub seed: u64,
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Nearest unused prime to `target`, searching outward.
fn nearest_free_prime(target: usize, used: &[usize]) -> usize {
    for off in 0.. {
        for cand in [target.saturating_sub(off), target + off] {
            if is_prime(cand) && !used.contains(&cand) {
                return cand;
            }
        }
    }
    unreachable!()
}

/// Orthogonal matrix from a seeded Gaussian matrix (modified Gram-Schmidt).
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let (done, rest) = cols.split_at_mut(i);
            let p: f64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (v, q) in rest[0].iter_mut().zip(&done[j]) {
                *v -= p * q;
            }
        }
        let norm = cols[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        cols[i].iter_mut().for_each(|v| *v /= norm);
    }
    let mut m = vec![0.0; n * n];
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m[r * n + c] = *v;
        }
    }
    m
}

/// Two stacked rings at +-30 degrees elevation, the lower one rotated by half
/// the azimuth spacing.
pub fn vrs_directions(n: usize) -> Vec<Direction> {
    let upper = n.div_ceil(2);
    let lower = n - upper;
    let ring = |count: usize, el: f64, offset: f64| {
        (0..count).map(move |k| {
            let step = 360.0 / count as f64;
            let az = offset * step + k as f64 * step;
            Direction::new(if az > 180.0 { az - 360.0 } else { az }, el)
        })
    };
    ring(upper, 30.0, 0.0).chain(ring(lower, -30.0, 0.5)).collect()
}

fn attenuation_taps(min_delay: usize) -> usize {
    let mut taps = MAX_ATTENUATION_TAPS.min(2 * min_delay.saturating_sub(1) + 1);
    if taps % 2 == 0 {
        taps -= 1;
    }
    taps.max(1)
}

/// Per-octave gain `10^(-3 d / (fs T60))` of a loop with delay `d`.
pub fn loop_gain(delay: usize, t60: f64, sample_rate: u32) -> f64 {
    if t60.is_infinite() {
        return 1.0;
    }
    10f64.powf(-3.0 * delay as f64 / (f64::from(sample_rate) * t60))
}

fn attenuation_firs(delays: &[usize], t60: &[f64; 7], sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let taps = attenuation_taps(*delays.iter().min().expect("non-empty"));
    delays
        .iter()
        .map(|&d| {
            let points: Vec<(f64, f64)> = OCTAVE_CENTERS_HZ
                .iter()
                .zip(t60)
                .map(|(f, t)| (*f, loop_gain(d, *t, sample_rate)))
                .collect();
            design_fir(taps, sample_rate, |f| octave_step(&points, f))
        })
        .collect()
}

/// Designs a network for `room`: prime delays log-uniformly spread over
/// half to twice the mean free path time, a seeded orthogonal feedback
/// matrix and per-line attenuation filters for the room's T30.
pub fn design_fdn(room: &RoomModel, n_channels: usize, sample_rate: u32, seed: u64) -> Result<FdnConfig> {
    if n_channels < 4 {
        return invalid(format!("FDN needs at least 4 channels, got {n_channels}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = room.mean_free_path_time() * f64::from(sample_rate);
    let mut delays = Vec::with_capacity(n_channels);
    for k in 0..n_channels {
        let u: f64 = rng.gen();
        let target = mean * 0.5 * 4f64.powf((k as f64 + u) / n_channels as f64);
        let p = nearest_free_prime(target.round().max(2.0) as usize, &delays);
        delays.push(p);
    }
    let feedback_matrix = random_orthogonal(n_channels, &mut rng);
    let t60 = room.t30_by_octave();
    Ok(FdnConfig {
        n_channels,
        attenuation_firs: attenuation_firs(&delays, &t60, sample_rate)?,
        delays_samples: delays,
        feedback_matrix,
        t60_by_octave: t60,
        vrs_directions: vrs_directions(n_channels),
        sample_rate,
        seed,
    })
}

impl FdnConfig {
    /// Same network with attenuation redesigned for other decay times;
    /// `f64::INFINITY` makes the loop lossless.
    pub fn with_t60(&self, t60_by_octave: [f64; 7]) -> Result<Self> {
        let mut out = self.clone();
        out.attenuation_firs = attenuation_firs(&self.delays_samples, &t60_by_octave, self.sample_rate)?;
        out.t60_by_octave = t60_by_octave;
        Ok(out)
    }

    pub fn attenuation_delay(&self) -> usize {
        (self.attenuation_firs[0].len() - 1) / 2
    }

    /// Runs the recursion and returns each line's output.
    pub fn run_lines(&self, injection: &[Vec<f64>], length: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.n_channels;
        if injection.len() != n {
            return invalid(format!(
                "injection has {} channels, FDN has {n}",
                injection.len()
            ));
        }
        let gd = self.attenuation_delay();
        let taps = self.attenuation_firs[0].len();
        let bufs_len: Vec<usize> = self.delays_samples.iter().map(|d| d - gd).collect();
        let mut bufs: Vec<Vec<f64>> = bufs_len.iter().map(|&b| vec![0.0; b]).collect();
        let mut pos = vec![0usize; n];
        // History of line outputs for the attenuation filters, newest first
        // via a ring index.
        let mut hist = vec![vec![0.0; taps]; n];
        let mut hpos = 0usize;
        let mut out = vec![vec![0.0; length]; n];
        let mut filtered = vec![0.0; n];
        for t in 0..length {
            hpos = if hpos == 0 { taps - 1 } else { hpos - 1 };
            for i in 0..n {
                let y = bufs[i][pos[i]];
                out[i][t] = y;
                hist[i][hpos] = y;
                let h = &self.attenuation_firs[i];
                let hi = &hist[i];
                let mut acc = 0.0;
                // hist[(hpos + k) % taps] is the output k samples ago.
                let (a, b) = hi.split_at(hpos);
                for (hv, xv) in h.iter().zip(b.iter().chain(a.iter())) {
                    acc += hv * xv;
                }
                filtered[i] = acc;
            }
            for j in 0..n {
                let row = &self.feedback_matrix[j * n..(j + 1) * n];
                let mut v = injection[j].get(t).copied().unwrap_or(0.0);
                for (m, f) in row.iter().zip(&filtered) {
                    v += m * f;
                }
                bufs[j][pos[j]] = v;
                pos[j] += 1;
                if pos[j] == bufs_len[j] {
                    pos[j] = 0;
                }
            }
        }
        Ok(out)
    }
}

/// Runs the network and spatializes every line through the HRIR of its VRS
/// direction.
pub fn render_late(fdn: &FdnConfig, injection: &[Vec<f64>], hrir: &DirectivityDb, length: usize) -> Result<ImpulseResponse> {
    if hrir.channels() != 2 || hrir.sample_rate() != fdn.sample_rate {
        return invalid("HRIR database must be two-channel at the FDN rate");
    }
    let lines = fdn.run_lines(injection, length)?;
    let mut ears = vec![vec![0.0; length]; 2];
    for (line, dir) in lines.iter().zip(&fdn.vrs_directions) {
        if line.iter().all(|v| *v == 0.0) {
            continue;
        }
        let fir = hrir.query_fir(*dir);
        for (ear, h) in fir.iter().enumerate() {
            add_at(&mut ears[ear], &convolve_slices(line, h), 0);
        }
    }
    ImpulseResponse::new(ears, fdn.sample_rate)
}

/// Injection signals from the first-order images: each image's source-side
/// filter (directivity, reflection filter, 1/r) placed at its arrival time
/// on one input, assigned round-robin from a seeded start channel.
pub fn couple_ism_to_fdn(
    images: &[ImageSource],
    ctx: &RenderContext<'_>,
    fdn: &FdnConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = fdn.n_channels;
    let mut inj = vec![vec![0.0; ctx.length]; n];
    let start = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n);
    let mut cache = BandFirCache::new(ctx.sample_rate);
    let c = ctx.room.speed_of_sound();
    for (k, im) in images.iter().filter(|i| i.order == 1).enumerate() {
        let (h, lead) = ctx.source_filter(im, &mut cache)?;
        let at = (im.path_length / c * f64::from(ctx.sample_rate)).round() as isize - lead as isize;
        add_at(&mut inj[(start + k) % n], &h, at);
    }
    Ok(inj)
}

fn window_energy(ir: &ImpulseResponse, lo: usize, hi: usize) -> f64 {
    ir.channels()
        .iter()
        .map(|c| energy(&c[lo.min(c.len())..hi.min(c.len())]))
        .sum()
}

/// Amplitude gain for `late` that equates its energy with that of `early`
/// within +-10 ms of `transition_ms`.
pub fn calibrate_late_level(early: &ImpulseResponse, late: &ImpulseResponse, transition_ms: f64) -> Result<f64> {
    if early.sample_rate() != late.sample_rate() {
        return invalid("early and late parts differ in sample rate");
    }
    let fs = f64::from(early.sample_rate());
    let centre = transition_ms * 1e-3 * fs;
    let half = 0.010 * fs;
    let lo = (centre - half).max(0.0).round() as usize;
    let hi = (centre + half).round() as usize;
    let el = window_energy(late, lo, hi);
    if el == 0.0 {
        return Err(Error::Numeric(format!(
            "late part is silent around {transition_ms} ms"
        )));
    }
    let ee = window_energy(early, lo, hi);
    if ee == 0.0 {
        return Err(Error::Numeric(format!(
            "early reference is silent around {transition_ms} ms"
        )));
    }
    Ok((ee / el).sqrt())
}
