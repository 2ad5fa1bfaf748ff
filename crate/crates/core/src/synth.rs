//! BRIR assembly, direct-sound extraction and regularized direct-sound
//! compensation.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{analysis_fft_size, convolve_slices, hann, hann_flank_window, savitzky_golay_smooth, ImpulseResponse, Spectrum};
use crate::error::{invalid, Error, Result};

/// Direct-sound window length in milliseconds.
pub const DIRECT_WINDOW_MS: f64 = 3.0;
/// Raised-cosine flank length of the direct-sound window.
pub const DIRECT_WINDOW_FLANK: usize = 32;
/// Onset threshold relative to the largest per-sample energy.
pub const ONSET_THRESHOLD: f64 = 0.01;
/// Minimum ratio between the onset energy and the leading noise floor.
pub const ONSET_MIN_SNR: f64 = 100.0;
pub const INVERSE_TAPS: usize = 2048;
pub const INVERSE_DELAY: usize = 1024;
/// Out-of-band regularization level in dB re. the peak-normalized |H|.
pub const REG_ALPHA_DB: f64 = 120.0;
pub const PASSBAND_HZ: (f64, f64) = (20.0, 20000.0);
const SMOOTH_BINS: usize = 65;
const SMOOTH_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    SrcDir,
    ModelDir,
    OmniDir,
    Measured,
}

/// Rendering method plus the direct-sound compensation flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodTag {
    pub method: Method,
    pub ds: bool,
}

impl MethodTag {
    pub fn new(method: Method, ds: bool) -> Self {
        Self { method, ds }
    }

    pub fn with_ds(self) -> Self {
        Self { ds: true, ..self }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.method {
            Method::SrcDir => "Src-Dir",
            Method::ModelDir => "Model-Dir",
            Method::OmniDir => "Omni-Dir",
            Method::Measured => "Meas.",
        };
        if self.ds {
            write!(f, "{base} DS")
        } else {
            f.write_str(base)
        }
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let (base, ds) = match norm.strip_suffix("-ds") {
            Some(b) => (b.to_string(), true),
            None => (norm.clone(), false),
        };
        let method = match base.trim_end_matches('.') {
            "src-dir" => Method::SrcDir,
            "model-dir" => Method::ModelDir,
            "omni-dir" => Method::OmniDir,
            "meas" | "measured" => Method::Measured,
            _ => return invalid(format!("unknown method tag '{s}'")),
        };
        Ok(Self { method, ds })
    }
}

/// Separately rendered parts of a BRIR.
#[derive(Debug, Clone, PartialEq)]
pub struct Stems {
    pub direct: ImpulseResponse,
    /// Reflections (and, for measured responses, everything after the direct
    /// sound).
    pub early: ImpulseResponse,
    pub late: ImpulseResponse,
}

impl Stems {
    pub fn sum(&self) -> Result<ImpulseResponse> {
        self.direct.add(&self.early)?.add(&self.late)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Brir {
    pub ir: ImpulseResponse,
    pub stems: Option<Stems>,
    pub source_id: String,
    pub tag: MethodTag,
}

impl Brir {
    pub fn from_stems(stems: Stems, source_id: impl Into<String>, tag: MethodTag) -> Result<Self> {
        if stems.direct.num_channels() != 2 {
            return invalid("BRIR stems must be two-channel");
        }
        Ok(Self {
            ir: stems.sum()?,
            stems: Some(stems),
            source_id: source_id.into(),
            tag,
        })
    }

    /// Measured BRIR split into a windowed direct part and the remainder.
    pub fn measured(ir: ImpulseResponse, source_id: impl Into<String>) -> Result<Self> {
        if ir.num_channels() != 2 {
            return invalid("a BRIR needs two channels");
        }
        let onset = detect_brir_onset(&ir)?;
        let split = extract_direct(&ir, onset, &direct_window(ir.sample_rate())?)?;
        let stems = Stems {
            direct: split.placed()?,
            early: split.remainder.clone(),
            late: ImpulseResponse::silent(2, ir.len(), ir.sample_rate())?,
        };
        Ok(Self {
            ir,
            stems: Some(stems),
            source_id: source_id.into(),
            tag: MethodTag::new(Method::Measured, false),
        })
    }

    pub fn stems(&self) -> Result<&Stems> {
        self.stems
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("BRIR {} ({}) has no stems", self.source_id, self.tag)))
    }
}

/// The shared 3 ms direct-sound window at `sample_rate`.
pub fn direct_window(sample_rate: u32) -> Result<Vec<f64>> {
    hann_flank_window(DIRECT_WINDOW_MS, DIRECT_WINDOW_FLANK, sample_rate)
}

/// Onset of the direct sound from a per-sample energy sequence.
///
/// The linear energy decay curve drops by `e[n]` at sample `n`. The onset is
/// the first local maximum of that drop that exceeds `ONSET_THRESHOLD` of the
/// largest drop. This picks a weak direct sound ahead of stronger
/// reflections.
pub fn detect_onset_from_energy(e: &[f64]) -> Result<usize> {
    let peak = e.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Numeric("onset detection on a silent response".into()));
    }
    let thr = ONSET_THRESHOLD * peak;
    let first = e.iter().position(|v| *v > thr).expect("peak exceeds threshold");
    let mut n = first;
    while n + 1 < e.len() && e[n + 1] >= e[n] {
        n += 1;
    }
    let floor = if first >= DIRECT_WINDOW_FLANK {
        e[..first].iter().sum::<f64>() / first as f64
    } else {
        let mut sorted = e.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 2]
    };
    if e[n] < ONSET_MIN_SNR * floor {
        return Err(Error::Numeric(format!(
            "no direct sound stands out of the noise floor ({:.1} dB)",
            10.0 * (e[n] / floor).log10()
        )));
    }
    Ok(n)
}

/// Onset of one channel.
pub fn detect_direct_onset(x: &[f64]) -> Result<usize> {
    let e: Vec<f64> = x.iter().map(|v| v * v).collect();
    detect_onset_from_energy(&e)
}

/// Common onset of all channels, from their summed energy, so interaural
/// delays survive windowing.
pub fn detect_brir_onset(ir: &ImpulseResponse) -> Result<usize> {
    detect_onset_from_energy(&ir.energy_envelope())
}

/// Windowed direct part of a response and what is left.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectSplit {
    /// Window-length excerpt; sample 0 sits at `start` in the original.
    pub excerpt: ImpulseResponse,
    pub remainder: ImpulseResponse,
    pub start: isize,
    pub onset: usize,
}

impl DirectSplit {
    /// The excerpt placed back at its original position.
    pub fn placed(&self) -> Result<ImpulseResponse> {
        let len = self.remainder.len();
        let ch = self
            .excerpt
            .channels()
            .iter()
            .map(|c| {
                let mut out = vec![0.0; len];
                crate::ism::add_at(&mut out, c, self.start);
                out
            })
            .collect();
        ImpulseResponse::new(ch, self.remainder.sample_rate())
    }
}

/// Splits `ir` with `window`, whose plateau starts at `onset`.
pub fn extract_direct(ir: &ImpulseResponse, onset: usize, window: &[f64]) -> Result<DirectSplit> {
    let flank = window.iter().take_while(|w| **w < 1.0).count();
    let start = onset as isize - flank as isize;
    let end = start + window.len() as isize;
    if end > ir.len() as isize {
        return invalid(format!(
            "direct window ending at sample {end} overruns the response ({} samples)",
            ir.len()
        ));
    }
    let mut excerpt = Vec::with_capacity(ir.num_channels());
    let mut remainder = Vec::with_capacity(ir.num_channels());
    for c in ir.channels() {
        let mut ex = vec![0.0; window.len()];
        let mut rem = c.clone();
        for (i, w) in window.iter().enumerate() {
            let n = start + i as isize;
            if n < 0 {
                continue;
            }
            let v = c[n as usize] * w;
            ex[i] = v;
            rem[n as usize] = c[n as usize] - v;
        }
        excerpt.push(ex);
        remainder.push(rem);
    }
    Ok(DirectSplit {
        excerpt: ImpulseResponse::new(excerpt, ir.sample_rate())?,
        remainder: ImpulseResponse::new(remainder, ir.sample_rate())?,
        start,
        onset,
    })
}

/// Regularized inverse of one direct-sound excerpt.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationDesign {
    pub fft_size: usize,
    pub sample_rate: u32,
    /// Peak of |H| used for normalization.
    pub peak: f64,
    /// Normalized |H| per bin.
    pub magnitude: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// Out-of-band regularization, zero in the passband.
    pub reg_alpha: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Inverse response on the analysis grid, before windowing.
    pub inverse_bins: Vec<Complex64>,
    /// `INVERSE_TAPS` taps, centred at `INVERSE_DELAY`.
    pub inverse_fir: Vec<f64>,
    pub delay: usize,
}

impl CompensationDesign {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate) / self.fft_size as f64
    }

    pub fn beta(&self, bin: usize) -> f64 {
        self.reg_alpha[bin] + self.sigma[bin] * self.sigma[bin]
    }

    /// Plain-text diagnostics: frequency, |H|, smoothed |H|, sigma, beta.
    pub fn to_table(&self) -> String {
        let mut s = String::from("freq_hz\tmag\tmag_smooth\tsigma\tbeta\n");
        for k in 0..self.magnitude.len() {
            s.push_str(&format!(
                "{:.3}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\n",
                self.frequency(k),
                self.magnitude[k],
                self.smoothed[k],
                self.sigma[k],
                self.beta(k)
            ));
        }
        s
    }
}

/// Designs `H* / (|H|^2 + beta)` with `beta = alpha + sigma^2`.
///
/// |H| is normalized to a peak of 1. `alpha` is `10^(120/20)` outside
/// 20 Hz - 20 kHz and zero inside. `sigma` is the amount by which |H| falls
/// below its Savitzky-Golay smoothed version, so only notches are
/// regularized.
pub fn design_inverse(excerpt: &[f64], sample_rate: u32) -> Result<CompensationDesign> {
    let fft_size = analysis_fft_size(excerpt.len()).max(INVERSE_TAPS);
    let spec = Spectrum::from_signal(excerpt, fft_size, sample_rate)?;
    let peak = spec.magnitudes().into_iter().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return invalid("cannot invert an all-zero direct sound");
    }
    let h: Vec<Complex64> = spec.bins().iter().map(|c| c / peak).collect();
    let magnitude: Vec<f64> = h.iter().map(|c| c.norm()).collect();
    let smoothed = savitzky_golay_smooth(&magnitude, SMOOTH_BINS, SMOOTH_ORDER)?;
    let sigma: Vec<f64> = magnitude
        .iter()
        .zip(&smoothed)
        .map(|(m, s)| if s >= m { s - m } else { 0.0 })
        .collect();
    let alpha = 10f64.powf(REG_ALPHA_DB / 20.0);
    let reg_alpha: Vec<f64> = (0..h.len())
        .map(|k| {
            let f = spec.frequency(k);
            if f >= PASSBAND_HZ.0 && f <= PASSBAND_HZ.1 {
                0.0
            } else {
                alpha
            }
        })
        .collect();
    let inverse_bins: Vec<Complex64> = h
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let beta = reg_alpha[k] + sigma[k] * sigma[k];
            let denom = c.norm_sqr() + beta;
            if denom == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c.conj() / denom / peak
            }
        })
        .collect();
    let periodic = Spectrum::from_bins(inverse_bins.clone(), fft_size, sample_rate)?.to_signal();
    let win = hann(INVERSE_TAPS + 1);
    let inverse_fir: Vec<f64> = (0..INVERSE_TAPS)
        .map(|i| {
            let lag = i as isize - INVERSE_DELAY as isize;
            periodic[lag.rem_euclid(fft_size as isize) as usize] * win[i]
        })
        .collect();
    if inverse_fir.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("inverse filter is not finite".into()));
    }
    Ok(CompensationDesign {
        fft_size,
        sample_rate,
        peak,
        magnitude,
        smoothed,
        reg_alpha,
        sigma,
        inverse_bins,
        inverse_fir,
        delay: INVERSE_DELAY,
    })
}

/// Replaces the simulated direct stem by `sim_direct * meas_excerpt * inverse`
/// per ear and recomposes the BRIR. Early and late stems are untouched.
///
/// `reference` is the direct-sound split of the target; its excerpt starts
/// `DIRECT_WINDOW_FLANK` samples before its onset, as does the simulated
/// excerpt, so the compensated direct sound keeps the simulated onset time.
pub fn compensate_direct(sim: &Brir, reference: &DirectSplit) -> Result<(Brir, Vec<CompensationDesign>)> {
    let stems = sim.stems()?;
    let fs = sim.ir.sample_rate();
    if reference.excerpt.sample_rate() != fs {
        return invalid("reference and simulation differ in sample rate");
    }
    if reference.excerpt.num_channels() != stems.direct.num_channels() {
        return invalid("reference and simulation differ in channel count");
    }
    let window = direct_window(fs)?;
    let onset = detect_brir_onset(&stems.direct)?;
    let own = extract_direct(&stems.direct, onset, &window)?;
    let len = stems.direct.len();
    let mut designs = Vec::new();
    let mut channels = Vec::new();
    for ear in 0..stems.direct.num_channels() {
        let design = design_inverse(own.excerpt.channel(ear), fs)?;
        let y = convolve_slices(
            &convolve_slices(stems.direct.channel(ear), reference.excerpt.channel(ear)),
            &design.inverse_fir,
        );
        let mut out = vec![0.0; len];
        crate::ism::add_at(&mut out, &y, -(design.delay as isize));
        channels.push(out);
        designs.push(design);
    }
    let new_stems = Stems {
        direct: ImpulseResponse::new(channels, fs)?,
        early: stems.early.clone(),
        late: stems.late.clone(),
    };
    let brir = Brir::from_stems(new_stems, sim.source_id.clone(), sim.tag.with_ds())?;
    Ok((brir, designs))
}

/// Measured BRIR whose direct sound is replaced by the compensated
/// simulated direct sound ("Meas. DS").
pub fn measured_with_simulated_direct(measured: &Brir, compensated_sim: &Brir) -> Result<Brir> {
    let fs = compensated_sim.ir.sample_rate();
    let sim_direct = &compensated_sim.stems()?.direct;
    let split = extract_direct(sim_direct, detect_brir_onset(sim_direct)?, &direct_window(fs)?)?;
    let (out, _) = compensate_direct(measured, &split)?;
    Ok(out)
}
