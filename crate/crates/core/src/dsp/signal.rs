use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// A sampled impulse response with one or two channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl ImpulseResponse {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() || channels.len() > 2 {
            return invalid(format!("expected 1 or 2 channels, got {}", channels.len()));
        }
        if sample_rate == 0 {
            return invalid("sample rate must be positive");
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return invalid("all channels must have the same length");
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("impulse response contains non-finite samples");
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn stereo(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![left, right], sample_rate)
    }

    /// All-zero response of the given shape.
    pub fn silent(num_channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; num_channels], sample_rate)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    /// Total energy summed over all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().map(|c| energy(c)).sum()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Applies `f` to every channel, keeping the sample rate.
    pub fn map_channels<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        Self::new(self.channels.iter().map(|c| f(c)).collect(), self.sample_rate)
    }

    /// Zero-pads or truncates every channel to `len` samples.
    pub fn resized(&self, len: usize) -> Self {
        let mut channels = self.channels.clone();
        for c in &mut channels {
            c.resize(len, 0.0);
        }
        Self {
            channels,
            sample_rate: self.sample_rate,
        }
    }

    /// Sample-wise sum, extending the shorter response with zeros.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.sample_rate != other.sample_rate {
            return invalid("sample rate mismatch");
        }
        if self.num_channels() != other.num_channels() {
            return invalid("channel count mismatch");
        }
        let len = self.len().max(other.len());
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| {
                (0..len)
                    .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
                    .collect()
            })
            .collect();
        Self::new(channels, self.sample_rate)
    }

    /// Swaps left and right of a two-channel response.
    pub fn swapped(&self) -> Self {
        let mut channels = self.channels.clone();
        channels.reverse();
        Self {
            channels,
            sample_rate: self.sample_rate,
        }
    }

    /// Sum of squares across channels, per sample.
    pub fn energy_envelope(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i] * c[i]).sum())
            .collect()
    }
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Forward and inverse complex FFTs of one size.
pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    pub size: usize,
}

impl FftPair {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            size,
        }
    }

    /// Full complex spectrum of a real signal zero-padded to `size`.
    pub fn real_forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x
            .iter()
            .take(self.size)
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf
    }

    /// Real part of the normalized inverse transform.
    pub fn real_inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut spec);
        let norm = 1.0 / self.size as f64;
        spec.iter().map(|c| c.re * norm).collect()
    }
}

/// One-sided complex spectrum of a real signal (`fft_size / 2 + 1` bins).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    fft_size: usize,
    sample_rate: u32,
}

impl Spectrum {
    pub fn from_signal(x: &[f64], fft_size: usize, sample_rate: u32) -> Result<Self> {
        if fft_size < 2 || fft_size % 2 != 0 {
            return invalid("FFT size must be even and at least 2");
        }
        if x.len() > fft_size {
            return invalid("signal longer than FFT size");
        }
        let full = FftPair::new(fft_size).real_forward(x);
        Ok(Self {
            bins: full[..=fft_size / 2].to_vec(),
            fft_size,
            sample_rate,
        })
    }

    pub fn from_bins(bins: Vec<Complex64>, fft_size: usize, sample_rate: u32) -> Result<Self> {
        if bins.len() != fft_size / 2 + 1 {
            return invalid("bin count must be fft_size / 2 + 1");
        }
        Ok(Self {
            bins,
            fft_size,
            sample_rate,
        })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate) / self.fft_size as f64
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    /// Real signal of length `fft_size` via Hermitian extension.
    pub fn to_signal(&self) -> Vec<f64> {
        let n = self.fft_size;
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[..self.bins.len()].copy_from_slice(&self.bins);
        for k in 1..n / 2 {
            full[n - k] = self.bins[k].conj();
        }
        FftPair::new(n).real_inverse(full)
    }

    /// Signal energy computed from the bins (Parseval).
    pub fn energy(&self) -> f64 {
        let n = self.fft_size;
        let mut sum = 0.0;
        for (k, c) in self.bins.iter().enumerate() {
            let w = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            sum += w * c.norm_sqr();
        }
        sum / n as f64
    }
}

const DIRECT_CONV_LIMIT: usize = 64 * 64;

/// Full linear convolution of two sample sequences.
pub fn convolve_slices(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    if x.len().min(h.len()) <= 16 || x.len() * h.len() <= DIRECT_CONV_LIMIT {
        let mut y = vec![0.0; out_len];
        for (i, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (j, &hv) in h.iter().enumerate() {
                y[i + j] += xv * hv;
            }
        }
        return y;
    }
    let size = next_pow2(out_len);
    let fft = FftPair::new(size);
    let xs = fft.real_forward(x);
    let hs = fft.real_forward(h);
    let prod = xs.iter().zip(&hs).map(|(a, b)| a * b).collect();
    let mut y = fft.real_inverse(prod);
    y.truncate(out_len);
    y
}

/// Convolves every channel of `x` with the matching channel of `h`.
///
/// A mono operand is broadcast against a stereo one.
pub fn convolve(x: &ImpulseResponse, h: &ImpulseResponse) -> Result<ImpulseResponse> {
    if x.sample_rate() != h.sample_rate() {
        return invalid(format!(
            "sample rate mismatch: {} vs {}",
            x.sample_rate(),
            h.sample_rate()
        ));
    }
    let n = x.num_channels().max(h.num_channels());
    if x.num_channels() != h.num_channels() && x.num_channels() != 1 && h.num_channels() != 1 {
        return invalid("channel counts cannot be broadcast");
    }
    let channels = (0..n)
        .map(|c| {
            let xc = x.channel(c.min(x.num_channels() - 1));
            let hc = h.channel(c.min(h.num_channels() - 1));
            convolve_slices(xc, hc)
        })
        .collect();
    ImpulseResponse::new(channels, x.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len() + h.len() - 1];
        for n in 0..y.len() {
            for k in 0..x.len() {
                if n >= k && n - k < h.len() {
                    y[n] += x[k] * h[n - k];
                }
            }
        }
        y
    }

    #[test]
    fn convolve_small_cases() {
        assert_eq!(convolve_slices(&[1.0, 1.0], &[1.0, -1.0]), vec![1.0, 0.0, -1.0]);
        let x = vec![0.3, -0.2, 0.5, 0.1];
        assert_eq!(convolve_slices(&x, &[1.0]), x);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..700).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = convolve_slices(&x, &h);
        let slow = naive(&x, &h);
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn convolve_rejects_rate_mismatch() {
        let a = ImpulseResponse::mono(vec![1.0], 44100).unwrap();
        let b = ImpulseResponse::mono(vec![1.0], 48000).unwrap();
        assert!(convolve(&a, &b).is_err());
    }

    #[test]
    fn mono_broadcasts_over_stereo() {
        let x = ImpulseResponse::mono(vec![1.0, 2.0], 8000).unwrap();
        let h = ImpulseResponse::stereo(vec![1.0], vec![-1.0], 8000).unwrap();
        let y = convolve(&x, &h).unwrap();
        assert_eq!(y.channel(0), &[1.0, 2.0]);
        assert_eq!(y.channel(1), &[-1.0, -2.0]);
    }

    #[test]
    fn spectrum_parseval_and_hermitian_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = Spectrum::from_signal(&x, 2048, 44100).unwrap();
        assert_eq!(s.bins().len(), 1025);
        let e = energy(&x);
        assert!((s.energy() - e).abs() <= 1e-9 * e);
        let back = s.to_signal();
        for (i, v) in back.iter().enumerate() {
            let want = x.get(i).copied().unwrap_or(0.0);
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(ImpulseResponse::mono(vec![f64::NAN], 44100).is_err());
        assert!(ImpulseResponse::new(vec![vec![0.0; 3], vec![0.0; 2]], 44100).is_err());
    }
}
