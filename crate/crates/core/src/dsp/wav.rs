use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::signal::ImpulseResponse;
use crate::error::{invalid, Result};

/// Sample encoding used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads a mono or stereo RIFF WAV (PCM 16/24/32-bit integer or float32).
pub fn read_wav(path: impl AsRef<Path>) -> Result<ImpulseResponse> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let nch = usize::from(spec.channels);
    if !(1..=2).contains(&nch) {
        return invalid(format!("unsupported channel count {nch}"));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 2f64.powi(i32::from(spec.bits_per_sample) - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / nch); nch];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % nch].push(v);
    }
    ImpulseResponse::new(channels, spec.sample_rate)
}

/// Writes `ir` as a little-endian RIFF WAV. PCM16 clips to full scale.
pub fn write_wav(path: impl AsRef<Path>, ir: &ImpulseResponse, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: ir.num_channels() as u16,
        sample_rate: ir.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..ir.len() {
        for c in ir.channels() {
            match format {
                WavFormat::Float32 => writer.write_sample(c[i] as f32)?,
                WavFormat::Pcm16 => {
                    let v = (c[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?
                }
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
