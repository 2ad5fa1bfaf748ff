// Gated loudness of a synthetic speech token before and after
// normalisation.

use brirkit::dsp::ImpulseResponse;
use brirkit::loudness::{loudness_lufs, normalize_loudness};
use brirkit::stimuli::synthetic_speech_token;

/// `(before, gain_db, after)` in LUFS and dB.
pub fn run_example() -> brirkit::Result<(f64, f64, f64)> {
    let token = synthetic_speech_token(11, 1.6, 48_000)?;
    let x = ImpulseResponse::stereo(token.clone(), token, 48_000)?;
    let before = loudness_lufs(&x)?;
    let (y, gain) = normalize_loudness(&x, -23.0)?;
    Ok((before, gain, loudness_lufs(&y)?))
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let (before, gain, after) = run_example()?;
    println!("{before:.2} LUFS, gain {gain:+.2} dB, now {after:.3} LUFS");
    Ok(())
}
