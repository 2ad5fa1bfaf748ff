// Regularised inverse of a short direct-sound excerpt: the excerpt
// convolved with its inverse should be flat in the pass band.

use brirkit::dsp::convolve_slices;
use brirkit::dsp::fir::fir_magnitude;
use brirkit::synth::design_inverse;

/// Worst deviation (dB) from flat between 100 Hz and 10 kHz, and the
/// inverse filter's latency in samples.
pub fn run_example() -> brirkit::Result<(f64, usize)> {
    let fs = 44_100;
    // A two-tap comb with a mild high-frequency roll-off.
    let mut excerpt = vec![0.0; 132];
    excerpt[20] = 1.0;
    excerpt[21] = 0.4;
    excerpt[25] = -0.3;
    let design = design_inverse(&excerpt, fs)?;
    let flat = convolve_slices(&excerpt, &design.inverse_fir);
    let mut worst: f64 = 0.0;
    let mut f = 100.0;
    while f <= 10_000.0 {
        worst = worst.max((20.0 * fir_magnitude(&flat, f, fs).log10()).abs());
        f *= 1.05;
    }
    Ok((worst, design.delay))
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let (worst, delay) = run_example()?;
    println!("pass-band deviation {worst:.3} dB, latency {delay} samples");
    Ok(())
}
