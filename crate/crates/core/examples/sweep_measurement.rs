// Exponential sweep measurement of a known two-path system: generate,
// "record" through the system, deconvolve and check the recovered paths.

use brirkit::dsp::{convolve_slices, ImpulseResponse};
use brirkit::sweep::{deconvolve, estimate_delay_snr, generate_sweep, SweepSpec};

pub struct SweepResult {
    pub delay_samples: usize,
    /// Recovered amplitudes at the direct and the reflected path.
    pub taps: (f64, f64),
}

pub fn run_example() -> brirkit::Result<SweepResult> {
    let fs = 16_000;
    let spec = SweepSpec::new(50.0, 7000.0, 1.0, fs)?;
    let sweep = generate_sweep(&spec);
    let mut system = vec![0.0; 400];
    system[40] = 0.8;
    system[240] = -0.3;
    let mut rec = convolve_slices(&sweep, &system);
    rec.resize(sweep.len() + fs as usize / 2, 0.0);
    let delay = estimate_delay_snr(&sweep, &rec)?.delay_samples;
    let ir = deconvolve(&ImpulseResponse::mono(rec, fs)?, &spec)?.linear()?;
    let x = ir.channel(0);
    Ok(SweepResult { delay_samples: delay, taps: (x[40], x[240]) })
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let r = run_example()?;
    println!("delay {} samples, taps {:.3} and {:.3}", r.delay_samples, r.taps.0, r.taps.1);
    Ok(())
}
