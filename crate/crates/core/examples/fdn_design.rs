// Feedback delay network for the late tail: delays, loop gains and the
// decay of a bare network run.

use brirkit::dsp::OCTAVE_CENTERS_HZ;
use brirkit::fdn::{design_fdn, loop_gain};
use brirkit::room::paper_room;

pub struct FdnSummary {
    pub delays: Vec<usize>,
    /// Loop gain of the shortest line per octave.
    pub gains: Vec<f64>,
    /// Output energy of the first and second halves of a 0.5 s run.
    pub halves: (f64, f64),
}

pub fn run_example() -> brirkit::Result<FdnSummary> {
    let fs = 44_100;
    let room = paper_room();
    let fdn = design_fdn(&room, 16, fs, 7)?;
    let d0 = *fdn.delays_samples.iter().min().unwrap();
    let gains = room.t30_by_octave().iter().map(|t| loop_gain(d0, *t, fs)).collect();
    let mut injection = vec![vec![0.0; 64]; fdn.n_channels];
    injection[0][0] = 1.0;
    let lines = fdn.run_lines(&injection, fs as usize / 2)?;
    let half = fs as usize / 4;
    let e = |r: std::ops::Range<usize>| lines.iter().map(|l| l[r.clone()].iter().map(|x| x * x).sum::<f64>()).sum();
    Ok(FdnSummary { delays: fdn.delays_samples.clone(), gains, halves: (e(0..half), e(half..2 * half)) })
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let s = run_example()?;
    println!("delays: {:?}", s.delays);
    for (f, g) in OCTAVE_CENTERS_HZ.iter().zip(&s.gains) {
        println!("{f:>6} Hz loop gain {g:.5}");
    }
    println!("energy drop over 250 ms: {:.1} dB", 10.0 * (s.halves.1 / s.halves.0).log10());
    Ok(())
}
