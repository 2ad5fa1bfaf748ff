// Room-acoustic parameters of synthetic decays and a ranking of candidate
// responses against a reference.

use brirkit::dsp::ImpulseResponse;
use brirkit::metrics::{analyze_brir, rank_methods, Ranking};
use rand::{Rng, SeedableRng};

fn decay(t60: f64, seed: u64) -> brirkit::Result<ImpulseResponse> {
    let fs = 44_100;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ch = |lag: usize| -> Vec<f64> {
        let mut x: Vec<f64> = (0..fs as usize)
            .map(|i| {
                if i < 300 {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0) * (-6.9 * i as f64 / f64::from(fs) / t60).exp()
                }
            })
            .collect();
        x[300 + lag] = 4.0;
        x
    };
    let l = ch(0);
    let r = ch(4);
    ImpulseResponse::stereo(l, r, fs)
}

pub fn run_example() -> brirkit::Result<Ranking> {
    let reference = analyze_brir(&decay(0.6, 1)?, "reference", "S1")?;
    let candidates = [("close", 0.62, 2), ("short", 0.4, 3), ("long", 1.0, 4)]
        .into_iter()
        .map(|(name, t, seed)| analyze_brir(&decay(t, seed)?, name, "S1"))
        .collect::<brirkit::Result<Vec<_>>>()?;
    rank_methods(&reference, &candidates)
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    for e in run_example()?.entries {
        println!("{:<6} {:.4} over {} cells", e.method, e.score, e.cells);
    }
    Ok(())
}
