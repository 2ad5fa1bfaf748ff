// Nearest-neighbour lookup in the built-in monitor directivity set and the
// analytic head-shadow model.

use brirkit::directivity::geometry::Direction;
use brirkit::directivity::synthetic::{monitor_directivity_db, spherical_head_params};
use brirkit::directivity::{head_shadow_fir, SourceDirectivity};
use brirkit::dsp::fir::fir_magnitude;

/// 4 kHz magnitude (dB) of the monitor and the head-shadow model at a few
/// azimuths, on axis first.
pub fn run_example() -> brirkit::Result<Vec<(f64, f64, f64)>> {
    let fs = 44_100;
    let monitor = SourceDirectivity::Database(monitor_directivity_db(fs)?);
    let params = spherical_head_params();
    let db = |h: &[f64]| 20.0 * fir_magnitude(h, 4000.0, fs).log10();
    [0.0, 45.0, 90.0, 135.0, 180.0]
        .into_iter()
        .map(|az| {
            let m = monitor.fir(Direction::new(az, 0.0), fs)?;
            let h = head_shadow_fir(&params, az, fs)?;
            Ok((az, db(&m), db(&h)))
        })
        .collect()
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    println!("{:>5} {:>9} {:>9}", "az", "monitor", "shadow");
    for (az, m, h) in run_example()? {
        println!("{az:>5} {m:>9.2} {h:>9.2}");
    }
    Ok(())
}
