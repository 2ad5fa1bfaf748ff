// Octave-band absorption of the listening room from its measured T30.

use brirkit::room::{absorption_to_t30, paper_room};

/// Returns `(band_hz, t30_s, alpha, t30_round_trip_s)` per octave.
pub fn run_example() -> brirkit::Result<Vec<(f64, f64, f64, f64)>> {
    let room = paper_room();
    let (v, s, c) = (room.volume(), room.surface(), room.speed_of_sound());
    let mut rows = Vec::new();
    for ((f, t), a) in brirkit::dsp::OCTAVE_CENTERS_HZ.iter().zip(room.t30_by_octave()).zip(room.absorption_by_octave()) {
        rows.push((*f, t, a, absorption_to_t30(v, s, c, a)?));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let room = paper_room();
    println!("V = {:.3} m^3, S = {:.3} m^2", room.volume(), room.surface());
    println!("{:>6} {:>7} {:>7} {:>9}", "band", "T30", "alpha", "back");
    for (f, t, a, back) in run_example()? {
        println!("{f:>6} {t:>7.3} {a:>7.4} {back:>9.4}");
    }
    Ok(())
}
