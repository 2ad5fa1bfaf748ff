//! Direction-gridded FIR databases (source directivity and HRIRs), the
//! parametric head-shadow model and the omnidirectional source.

mod container;
pub mod geometry;
pub mod synthetic;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

pub use container::{read_container, write_container, ContainerEntry, ContainerManifest};
pub use geometry::{direction_from_to, Direction};

use crate::error::{invalid, Result};

/// Minimum angular separation between two grid directions (degrees).
const MIN_SEPARATION_DEG: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectivityEntry {
    pub direction: Direction,
    /// One FIR per channel.
    pub fir: Vec<Vec<f64>>,
}

/// Direction grid with one FIR (per channel) at every grid point.
///
/// One channel for source directivity, two for HRIRs.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectivityDb {
    name: String,
    sample_rate: u32,
    channels: usize,
    entries: Vec<DirectivityEntry>,
    unit: Vec<[f64; 3]>,
}

impl DirectivityDb {
    pub fn new(name: impl Into<String>, sample_rate: u32, entries: Vec<DirectivityEntry>) -> Result<Self> {
        if entries.is_empty() {
            return invalid("directivity database needs at least one entry");
        }
        let channels = entries[0].fir.len();
        if !(1..=2).contains(&channels) {
            return invalid("directivity FIRs must have one or two channels");
        }
        let len = entries[0].fir[0].len();
        if len == 0 {
            return invalid("directivity FIRs must not be empty");
        }
        for e in &entries {
            if e.fir.len() != channels || e.fir.iter().any(|f| f.len() != len) {
                return invalid("all directivity FIRs must share length and channel count");
            }
            if e.fir.iter().flatten().any(|v| !v.is_finite()) {
                return invalid("directivity FIR contains non-finite taps");
            }
        }
        let unit: Vec<[f64; 3]> = entries.iter().map(|e| e.direction.unit_vector()).collect();
        let min_cos = MIN_SEPARATION_DEG.to_radians().cos();
        for i in 0..unit.len() {
            for j in i + 1..unit.len() {
                if geometry::dot(unit[i], unit[j]) > min_cos {
                    return invalid(format!(
                        "directions {:?} and {:?} are closer than {MIN_SEPARATION_DEG} degrees",
                        entries[i].direction, entries[j].direction
                    ));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            sample_rate,
            channels,
            entries,
            unit,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn fir_length(&self) -> usize {
        self.entries[0].fir[0].len()
    }

    pub fn entries(&self) -> &[DirectivityEntry] {
        &self.entries
    }

    /// Index of the grid point nearest to `dir` on the great circle. Ties go
    /// to the lower azimuth, then the lower elevation.
    pub fn nearest_index(&self, dir: Direction) -> usize {
        let q = dir.unit_vector();
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, u) in self.unit.iter().enumerate() {
            let d = geometry::dot(*u, q);
            let better = if (d - best_dot).abs() <= 1e-12 {
                let (a, b) = (&self.entries[i].direction, &self.entries[best].direction);
                (a.azimuth_deg, a.elevation_deg) < (b.azimuth_deg, b.elevation_deg)
            } else {
                d > best_dot
            };
            if better {
                best = i;
                best_dot = d;
            }
        }
        best
    }

    /// FIRs (one per channel) of the nearest grid direction.
    pub fn query_fir(&self, dir: Direction) -> &[Vec<f64>] {
        &self.entries[self.nearest_index(dir)].fir
    }

    /// Resamples every FIR to `target_rate`.
    pub fn resampled(&self, target_rate: u32) -> Result<Self> {
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let ir = crate::dsp::ImpulseResponse::new(e.fir.clone(), self.sample_rate)?;
                let r = crate::dsp::resample(&ir, target_rate)?;
                Ok(DirectivityEntry {
                    direction: e.direction,
                    fir: r.into_channels(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.name.clone(), target_rate, entries)
    }
}

/// Parameters of the first-order high-shelf head-shadow model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadShadowParams {
    /// Effective head or cabinet radius (m); sets the interaural delay of
    /// spherical-head HRIRs.
    pub radius_m: f64,
    /// High-frequency attenuation reached at 180 degrees off axis (dB).
    pub shelf_depth_db: f64,
    /// Shelf corner frequency (Hz).
    pub crossover_hz: f64,
    /// FIR truncation length.
    pub taps: usize,
}

impl Default for HeadShadowParams {
    fn default() -> Self {
        Self {
            radius_m: 0.0875,
            shelf_depth_db: 20.0,
            crossover_hz: 1500.0,
            taps: 128,
        }
    }
}

/// Head-shadow FIR for a direction `angle_deg` off the main axis.
///
/// A first-order high shelf (unity at DC) whose high-frequency gain falls
/// from 0 dB on axis to `-shelf_depth_db` at 180 degrees, following
/// `(1 - cos angle) / 2`.
pub fn head_shadow_fir(params: &HeadShadowParams, angle_deg: f64, sample_rate: u32) -> Result<Vec<f64>> {
    if !(0.0..=180.0).contains(&angle_deg) {
        return invalid(format!("off-axis angle {angle_deg} outside [0, 180]"));
    }
    let fs = f64::from(sample_rate);
    if !(params.crossover_hz > 0.0 && params.crossover_hz < fs / 2.0) || params.taps == 0 {
        return invalid("head-shadow crossover must lie in (0, fs/2) and taps > 0");
    }
    let weight = 0.5 * (1.0 - angle_deg.to_radians().cos());
    let g = 10f64.powf(-params.shelf_depth_db * weight / 20.0);
    let k = (std::f64::consts::PI * params.crossover_hz / fs).tan();
    let b0 = (g + k) / (1.0 + k);
    let b1 = (k - g) / (1.0 + k);
    let a1 = (k - 1.0) / (1.0 + k);
    let mut h = Vec::with_capacity(params.taps);
    let (mut x1, mut y1) = (0.0, 0.0);
    for n in 0..params.taps {
        let x = if n == 0 { 1.0 } else { 0.0 };
        let y = b0 * x + b1 * x1 - a1 * y1;
        h.push(y);
        x1 = x;
        y1 = y;
    }
    Ok(h)
}

/// Single-tap unit impulse.
pub fn omni_fir() -> Vec<f64> {
    vec![1.0]
}

/// Radiation model of a source.
#[derive(Debug, Clone)]
pub enum SourceDirectivity {
    Database(DirectivityDb),
    HeadShadow(HeadShadowParams),
    Omni,
}

impl SourceDirectivity {
    /// Mono FIR for a direction in the source's own frame.
    pub fn fir(&self, dir: Direction, sample_rate: u32) -> Result<Cow<'_, [f64]>> {
        match self {
            SourceDirectivity::Database(db) => {
                if db.sample_rate() != sample_rate {
                    return invalid("directivity database rate differs from the scene rate");
                }
                Ok(Cow::Borrowed(&db.query_fir(dir)[0]))
            }
            SourceDirectivity::HeadShadow(p) => {
                let off_axis = dir.angle_to(&Direction::new(0.0, 0.0)).clamp(0.0, 180.0);
                Ok(Cow::Owned(head_shadow_fir(p, off_axis, sample_rate)?))
            }
            SourceDirectivity::Omni => Ok(Cow::Owned(omni_fir())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fir::fir_magnitude;
    use crate::dsp::signal::energy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn db_of(dirs: &[(f64, f64)]) -> DirectivityDb {
        let entries = dirs
            .iter()
            .enumerate()
            .map(|(i, &(az, el))| DirectivityEntry {
                direction: Direction::new(az, el),
                fir: vec![vec![i as f64]],
            })
            .collect();
        DirectivityDb::new("t", 44100, entries).unwrap()
    }

    #[test]
    fn exact_grid_direction_returns_its_fir() {
        let db = db_of(&[(0.0, 0.0), (90.0, 0.0), (0.0, 45.0)]);
        assert_eq!(db.query_fir(Direction::new(90.0, 0.0))[0], vec![1.0]);
        assert_eq!(db.query_fir(Direction::new(0.0, 45.0))[0], vec![2.0]);
    }

    #[test]
    fn two_point_lookup() {
        let db = db_of(&[(0.0, 0.0), (180.0, 0.0)]);
        assert_eq!(db.query_fir(Direction::new(10.0, 0.0))[0], vec![0.0]);
        assert_eq!(db.query_fir(Direction::new(170.0, 0.0))[0], vec![1.0]);
    }

    #[test]
    fn tie_breaks_to_lower_azimuth() {
        let db = db_of(&[(20.0, 0.0), (0.0, 0.0)]);
        assert_eq!(db.query_fir(Direction::new(10.0, 0.0))[0], vec![1.0]);
    }

    #[test]
    fn rejects_duplicate_and_empty() {
        assert!(DirectivityDb::new("x", 44100, vec![]).is_err());
        let e = |az| DirectivityEntry {
            direction: Direction::new(az, 0.0),
            fir: vec![vec![1.0]],
        };
        assert!(DirectivityDb::new("x", 44100, vec![e(0.0), e(360.0)]).is_err());
        assert!(DirectivityDb::new("x", 44100, vec![e(0.0), e(0.05)]).is_err());
    }

    #[test]
    fn dense_grid_error_bounded_by_half_spacing() {
        let step = 10.0;
        let mut dirs = Vec::new();
        let mut el = -80.0;
        while el <= 80.0 {
            let mut az = 0.0;
            while az < 360.0 {
                dirs.push((az, el));
                az += step;
            }
            el += step;
        }
        dirs.push((0.0, 90.0));
        dirs.push((0.0, -90.0));
        let db = db_of(&dirs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let q = Direction::new(rng.gen_range(0.0..360.0), rng.gen_range(-80.0..80.0));
            let got = db.entries()[db.nearest_index(q)].direction;
            // Brute force on haversine distances.
            let hav = |a: &Direction| {
                let (p1, p2) = (q.elevation_deg.to_radians(), a.elevation_deg.to_radians());
                let dl = (a.azimuth_deg - q.azimuth_deg).to_radians();
                let h = ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
                2.0 * h.sqrt().min(1.0).asin()
            };
            let best = db.entries().iter().map(|e| hav(&e.direction)).fold(f64::INFINITY, f64::min);
            assert!((hav(&got) - best).abs() < 1e-9);
            // Half of the cell diagonal bounds the error on this grid.
            assert!(q.angle_to(&got) <= step / 2.0 * 2f64.sqrt() + 1e-9);
        }
    }

    #[test]
    fn head_shadow_on_axis_is_flat() {
        let p = HeadShadowParams::default();
        let h = head_shadow_fir(&p, 0.0, 44100).unwrap();
        for f in [50.0, 500.0, 2000.0, 8000.0, 16000.0] {
            assert!((20.0 * fir_magnitude(&h, f, 44100).log10()).abs() < 0.1);
        }
    }

    #[test]
    fn head_shadow_rear_reaches_depth() {
        let p = HeadShadowParams::default();
        let h = head_shadow_fir(&p, 180.0, 44100).unwrap();
        let g = 20.0 * fir_magnitude(&h, 20000.0, 44100).log10();
        assert!((g + p.shelf_depth_db).abs() < 0.5, "{g}");
        let front = head_shadow_fir(&p, 0.0, 44100).unwrap();
        assert!(fir_magnitude(&h, 8000.0, 44100) < fir_magnitude(&front, 8000.0, 44100));
    }

    #[test]
    fn head_shadow_monotone_and_energy_bounded() {
        let p = HeadShadowParams::default();
        let e0 = energy(&head_shadow_fir(&p, 0.0, 44100).unwrap());
        let mut prev: Vec<f64> = vec![f64::INFINITY; 4];
        for a in (0..=180).step_by(15) {
            let h = head_shadow_fir(&p, f64::from(a), 44100).unwrap();
            assert!(energy(&h) <= e0 + 1e-12);
            for (i, f) in [1500.0, 3000.0, 8000.0, 15000.0].iter().enumerate() {
                let m = fir_magnitude(&h, *f, 44100);
                assert!(m <= prev[i] + 1e-12);
                prev[i] = m;
            }
        }
        assert!(head_shadow_fir(&p, 181.0, 44100).is_err());
    }

    #[test]
    fn omni_is_identity() {
        let x = vec![0.5, -0.25, 0.125];
        assert_eq!(crate::dsp::convolve_slices(&x, &omni_fir()), x);
        let s = SourceDirectivity::Omni;
        assert_eq!(&*s.fir(Direction::new(123.0, -40.0), 44100).unwrap(), &[1.0]);
    }
}
