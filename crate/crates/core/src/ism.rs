//! Image sources of a shoebox room and binaural rendering of the direct
//! sound and early reflections.

use std::collections::BTreeMap;

use crate::directivity::geometry::{self, Vec3};
use crate::directivity::{direction_from_to, DirectivityDb, Direction, SourceDirectivity};
use crate::dsp::{convolve_slices, design_band_fir, ImpulseResponse, OCTAVE_CENTERS_HZ};
use crate::error::{invalid, Result};
use crate::room::{Orientation, RoomModel};

/// Length of the linear-phase reflection filter.
pub const BAND_FIR_TAPS: usize = 65;
const BAND_FIR_DELAY: usize = (BAND_FIR_TAPS - 1) / 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    /// Period index `n` per axis.
    pub reflection_index: [i32; 3],
    /// Mirror parity `q` per axis; 1 means the image is mirrored on that axis.
    pub parity: [u8; 3],
    pub position: Vec3,
    pub order: u32,
    pub path_length: f64,
    /// Pressure reflection factor product per octave, `sqrt(1 - a)^order`.
    pub band_gains: [f64; 7],
}

impl ImageSource {
    /// Sort key that makes summation order independent of enumeration order.
    fn key(&self) -> ([i32; 3], [u8; 3]) {
        (self.reflection_index, self.parity)
    }
}

fn axis_order(n: i32, q: u8) -> u32 {
    (2 * n - i32::from(q)).unsigned_abs()
}

fn band_gains(room: &RoomModel, order: u32) -> [f64; 7] {
    let mut g = [0.0; 7];
    for (gi, a) in g.iter_mut().zip(room.absorption_by_octave()) {
        *gi = (1.0 - a).sqrt().powi(order as i32);
    }
    g
}

fn build_images<F>(room: &RoomModel, source: Vec3, receiver: Vec3, n_max: i32, keep: F) -> Vec<ImageSource>
where
    F: Fn(u32, f64) -> bool,
{
    let dims = room.dims();
    let mut out = Vec::new();
    for nx in -n_max..=n_max {
        for ny in -n_max..=n_max {
            for nz in -n_max..=n_max {
                for q in 0..8u8 {
                    let idx = [nx, ny, nz];
                    let parity = [q & 1, (q >> 1) & 1, (q >> 2) & 1];
                    let mut pos = [0.0; 3];
                    let mut order = 0;
                    for k in 0..3 {
                        let sign = 1.0 - 2.0 * f64::from(parity[k]);
                        pos[k] = sign * source[k] + 2.0 * f64::from(idx[k]) * dims[k];
                        order += axis_order(idx[k], parity[k]);
                    }
                    let path_length = geometry::distance(pos, receiver);
                    if keep(order, path_length) {
                        out.push(ImageSource {
                            reflection_index: idx,
                            parity,
                            position: pos,
                            order,
                            path_length,
                            band_gains: band_gains(room, order),
                        });
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    out
}

/// All image sources with reflection order `<= max_order`.
pub fn enumerate_images(room: &RoomModel, source: Vec3, receiver: Vec3, max_order: u32) -> Vec<ImageSource> {
    let n_max = (max_order as i32 + 1) / 2;
    build_images(room, source, receiver, n_max, |o, _| o <= max_order)
}

/// All image sources, of any order, whose path is at most `max_path_m`.
pub fn enumerate_images_within(room: &RoomModel, source: Vec3, receiver: Vec3, max_path_m: f64) -> Vec<ImageSource> {
    let min_dim = room.dims().iter().cloned().fold(f64::INFINITY, f64::min);
    let n_max = (max_path_m / (2.0 * min_dim)).ceil() as i32 + 1;
    build_images(room, source, receiver, n_max, |_, p| p <= max_path_m)
}

/// Path length of the nearest image of order `order` exactly; images of
/// that order and above never arrive earlier.
pub fn nearest_path_of_order(room: &RoomModel, source: Vec3, receiver: Vec3, order: u32) -> f64 {
    let n_max = (order as i32 + 1) / 2;
    build_images(room, source, receiver, n_max, |o, _| o == order)
        .iter()
        .map(|im| im.path_length)
        .fold(f64::INFINITY, f64::min)
}

/// Where one image landed in the rendered response.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageArrival {
    pub order: u32,
    /// Nearest-sample arrival time.
    pub sample: usize,
    /// Rounding remainder `exact - sample` in samples.
    pub fractional: f64,
    pub path_length: f64,
}

/// Result of rendering a set of images.
#[derive(Debug, Clone)]
pub struct EarlyRender {
    /// Sum of all rendered images, direct sound included.
    pub early: ImpulseResponse,
    /// Order-0 image alone.
    pub direct: ImpulseResponse,
    pub arrivals: Vec<ImageArrival>,
    /// Images whose arrival lies beyond the response length.
    pub dropped: usize,
}

/// Static inputs shared by every image of one source/receiver pair.
pub struct RenderContext<'a> {
    pub room: &'a RoomModel,
    pub source_position: Vec3,
    pub source_orientation: Orientation,
    pub source: &'a SourceDirectivity,
    pub receiver_position: Vec3,
    pub receiver_orientation: Orientation,
    pub hrir: &'a DirectivityDb,
    pub sample_rate: u32,
    pub length: usize,
}

impl RenderContext<'_> {
    /// Exit direction in the source frame. Reflections mirror the
    /// image-to-receiver vector on every odd-parity axis.
    pub fn exit_direction(&self, image: &ImageSource) -> Direction {
        let mut v = geometry::sub(self.receiver_position, image.position);
        for k in 0..3 {
            if image.parity[k] == 1 {
                v[k] = -v[k];
            }
        }
        let local = geometry::world_to_local(&self.source_orientation, v);
        Direction::from_vector(local).unwrap_or(Direction::new(0.0, 0.0))
    }

    /// Mono source-side filter of one image: directivity, reflection filter
    /// and 1/r. Returns the filter and its leading delay in samples.
    pub fn source_filter(&self, image: &ImageSource, band_firs: &mut BandFirCache) -> Result<(Vec<f64>, usize)> {
        let src = self.source.fir(self.exit_direction(image), self.sample_rate)?;
        let scale = 1.0 / image.path_length;
        if image.order == 0 {
            return Ok((src.iter().map(|v| v * scale).collect(), 0));
        }
        let band = band_firs.get(image)?;
        let mut h = convolve_slices(&src, band);
        h.iter_mut().for_each(|v| *v *= scale);
        Ok((h, BAND_FIR_DELAY))
    }

    fn arrival(&self, image: &ImageSource) -> (f64, usize) {
        let exact = image.path_length / self.room.speed_of_sound() * f64::from(self.sample_rate);
        (exact, exact.round() as usize)
    }

    /// Renders `images` binaurally. The order-0 image, when present, is
    /// also returned alone.
    pub fn render(&self, images: &[ImageSource]) -> Result<EarlyRender> {
        if self.hrir.channels() != 2 {
            return invalid("HRIR database must have two channels");
        }
        if self.hrir.sample_rate() != self.sample_rate {
            return invalid("HRIR database rate differs from the scene rate");
        }
        let mut early = vec![vec![0.0; self.length]; 2];
        let mut direct = vec![vec![0.0; self.length]; 2];
        let mut arrivals = Vec::new();
        let mut dropped = 0;
        let mut band_firs = BandFirCache::new(self.sample_rate);
        for image in images {
            let (exact, sample) = self.arrival(image);
            if sample >= self.length {
                dropped += 1;
                continue;
            }
            let (h, lead) = self.source_filter(image, &mut band_firs)?;
            let arrival_dir = direction_from_to(self.receiver_position, &self.receiver_orientation, image.position)?;
            let hrir = self.hrir.query_fir(arrival_dir);
            for (ear, hr) in hrir.iter().enumerate() {
                let y = convolve_slices(&h, hr);
                add_at(&mut early[ear], &y, sample as isize - lead as isize);
                if image.order == 0 {
                    add_at(&mut direct[ear], &y, sample as isize - lead as isize);
                }
            }
            arrivals.push(ImageArrival {
                order: image.order,
                sample,
                fractional: exact - sample as f64,
                path_length: image.path_length,
            });
        }
        if dropped > 0 {
            log::warn!("{dropped} image sources arrive after the response end and were dropped");
        }
        Ok(EarlyRender {
            early: ImpulseResponse::new(early, self.sample_rate)?,
            direct: ImpulseResponse::new(direct, self.sample_rate)?,
            arrivals,
            dropped,
        })
    }
}

/// Adds `y` into `buf` starting at `offset`, clipping both ends.
pub(crate) fn add_at(buf: &mut [f64], y: &[f64], offset: isize) {
    for (i, v) in y.iter().enumerate() {
        let idx = offset + i as isize;
        if idx < 0 {
            continue;
        }
        match buf.get_mut(idx as usize) {
            Some(b) => *b += v,
            None => break,
        }
    }
}

/// Reflection filters keyed by order; images of equal order share gains.
pub struct BandFirCache {
    sample_rate: u32,
    firs: BTreeMap<u64, Vec<f64>>,
}

impl BandFirCache {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            firs: BTreeMap::new(),
        }
    }

    fn get(&mut self, image: &ImageSource) -> Result<&[f64]> {
        let key = image.band_gains.iter().fold(0u64, |h, g| {
            h.rotate_left(9) ^ g.to_bits()
        });
        if !self.firs.contains_key(&key) {
            let fir = band_gain_fir(&image.band_gains, self.sample_rate)?;
            self.firs.insert(key, fir);
        }
        Ok(&self.firs[&key])
    }
}

/// Linear-phase reflection filter for per-octave gains; delay
/// `(BAND_FIR_TAPS - 1) / 2` samples.
pub fn band_gain_fir(gains: &[f64; 7], sample_rate: u32) -> Result<Vec<f64>> {
    let points: Vec<(f64, f64)> = OCTAVE_CENTERS_HZ.iter().copied().zip(gains.iter().copied()).collect();
    design_band_fir(&points, BAND_FIR_TAPS, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directivity::DirectivityEntry;
    use crate::dsp::{octave_band_filter, energy};
    use crate::room::paper_room;

    fn dirac_hrir() -> DirectivityDb {
        DirectivityDb::new(
            "dirac",
            44100,
            vec![DirectivityEntry {
                direction: Direction::new(0.0, 0.0),
                fir: vec![vec![1.0], vec![1.0]],
            }],
        )
        .unwrap()
    }

    /// Independent count of (n, q) combinations with total order <= N.
    fn count_oracle(max_order: u32) -> usize {
        let per_axis: Vec<u32> = (-10..=10)
            .flat_map(|n: i32| [0u8, 1].map(move |q| (2 * n - i32::from(q)).unsigned_abs()))
            .collect();
        let mut c = 0;
        for a in &per_axis {
            for b in &per_axis {
                for d in &per_axis {
                    if a + b + d <= max_order {
                        c += 1;
                    }
                }
            }
        }
        c
    }

    #[test]
    fn image_counts() {
        let room = paper_room();
        let (s, r) = ([1.0, 2.0, 1.2], [3.0, 4.0, 1.5]);
        assert_eq!(enumerate_images(&room, s, r, 0).len(), 1);
        assert_eq!(enumerate_images(&room, s, r, 1).len(), 7);
        for n in 0..=4 {
            assert_eq!(enumerate_images(&room, s, r, n).len(), count_oracle(n));
        }
        assert_eq!(count_oracle(2), 25);
        assert_eq!(count_oracle(3), 63);
    }

    #[test]
    fn first_order_mirrors() {
        let room = paper_room();
        let s = [1.0, 2.0, 1.2];
        let imgs = enumerate_images(&room, s, [3.0, 4.0, 1.5], 1);
        let xs: Vec<f64> = imgs
            .iter()
            .filter(|i| i.order == 1 && i.parity[0] == 1)
            .map(|i| i.position[0])
            .collect();
        assert_eq!(xs.len(), 2);
        assert!(xs.iter().any(|x| (x + 1.0).abs() < 1e-12));
        assert!(xs.iter().any(|x| (x - 9.3).abs() < 1e-12));
        let src = imgs.iter().find(|i| i.order == 0).unwrap();
        assert_eq!(src.position, s);
        let a = room.absorption_by_octave();
        for im in &imgs {
            for b in 0..7 {
                let expect = (1.0 - a[b]).sqrt().powi(im.order as i32);
                assert!((im.band_gains[b] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn within_path_matches_order_enumeration() {
        let room = paper_room();
        let (s, r) = ([1.0, 2.0, 1.2], [3.0, 4.0, 1.5]);
        let by_order = enumerate_images(&room, s, r, 6);
        let horizon = nearest_path_of_order(&room, s, r, 7) - 1e-9;
        let a: Vec<_> = by_order.iter().filter(|i| i.path_length <= horizon).collect();
        let b = enumerate_images_within(&room, s, r, horizon);
        assert_eq!(a.len(), b.len());
        assert!(b.iter().all(|i| i.order <= 6));
    }

    fn ctx<'a>(
        room: &'a RoomModel,
        src: &'a SourceDirectivity,
        hrir: &'a DirectivityDb,
        s: Vec3,
        r: Vec3,
    ) -> RenderContext<'a> {
        RenderContext {
            room,
            source_position: s,
            source_orientation: Orientation::new(0.0, 0.0),
            source: src,
            receiver_position: r,
            receiver_orientation: Orientation::new(180.0, 0.0),
            hrir,
            sample_rate: 44100,
            length: 22050,
        }
    }

    #[test]
    fn anechoic_direct_onset() {
        let room = paper_room();
        let hrir = dirac_hrir();
        let src = SourceDirectivity::Omni;
        let (s, r) = ([0.5, 3.0, 1.4], [3.93, 3.0, 1.4]);
        let c = ctx(&room, &src, &hrir, s, r);
        let out = c.render(&enumerate_images(&room, s, r, 0)).unwrap();
        let l = out.direct.channel(0);
        assert!((l[441] - 1.0 / 3.43).abs() < 1e-12);
        assert_eq!(l.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(out.direct.channel(0), out.direct.channel(1));
        assert_eq!(out.early, out.direct);
    }

    #[test]
    fn inverse_distance_law() {
        let room = paper_room();
        let hrir = dirac_hrir();
        let src = SourceDirectivity::Omni;
        let r = [4.0, 3.0, 1.4];
        let near = ctx(&room, &src, &hrir, [3.0, 3.0, 1.4], r)
            .render(&enumerate_images(&room, [3.0, 3.0, 1.4], r, 0))
            .unwrap();
        let far = ctx(&room, &src, &hrir, [2.0, 3.0, 1.4], r)
            .render(&enumerate_images(&room, [2.0, 3.0, 1.4], r, 0))
            .unwrap();
        let pn = near.direct.channel(0).iter().cloned().fold(0.0, f64::max);
        let pf = far.direct.channel(0).iter().cloned().fold(0.0, f64::max);
        assert_eq!(pn, 2.0 * pf);
    }

    #[test]
    fn zero_gain_reflections_leave_direct_only() {
        let room = paper_room();
        let hrir = dirac_hrir();
        let src = SourceDirectivity::Omni;
        let (s, r) = ([1.0, 2.0, 1.2], [3.0, 4.0, 1.5]);
        let mut imgs = enumerate_images(&room, s, r, 3);
        for im in imgs.iter_mut().filter(|i| i.order > 0) {
            im.band_gains = [0.0; 7];
        }
        let out = ctx(&room, &src, &hrir, s, r).render(&imgs).unwrap();
        assert_eq!(out.early, out.direct);
    }

    #[test]
    fn octave_power_matches_image_sum() {
        let room = paper_room();
        let hrir = dirac_hrir();
        let src = SourceDirectivity::Omni;
        let (s, r) = ([1.1, 2.3, 1.2], [3.7, 5.1, 1.6]);
        let imgs = enumerate_images(&room, s, r, 3);
        let mut c = ctx(&room, &src, &hrir, s, r);
        c.length = 8192;
        let out = c.render(&imgs).unwrap();
        let fs = 44100.0;
        for fc in [250.0, 500.0, 1000.0, 2000.0, 4000.0] {
            let got = energy(&octave_band_filter(out.early.channel(0), fc, 44100).unwrap());
            // Image spectrum sum with exact delays, weighted by the band
            // filter and integrated over frequency (Parseval).
            let sos = crate::dsp::octave_bandpass(fc, 44100).unwrap();
            let df = 0.5;
            let mut expect = 0.0;
            let mut f = df / 2.0;
            while f < fs / 2.0 {
                let mut x = rustfft::num_complex::Complex64::new(0.0, 0.0);
                for im in &imgs {
                    let pts: Vec<(f64, f64)> =
                        OCTAVE_CENTERS_HZ.iter().copied().zip(im.band_gains).collect();
                    let a = crate::dsp::interp_log_freq(&pts, f) / im.path_length;
                    let tau = im.path_length / room.speed_of_sound();
                    x += rustfft::num_complex::Complex64::from_polar(a, -2.0 * std::f64::consts::PI * f * tau);
                }
                expect += x.norm_sqr() * sos.response(f, fs).norm_sqr() * df;
                f += df;
            }
            expect *= 2.0 / fs;
            let err = 10.0 * (got / expect).log10();
            assert!(err.abs() < 1.0, "{fc} Hz: {err} dB");
        }
    }
}
