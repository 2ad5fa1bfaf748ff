//! Shoebox room geometry, Eyring absorption and scene configuration.
//!
//! Coordinates are right-handed with x along the first room dimension and z
//! up. Orientations are (azimuth, elevation) in degrees, azimuth counted
//! counterclockwise from +x.

use std::collections::BTreeMap;
use std::f64::consts::LN_10;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::OCTAVE_CENTERS_HZ;
use crate::error::{domain, Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Average absorption from reverberation time (Eyring).
pub fn eyring_absorption(volume: f64, surface: f64, c: f64, t30: f64) -> Result<f64> {
    if !(volume > 0.0 && surface > 0.0 && c > 0.0 && t30 > 0.0) {
        return domain(format!(
            "Eyring inputs must be positive (V={volume}, S={surface}, c={c}, T={t30})"
        ));
    }
    let alpha = -f64::exp_m1((24.0 * LN_10 / c) * volume / (-surface * t30));
    Ok(alpha)
}

/// Reverberation time from average absorption; exact inverse of
/// [`eyring_absorption`].
pub fn absorption_to_t30(volume: f64, surface: f64, c: f64, alpha: f64) -> Result<f64> {
    if !(volume > 0.0 && surface > 0.0 && c > 0.0) {
        return domain("room volume, surface and speed of sound must be positive");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("absorption {alpha} outside (0, 1)"));
    }
    Ok(-(24.0 * LN_10 / c) * volume / (surface * (-alpha).ln_1p()))
}

/// Orientation of a source or receiver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Orientation {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RoomConfig {
    dims_m: [f64; 3],
    #[serde(default = "default_c")]
    speed_of_sound: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    t30_by_octave: BTreeMap<u32, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    absorption_by_octave: BTreeMap<u32, f64>,
}

fn default_c() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// Shoebox room with per-octave reverberation time and Eyring absorption.
///
/// Both maps cover the seven ISO octaves 125 Hz - 8 kHz. Bands missing from
/// the input hold the value of the nearest provided band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RoomConfig", into = "RoomConfig")]
pub struct RoomModel {
    dims_m: [f64; 3],
    speed_of_sound: f64,
    t30: [f64; 7],
    absorption: [f64; 7],
    provided_t30: BTreeMap<u32, f64>,
    provided_absorption: BTreeMap<u32, f64>,
}

impl TryFrom<RoomConfig> for RoomModel {
    type Error = Error;

    fn try_from(cfg: RoomConfig) -> Result<Self> {
        Self::build(
            cfg.dims_m,
            cfg.speed_of_sound,
            cfg.t30_by_octave,
            cfg.absorption_by_octave,
        )
    }
}

impl From<RoomModel> for RoomConfig {
    fn from(r: RoomModel) -> Self {
        RoomConfig {
            dims_m: r.dims_m,
            speed_of_sound: r.speed_of_sound,
            t30_by_octave: r.provided_t30,
            absorption_by_octave: r.provided_absorption,
        }
    }
}

fn nearest_band(map: &BTreeMap<u32, f64>, center: f64) -> Option<f64> {
    map.iter()
        .min_by(|a, b| {
            let da = (f64::from(*a.0) / center).ln().abs();
            let db = (f64::from(*b.0) / center).ln().abs();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(_, v)| *v)
}

impl RoomModel {
    /// Room whose absorption is derived from measured T30 values.
    pub fn from_t30(dims_m: [f64; 3], speed_of_sound: f64, t30_by_octave: BTreeMap<u32, f64>) -> Result<Self> {
        Self::build(dims_m, speed_of_sound, t30_by_octave, BTreeMap::new())
    }

    /// Room whose T30 values are derived from given absorption coefficients.
    pub fn from_absorption(
        dims_m: [f64; 3],
        speed_of_sound: f64,
        absorption_by_octave: BTreeMap<u32, f64>,
    ) -> Result<Self> {
        Self::build(dims_m, speed_of_sound, BTreeMap::new(), absorption_by_octave)
    }

    fn build(
        dims_m: [f64; 3],
        speed_of_sound: f64,
        t30: BTreeMap<u32, f64>,
        absorption: BTreeMap<u32, f64>,
    ) -> Result<Self> {
        if dims_m.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return domain(format!("room dimensions must be positive, got {dims_m:?}"));
        }
        if !(speed_of_sound > 0.0) {
            return domain("speed of sound must be positive");
        }
        if t30.is_empty() && absorption.is_empty() {
            return domain("room needs T30 or absorption values");
        }
        if let Some(b) = t30.keys().find(|b| absorption.contains_key(b)) {
            return domain(format!("band {b} Hz has both T30 and absorption; give only one"));
        }
        if let Some((b, v)) = t30.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return domain(format!("T30 at {b} Hz must be positive, got {v}"));
        }
        if let Some((b, v)) = absorption.iter().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return domain(format!("absorption at {b} Hz must lie in (0, 1), got {v}"));
        }
        let [x, y, z] = dims_m;
        let volume = x * y * z;
        let surface = 2.0 * (x * y + x * z + y * z);
        // Provided values in either form, converted to T30.
        let mut all_t30 = t30.clone();
        for (b, a) in &absorption {
            all_t30.insert(*b, absorption_to_t30(volume, surface, speed_of_sound, *a)?);
        }
        let mut t = [0.0; 7];
        let mut a = [0.0; 7];
        for (i, &fc) in OCTAVE_CENTERS_HZ.iter().enumerate() {
            let band = fc as u32;
            if let Some(alpha) = absorption.get(&band) {
                a[i] = *alpha;
                t[i] = all_t30[&band];
            } else {
                t[i] = nearest_band(&all_t30, fc).expect("non-empty");
                a[i] = eyring_absorption(volume, surface, speed_of_sound, t[i])?;
            }
        }
        Ok(Self {
            dims_m,
            speed_of_sound,
            t30: t,
            absorption: a,
            provided_t30: t30,
            provided_absorption: absorption,
        })
    }

    pub fn dims(&self) -> [f64; 3] {
        self.dims_m
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn volume(&self) -> f64 {
        self.dims_m.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims_m;
        2.0 * (x * y + x * z + y * z)
    }

    /// T30 per ISO octave 125 Hz - 8 kHz.
    pub fn t30_by_octave(&self) -> [f64; 7] {
        self.t30
    }

    /// Eyring absorption per ISO octave 125 Hz - 8 kHz.
    pub fn absorption_by_octave(&self) -> [f64; 7] {
        self.absorption
    }

    pub fn t30_points(&self) -> Vec<(f64, f64)> {
        OCTAVE_CENTERS_HZ.iter().copied().zip(self.t30).collect()
    }

    pub fn absorption_points(&self) -> Vec<(f64, f64)> {
        OCTAVE_CENTERS_HZ.iter().copied().zip(self.absorption).collect()
    }

    /// Mean free path divided by the speed of sound, 4V / (S c).
    pub fn mean_free_path_time(&self) -> f64 {
        4.0 * self.volume() / (self.surface() * self.speed_of_sound)
    }

    /// True when `p` lies strictly inside the box.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().zip(&self.dims_m).all(|(v, d)| *v > 0.0 && v < d)
    }

    /// Copy of the room with every band's absorption replaced.
    pub fn with_uniform_t30(&self, t30: f64) -> Result<Self> {
        let map = OCTAVE_CENTERS_HZ.iter().map(|f| (*f as u32, t30)).collect();
        Self::from_t30(self.dims_m, self.speed_of_sound, map)
    }
}

/// How the source radiation pattern is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DirectivityMode {
    /// Measured source directivity database.
    Measured,
    /// Parametric head-shadow approximation.
    HeadShadowModel,
    /// Frequency-independent omnidirectional source.
    Omni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub id: String,
    pub position: [f64; 3],
    #[serde(default)]
    pub orientation: Orientation,
    pub directivity_mode: DirectivityMode,
    /// Path of a directivity container manifest, relative to the scene file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directivity_db_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub position: [f64; 3],
    #[serde(default)]
    pub orientation: Orientation,
    /// Path of an HRIR container manifest. Without one, a built-in
    /// spherical-head set is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hrir_db_ref: Option<String>,
}

fn default_order() -> u32 {
    3
}
fn default_channels() -> usize {
    24
}
fn default_rate() -> u32 {
    44100
}

/// Complete description of a simulation scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub room: RoomModel,
    pub sources: Vec<SourceConfig>,
    pub receiver: ReceiverConfig,
    #[serde(default = "default_order")]
    pub ism_order: u32,
    #[serde(default = "default_channels")]
    pub fdn_channels: usize,
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    #[serde(default)]
    pub seed: u64,
    /// Rendered length; defaults to 1.5 x the longest octave T30.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir_length_s: Option<f64>,
}

impl SceneConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn source(&self, id: &str) -> Option<&SourceConfig> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn ir_length_samples(&self) -> usize {
        let secs = self.ir_length_s.unwrap_or_else(|| {
            1.5 * self.room.t30_by_octave().iter().cloned().fold(0.0, f64::max)
        });
        (secs * f64::from(self.sample_rate)).round() as usize
    }
}

/// Checks every scene invariant and returns all violations at once.
pub fn validate_scene(scene: &SceneConfig) -> std::result::Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let room = &scene.room;
    if scene.sources.is_empty() {
        errs.push("scene has no sources".to_string());
    }
    for s in &scene.sources {
        if !room.contains(s.position) {
            errs.push(format!("source {} at {:?} is outside room", s.id, s.position));
        }
        if s.directivity_mode == DirectivityMode::Measured && s.directivity_db_ref.is_none() {
            errs.push(format!(
                "source {} uses Measured directivity but has no directivity_db_ref",
                s.id
            ));
        }
        let near = scene
            .receiver
            .position
            .iter()
            .zip(&s.position)
            .all(|(a, b)| (a - b).abs() < 1e-9);
        if near {
            errs.push(format!("source {} coincides with the receiver", s.id));
        }
    }
    let mut ids: Vec<&str> = scene.sources.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        errs.push("source ids must be unique".to_string());
    }
    if !room.contains(scene.receiver.position) {
        errs.push(format!(
            "receiver at {:?} is outside room",
            scene.receiver.position
        ));
    }
    if scene.fdn_channels < 4 {
        errs.push(format!("fdn_channels must be >= 4, got {}", scene.fdn_channels));
    }
    if scene.sample_rate == 0 {
        errs.push("sample_rate must be positive".to_string());
    }
    if let Some(l) = scene.ir_length_s {
        if !(l > 0.0) {
            errs.push("ir_length_s must be positive".to_string());
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Octave T30 values of the reference lab room (omnidirectional measurement).
pub const PAPER_ROOM_T30: [f64; 7] = [0.69, 0.53, 0.58, 0.62, 0.72, 0.80, 0.70];
pub const PAPER_ROOM_DIMS: [f64; 3] = [5.15, 7.05, 2.85];

pub fn paper_room() -> RoomModel {
    let map = OCTAVE_CENTERS_HZ
        .iter()
        .zip(PAPER_ROOM_T30)
        .map(|(f, t)| (*f as u32, t))
        .collect();
    RoomModel::from_t30(PAPER_ROOM_DIMS, DEFAULT_SPEED_OF_SOUND, map).expect("valid constants")
}

/// The six-source lab layout: sources at 1.7 m and 3.4 m, at 0 and -60
/// degrees relative to the listener's look direction. S1-S4 (1.3 m high) face
/// the receiver, S5/S6 (1.5 m high, 0 degrees) face away.
///
/// The receiver sits at (1.6, 2.2, 1.3) looking along +y, which is where all
/// six positions fit inside the room; a centered receiver would put S4
/// outside the 5.15 m wall.
pub fn paper_scene(mode: DirectivityMode, directivity_db_ref: Option<String>) -> SceneConfig {
    let rx = [1.6, 2.2, 1.3];
    let look = 90.0_f64;
    let mut sources = Vec::new();
    let layout = [
        ("S1", 1.7, 0.0, 1.3, false),
        ("S2", 3.4, 0.0, 1.3, false),
        ("S3", 1.7, -60.0, 1.3, false),
        ("S4", 3.4, -60.0, 1.3, false),
        ("S5", 1.7, 0.0, 1.5, true),
        ("S6", 3.4, 0.0, 1.5, true),
    ];
    for (id, dist, rel_az, height, away) in layout {
        let az = (look + rel_az).to_radians();
        let pos = [rx[0] + dist * az.cos(), rx[1] + dist * az.sin(), height];
        let toward = (look + rel_az + 180.0).rem_euclid(360.0);
        let facing = if away { toward + 180.0 } else { toward };
        sources.push(SourceConfig {
            id: id.to_string(),
            position: pos,
            orientation: Orientation::new(facing.rem_euclid(360.0), 0.0),
            directivity_mode: mode,
            directivity_db_ref: directivity_db_ref.clone(),
        });
    }
    SceneConfig {
        room: paper_room(),
        sources,
        receiver: ReceiverConfig {
            position: rx,
            orientation: Orientation::new(look, 0.0),
            hrir_db_ref: None,
        },
        ism_order: 3,
        fdn_channels: 24,
        sample_rate: 44100,
        seed: 1,
        ir_length_s: None,
    }
}
