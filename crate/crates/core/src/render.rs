//! Scene rendering: image sources for direct sound and early reflections,
//! the feedback delay network for the tail, level matching and assembly
//! into stemmed BRIRs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::directivity::synthetic::{monitor_directivity_db, spherical_head_hrir_db};
use crate::directivity::{read_container, DirectivityDb, HeadShadowParams, SourceDirectivity};
use crate::dsp::ImpulseResponse;
use crate::error::{Error, Result};
use crate::fdn::{calibrate_late_level, couple_ism_to_fdn, design_fdn, render_late};
use crate::ism::{enumerate_images, enumerate_images_within, ImageSource, RenderContext};
use crate::room::{validate_scene, DirectivityMode, SceneConfig, SourceConfig};
use crate::synth::{Brir, Method, MethodTag, Stems};

/// Reference name of the built-in spherical-head HRIR set.
pub const BUILTIN_SPHERICAL_HEAD: &str = "builtin:spherical-head";
/// Reference name of the built-in monitor directivity set.
pub const BUILTIN_MONITOR: &str = "builtin:monitor";
/// Gap between the latest image arrival and the early/late transition.
pub const TRANSITION_MARGIN_S: f64 = 0.005;
/// Half-width of the level-matching window around the transition.
pub const CALIBRATION_HALF_WINDOW_S: f64 = 0.010;
const GATE_BIN_S: f64 = 0.005;
const GATE_BAND: usize = 3;

pub fn method_for(mode: DirectivityMode) -> Method {
    match mode {
        DirectivityMode::Measured => Method::SrcDir,
        DirectivityMode::HeadShadowModel => Method::ModelDir,
        DirectivityMode::Omni => Method::OmniDir,
    }
}

fn resolve(base_dir: Option<&Path>, r: &str) -> PathBuf {
    match base_dir {
        Some(b) if Path::new(r).is_relative() => b.join(r),
        _ => PathBuf::from(r),
    }
}

/// Loads a directivity container, or a built-in set, at `sample_rate`.
pub fn load_db(reference: &str, base_dir: Option<&Path>, sample_rate: u32) -> Result<DirectivityDb> {
    let db = match reference {
        BUILTIN_SPHERICAL_HEAD => spherical_head_hrir_db(sample_rate)?,
        BUILTIN_MONITOR => monitor_directivity_db(sample_rate)?,
        path => read_container(resolve(base_dir, path))?,
    };
    db.resampled(sample_rate)
}

pub fn load_hrir(scene: &SceneConfig, base_dir: Option<&Path>) -> Result<DirectivityDb> {
    let r = scene.receiver.hrir_db_ref.as_deref().unwrap_or(BUILTIN_SPHERICAL_HEAD);
    let db = load_db(r, base_dir, scene.sample_rate)?;
    if db.channels() != 2 {
        return Err(Error::Validation(vec![format!("HRIR set '{r}' is not two-channel")]));
    }
    Ok(db)
}

pub fn load_source_directivity(source: &SourceConfig, base_dir: Option<&Path>, sample_rate: u32) -> Result<SourceDirectivity> {
    Ok(match source.directivity_mode {
        DirectivityMode::Omni => SourceDirectivity::Omni,
        DirectivityMode::HeadShadowModel => SourceDirectivity::HeadShadow(HeadShadowParams::default()),
        DirectivityMode::Measured => {
            let r = source.directivity_db_ref.as_deref().ok_or_else(|| {
                Error::Validation(vec![format!(
                    "source {} uses measured directivity but names no database (set directivity_db_ref, e.g. \"{BUILTIN_MONITOR}\")",
                    source.id
                )])
            })?;
            let db = load_db(r, base_dir, sample_rate)?;
            if db.channels() != 1 {
                return Err(Error::Validation(vec![format!("source directivity set '{r}' is not mono")]));
            }
            SourceDirectivity::Database(db)
        }
    })
}

/// Internal quantities of one render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderDiagnostics {
    pub images: usize,
    pub dropped_images: usize,
    pub transition_ms: f64,
    pub late_gain: f64,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub brir: Brir,
    pub diagnostics: RenderDiagnostics,
}

/// Fade-in of the late part: at each time the share of the complete image
/// energy that the truncated image set misses, as an amplitude.
fn late_gate(all: &[ImageSource], order: u32, c: f64, fs: f64, transition_s: f64, length: usize) -> Vec<f64> {
    let nbins = (transition_s / GATE_BIN_S).ceil() as usize;
    let mut kept = vec![0.0; nbins];
    let mut total = vec![0.0; nbins];
    for im in all {
        let bin = (im.path_length / c / GATE_BIN_S) as usize;
        if bin >= nbins {
            continue;
        }
        let e = (im.band_gains[GATE_BAND] / im.path_length).powi(2);
        total[bin] += e;
        if im.order <= order {
            kept[bin] += e;
        }
    }
    let mut knots: Vec<(f64, f64)> = (0..nbins)
        .map(|b| {
            let t = (b as f64 + 0.5) * GATE_BIN_S;
            let v = if total[b] > 0.0 {
                (1.0 - kept[b] / total[b]).max(0.0).sqrt()
            } else {
                0.0
            };
            (t.min(transition_s), v)
        })
        .filter(|k| k.0 < transition_s)
        .collect();
    knots.push((transition_s, 1.0));
    (0..length)
        .map(|n| {
            let t = n as f64 / fs;
            if t >= transition_s {
                return 1.0;
            }
            match knots.iter().position(|k| k.0 > t) {
                Some(0) => knots[0].1 * t / knots[0].0,
                Some(i) => {
                    let (a, b) = (knots[i - 1], knots[i]);
                    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
                }
                None => 1.0,
            }
        })
        .collect()
}

/// Renders one source of `scene` into a stemmed BRIR.
pub fn render_source(
    scene: &SceneConfig,
    source_id: &str,
    directivity: &SourceDirectivity,
    hrir: &DirectivityDb,
) -> Result<RenderOutput> {
    validate_scene(scene).map_err(Error::Validation)?;
    let (index, source) = scene
        .sources
        .iter()
        .enumerate()
        .find(|(_, s)| s.id == source_id)
        .ok_or_else(|| Error::Validation(vec![format!("scene has no source '{source_id}'")]))?;
    let fs = scene.sample_rate;
    let fsf = f64::from(fs);
    let room = &scene.room;
    let c = room.speed_of_sound();
    let length = scene.ir_length_samples();
    let ctx = RenderContext {
        room,
        source_position: source.position,
        source_orientation: source.orientation,
        source: directivity,
        receiver_position: scene.receiver.position,
        receiver_orientation: scene.receiver.orientation,
        hrir,
        sample_rate: fs,
        length,
    };

    let images = enumerate_images(room, source.position, scene.receiver.position, scene.ism_order);
    let early = ctx.render(&images)?;
    let reflections = early.early.add(&early.direct.scaled(-1.0))?;
    let latest = early.arrivals.iter().map(|a| a.sample).max().unwrap_or(0);
    let transition_s = latest as f64 / fsf + TRANSITION_MARGIN_S;

    let fdn = design_fdn(room, scene.fdn_channels, fs, scene.seed)?;
    let injection = couple_ism_to_fdn(&images, &ctx, &fdn, scene.seed.wrapping_add(index as u64 + 1))?;
    let late_raw = render_late(&fdn, &injection, hrir, length)?;

    // Complete image set (all orders) around the transition as the level
    // reference for the tail.
    let lo = (transition_s - CALIBRATION_HALF_WINDOW_S) * c;
    let hi = (transition_s + CALIBRATION_HALF_WINDOW_S) * c;
    let window_images: Vec<ImageSource> = enumerate_images_within(room, source.position, scene.receiver.position, hi)
        .into_iter()
        .filter(|im| im.path_length >= lo)
        .collect();
    let reference = ctx.render(&window_images)?;
    let late_gain = calibrate_late_level(&reference.early, &late_raw, transition_s * 1e3)?;

    let all = enumerate_images_within(room, source.position, scene.receiver.position, transition_s * c);
    let gate = late_gate(&all, scene.ism_order, c, fsf, transition_s, length);
    let late = late_raw.map_channels(|ch| ch.iter().zip(&gate).map(|(v, g)| v * g * late_gain).collect())?;

    let tag = MethodTag::new(method_for(source.directivity_mode), false);
    let brir = Brir::from_stems(
        Stems {
            direct: early.direct,
            early: reflections,
            late,
        },
        source.id.clone(),
        tag,
    )?;
    Ok(RenderOutput {
        brir,
        diagnostics: RenderDiagnostics {
            images: images.len(),
            dropped_images: early.dropped,
            transition_ms: transition_s * 1e3,
            late_gain,
        },
    })
}

/// Renders every source, loading each database once. Relative database
/// paths resolve against `base_dir`.
pub fn render_scene(scene: &SceneConfig, base_dir: Option<&Path>) -> Result<Vec<RenderOutput>> {
    validate_scene(scene).map_err(Error::Validation)?;
    let hrir = load_hrir(scene, base_dir)?;
    let mut cache: BTreeMap<(DirectivityMode, Option<String>), SourceDirectivity> = BTreeMap::new();
    let mut out = Vec::new();
    for s in &scene.sources {
        let key = (s.directivity_mode, s.directivity_db_ref.clone());
        if !cache.contains_key(&key) {
            cache.insert(key.clone(), load_source_directivity(s, base_dir, scene.sample_rate)?);
        }
        out.push(render_source(scene, &s.id, &cache[&key], &hrir)?);
    }
    Ok(out)
}

/// Short-time level step (dB) across `at_s` relative to the decay expected
/// from `t60`: level just after minus level just before, plus the expected
/// drop over the window.
pub fn level_step_db(ir: &ImpulseResponse, at_s: f64, window_s: f64, t60: f64) -> f64 {
    let fs = f64::from(ir.sample_rate());
    let at = (at_s * fs).round() as usize;
    let w = (window_s * fs).round() as usize;
    let e = |lo: usize, hi: usize| -> f64 {
        ir.channels()
            .iter()
            .map(|c| crate::dsp::energy(&c[lo.min(c.len())..hi.min(c.len())]))
            .sum()
    };
    let before = e(at.saturating_sub(w), at);
    let after = e(at, at + w);
    10.0 * (after / before).log10() + 60.0 * window_s / t60
}
