//! Native directivity container.
//!
//! A JSON manifest plus a sidecar of little-endian `f32` taps. The sidecar
//! holds every entry in manifest order; inside an entry the channels follow
//! each other, each `fir_length` taps long. `offset_bytes` points at the
//! first tap of channel 0 of the entry.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DirectivityDb, DirectivityEntry, Direction};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerEntry {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub offset_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerManifest {
    pub name: String,
    pub channels: usize,
    pub sample_rate: u32,
    pub fir_length: usize,
    /// Sidecar path relative to the manifest directory.
    pub data_file: String,
    pub entries: Vec<ContainerEntry>,
}

fn sidecar_name(manifest: &Path) -> String {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "directivity".into());
    format!("{stem}.f32")
}

fn resolve(manifest: &Path, data_file: &str) -> PathBuf {
    manifest
        .parent()
        .map(|p| p.join(data_file))
        .unwrap_or_else(|| PathBuf::from(data_file))
}

/// Writes `db` as `<manifest>` plus `<manifest stem>.f32` beside it.
pub fn write_container(db: &DirectivityDb, manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let data_file = sidecar_name(manifest_path);
    let entry_bytes = (db.channels() * db.fir_length() * 4) as u64;
    let mut data = Vec::with_capacity(db.entries().len() * entry_bytes as usize);
    let mut entries = Vec::with_capacity(db.entries().len());
    for (i, e) in db.entries().iter().enumerate() {
        entries.push(ContainerEntry {
            azimuth_deg: e.direction.azimuth_deg,
            elevation_deg: e.direction.elevation_deg,
            offset_bytes: i as u64 * entry_bytes,
        });
        for ch in &e.fir {
            for &v in ch {
                data.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let manifest = ContainerManifest {
        name: db.name().to_string(),
        channels: db.channels(),
        sample_rate: db.sample_rate(),
        fir_length: db.fir_length(),
        data_file: data_file.clone(),
        entries,
    };
    fs::write(resolve(manifest_path, &data_file), data)?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_container(manifest_path: impl AsRef<Path>) -> Result<DirectivityDb> {
    let manifest_path = manifest_path.as_ref();
    let manifest: ContainerManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let data = fs::read(resolve(manifest_path, &manifest.data_file))?;
    let n = manifest.channels * manifest.fir_length;
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let start = e.offset_bytes as usize;
        let end = start + n * 4;
        if end > data.len() {
            return invalid(format!(
                "entry at ({}, {}) points past the end of {}",
                e.azimuth_deg, e.elevation_deg, manifest.data_file
            ));
        }
        let taps: Vec<f64> = data[start..end]
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        entries.push(DirectivityEntry {
            direction: Direction::new(e.azimuth_deg, e.elevation_deg),
            fir: taps.chunks(manifest.fir_length.max(1)).map(<[f64]>::to_vec).collect(),
        });
    }
    let db = DirectivityDb::new(manifest.name, manifest.sample_rate, entries)?;
    if db.channels() != manifest.channels || db.fir_length() != manifest.fir_length {
        return invalid("manifest channel count or FIR length disagrees with the data");
    }
    Ok(db)
}
