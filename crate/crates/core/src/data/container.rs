//! On-disk container: a JSON manifest plus a little-endian `f32` payload.
//!
//! Two layouts are accepted. A *directory* holds `manifest.json` and
//! `payload.bin`. A *single file* is a 4-byte little-endian manifest length,
//! the manifest bytes, then the payload.
//!
//! The HRIR payload is position-major, left ear before right ear, with the
//! taps of each response contiguous.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Ear, HrirSet, SphericalDirection};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "payload.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrirManifest {
    pub sample_rate: u32,
    pub num_positions: usize,
    pub ir_length: usize,
    /// `[azimuth_deg, elevation_deg, radius_m]` per position.
    pub positions: Vec<[f64; 3]>,
}

/// Serializes the manifest exactly as it is written to disk.
pub fn manifest_bytes<M: Serialize>(manifest: &M) -> Result<Vec<u8>> {
    serde_json::to_vec(manifest)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize manifest: {e}")))
}

fn encode_payload(payload: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(payload.len() * 4);
    for x in payload {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    bytes
}

fn decode_payload(path: &Path, bytes: &[u8]) -> Result<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::container(path, "payload is not a whole number of f32 values"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn check_path(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidArgument("empty output path".into()));
    }
    Ok(())
}

/// Writes a single-file container.
pub fn write_container<M: Serialize>(path: &Path, manifest: &M, payload: &[f32]) -> Result<()> {
    check_path(path)?;
    let manifest = manifest_bytes(manifest)?;
    let mut bytes = Vec::with_capacity(4 + manifest.len() + payload.len() * 4);
    bytes.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&manifest);
    bytes.extend_from_slice(&encode_payload(payload));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the directory layout (`manifest.json` + `payload.bin`).
pub fn write_container_dir<M: Serialize>(dir: &Path, manifest: &M, payload: &[f32]) -> Result<()> {
    check_path(dir)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest_bytes(manifest)?).map_err(|e| Error::io(&manifest_path, e))?;
    let payload_path = dir.join(PAYLOAD_FILE);
    fs::write(&payload_path, encode_payload(payload)).map_err(|e| Error::io(&payload_path, e))
}

/// Reads either layout, returning the parsed manifest and raw payload.
pub fn read_container<M: DeserializeOwned>(path: &Path) -> Result<(M, Vec<f32>)> {
    let (manifest, payload) = if path.is_dir() {
        let manifest_path = path.join(MANIFEST_FILE);
        let payload_path = path.join(PAYLOAD_FILE);
        let manifest = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let payload = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
        (manifest, payload)
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 4 {
            return Err(Error::container(path, "missing manifest length prefix"));
        }
        let len = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        if bytes.len() < 4 + len {
            return Err(Error::container(path, "manifest length exceeds file size"));
        }
        (bytes[4..4 + len].to_vec(), bytes[4 + len..].to_vec())
    };
    let manifest: M = serde_json::from_slice(&manifest)
        .map_err(|e| Error::container(path, format!("bad manifest: {e}")))?;
    let payload = decode_payload(path, &payload)?;
    if payload.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("payload of {}", path.display())));
    }
    Ok((manifest, payload))
}

fn hrir_manifest(set: &HrirSet) -> HrirManifest {
    HrirManifest {
        sample_rate: set.sample_rate(),
        num_positions: set.num_positions(),
        ir_length: set.ir_length(),
        positions: set
            .positions()
            .iter()
            .map(|p| [p.azimuth_deg(), p.elevation_deg(), p.radius()])
            .collect(),
    }
}

fn hrir_payload(set: &HrirSet) -> Vec<f32> {
    let t = set.ir_length();
    let mut payload = Vec::with_capacity(set.num_positions() * 2 * t);
    for p in 0..set.num_positions() {
        payload.extend_from_slice(set.ir(Ear::Left, p));
        payload.extend_from_slice(set.ir(Ear::Right, p));
    }
    payload
}

/// Saves an HRIR set as a single-file container.
pub fn save_container(set: &HrirSet, path: impl AsRef<Path>) -> Result<()> {
    write_container(path.as_ref(), &hrir_manifest(set), &hrir_payload(set))
}

/// Saves an HRIR set in the directory layout.
pub fn save_container_dir(set: &HrirSet, dir: impl AsRef<Path>) -> Result<()> {
    write_container_dir(dir.as_ref(), &hrir_manifest(set), &hrir_payload(set))
}

/// Loads an HRIR set from either container layout.
pub fn load_container(path: impl AsRef<Path>) -> Result<HrirSet> {
    let path = path.as_ref();
    let (m, payload): (HrirManifest, Vec<f32>) = read_container(path)?;
    if m.positions.len() != m.num_positions {
        return Err(Error::container(
            path,
            format!(
                "num_positions is {} but {} positions are listed",
                m.num_positions,
                m.positions.len()
            ),
        ));
    }
    let t = m.ir_length;
    let expected = m.num_positions * 2 * t * 4;
    if payload.len() * 4 != expected {
        return Err(Error::PayloadLength {
            expected,
            found: payload.len() * 4,
        });
    }
    let positions = m
        .positions
        .iter()
        .map(|&[az, el, r]| SphericalDirection::from_degrees(az, el, r))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::container(path, e.to_string()))?;
    let mut left = Vec::with_capacity(payload.len() / 2);
    let mut right = Vec::with_capacity(payload.len() / 2);
    for row in payload.chunks_exact(2 * t.max(1)) {
        left.extend_from_slice(&row[..t]);
        right.extend_from_slice(&row[t..]);
    }
    HrirSet::new(m.sample_rate, positions, t, left, right)
        .map_err(|e| Error::container(path, e.to_string()))
}
