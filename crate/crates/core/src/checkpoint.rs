//! Binary checkpoint of an iTEBD state.
//!
//! Layout: the 8-byte magic `MPSCHKP1`, a little-endian `u64` manifest
//! length, the UTF-8 JSON manifest, the payload, and a little-endian CRC32 of
//! the payload. The payload holds every block in row-major order as
//! interleaved `(re, im)` little-endian `f64` pairs; spectra are stored as
//! plain real vectors (`"real": true` in the manifest).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graded::{GradedMatrix, SchmidtSpectrum, SectorCharge};
use crate::mps::{MpsState, QuenchConfig, SiteTensor};

pub const MAGIC: &[u8; 8] = b"MPSCHKP1";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorEntry {
    pub q: SectorCharge,
    pub rows: usize,
    pub cols: usize,
    pub byte_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub charge_shift: SectorCharge,
    pub real: bool,
    pub sectors: Vec<SectorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub delta: f64,
    pub dt: f64,
    pub k_max: usize,
    pub t_init: f64,
    pub payload_bytes: u64,
    pub tensors: Vec<TensorEntry>,
}

const MATRIX_NAMES: [&str; 4] = ["A_A_up", "A_A_dn", "A_B_up", "A_B_dn"];
const SPECTRUM_NAMES: [&str; 2] = ["lambda_A", "lambda_B"];

fn push_matrix(name: &str, m: &GradedMatrix, payload: &mut Vec<u8>, tensors: &mut Vec<TensorEntry>) {
    let mut sectors = Vec::new();
    for (q, block) in m.iter() {
        sectors.push(SectorEntry { q, rows: block.nrows(), cols: block.ncols(), byte_offset: payload.len() as u64 });
        for r in 0..block.nrows() {
            for c in 0..block.ncols() {
                let z = block[(r, c)];
                payload.extend_from_slice(&z.re.to_le_bytes());
                payload.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    tensors.push(TensorEntry { name: name.into(), charge_shift: m.charge_shift(), real: false, sectors });
}

fn push_spectrum(name: &str, s: &SchmidtSpectrum, payload: &mut Vec<u8>, tensors: &mut Vec<TensorEntry>) {
    let mut sectors = Vec::new();
    for (q, values) in s.iter() {
        sectors.push(SectorEntry { q, rows: values.len(), cols: 1, byte_offset: payload.len() as u64 });
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    tensors.push(TensorEntry { name: name.into(), charge_shift: 0, real: true, sectors });
}

/// Serialize `state` and the run parameters into checkpoint bytes.
pub fn encode(state: &MpsState, config: &QuenchConfig) -> Vec<u8> {
    let mut payload = Vec::new();
    let mut tensors = Vec::new();
    let mats = [&state.a.up, &state.a.down, &state.b.up, &state.b.down];
    for (name, m) in MATRIX_NAMES.iter().zip(mats) {
        push_matrix(name, m, &mut payload, &mut tensors);
    }
    for (name, s) in SPECTRUM_NAMES.iter().zip([&state.lambda_a, &state.lambda_b]) {
        push_spectrum(name, s, &mut payload, &mut tensors);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        delta: config.delta,
        dt: config.dt,
        k_max: config.k_max,
        t_init: state.time,
        payload_bytes: payload.len() as u64,
        tensors,
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(8 + 8 + json.len() + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = at.checked_add(n).ok_or(Error::Truncated)?;
    let s = bytes.get(*at..end).ok_or(Error::Truncated)?;
    *at = end;
    Ok(s)
}

fn f64_at(payload: &[u8], offset: usize) -> Result<f64> {
    let b = payload.get(offset..offset + 8).ok_or_else(|| Error::Manifest("block outside payload".into()))?;
    Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
}

fn read_matrix(t: &TensorEntry, payload: &[u8]) -> Result<GradedMatrix> {
    if t.real {
        return Err(Error::Manifest(format!("{} must be complex", t.name)));
    }
    let mut m = GradedMatrix::new(t.charge_shift);
    for s in &t.sectors {
        let base = s.byte_offset as usize;
        let mut data = Vec::with_capacity(s.rows * s.cols);
        for k in 0..s.rows * s.cols {
            data.push(C64::new(f64_at(payload, base + 16 * k)?, f64_at(payload, base + 16 * k + 8)?));
        }
        m.insert(s.q, s.q + t.charge_shift, DMatrix::from_row_slice(s.rows, s.cols, &data))?;
    }
    Ok(m)
}

fn read_spectrum(t: &TensorEntry, payload: &[u8]) -> Result<SchmidtSpectrum> {
    if !t.real {
        return Err(Error::Manifest(format!("{} must be real", t.name)));
    }
    let mut sectors = Vec::new();
    for s in &t.sectors {
        let base = s.byte_offset as usize;
        let values = (0..s.rows).map(|k| f64_at(payload, base + 8 * k)).collect::<Result<Vec<_>>>()?;
        sectors.push((s.q, values));
    }
    Ok(SchmidtSpectrum::from_sectors(sectors))
}

/// Parse only the header and manifest, without checking the payload.
pub fn read_manifest(bytes: &[u8]) -> Result<Manifest> {
    decode_parts(bytes).map(|(m, _)| m)
}

fn decode_parts(bytes: &[u8]) -> Result<(Manifest, usize)> {
    let mut at = 0;
    let magic = bytes.get(..8).ok_or(if bytes.is_empty() || MAGIC.starts_with(bytes) {
        Error::Truncated
    } else {
        Error::BadMagic
    })?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    at += 8;
    let len = u64::from_le_bytes(take(bytes, &mut at, 8)?.try_into().expect("8 bytes"));
    let json = take(bytes, &mut at, usize::try_from(len).map_err(|_| Error::Truncated)?)?;
    let value: serde_json::Value = serde_json::from_slice(json).map_err(|e| Error::Manifest(e.to_string()))?;
    let version = value.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| Error::Manifest("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let manifest: Manifest = serde_json::from_value(value).map_err(|e| Error::Manifest(e.to_string()))?;
    Ok((manifest, at))
}

/// Inverse of [`encode`].
pub fn decode(bytes: &[u8]) -> Result<(MpsState, QuenchConfig)> {
    let (manifest, mut at) = decode_parts(bytes)?;
    let payload = take(bytes, &mut at, usize::try_from(manifest.payload_bytes).map_err(|_| Error::Truncated)?)?;
    let stored = u32::from_le_bytes(take(bytes, &mut at, 4)?.try_into().expect("4 bytes"));
    if at != bytes.len() {
        return Err(Error::Manifest(format!("{} trailing bytes after checksum", bytes.len() - at)));
    }
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let find = |name: &str| {
        manifest.tensors.iter().find(|t| t.name == name).ok_or_else(|| Error::Manifest(format!("missing tensor {name}")))
    };
    let m = MATRIX_NAMES.map(|n| find(n).and_then(|t| read_matrix(t, payload)));
    let [a_up, a_dn, b_up, b_dn] = m;
    let state = MpsState {
        a: SiteTensor { up: a_up?, down: a_dn? },
        b: SiteTensor { up: b_up?, down: b_dn? },
        lambda_a: read_spectrum(find(SPECTRUM_NAMES[0])?, payload)?,
        lambda_b: read_spectrum(find(SPECTRUM_NAMES[1])?, payload)?,
        time: manifest.t_init,
    };
    let config = QuenchConfig::new(manifest.delta, manifest.dt, manifest.k_max, manifest.t_init)
        .map_err(|e| Error::Manifest(e.to_string()))?;
    Ok((state, config))
}

pub fn save_checkpoint(state: &MpsState, config: &QuenchConfig, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(state, config))?;
    f.sync_all()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(MpsState, QuenchConfig)> {
    decode(&fs::read(path)?)
}
