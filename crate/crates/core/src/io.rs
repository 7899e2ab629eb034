//! Field container: an 8-byte tag, a header of little-endian 64-bit values
//! `(rank, n_r, n_theta, n_z, period_L)` and the coefficients as interleaved
//! `(re, im)` doubles in `(component, m, k, r)` order. A JSON sidecar mirrors
//! the header.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::grid::SpectralGrid;
use crate::linalg::C64;

pub const TAG: &[u8; 8] = b"CYLFLD01";
const HEADER_BYTES: usize = 8 + 5 * 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub rank: usize,
    pub components: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_z: usize,
    pub period_l: f64,
    /// Number of stacked fields in the file.
    pub fields: usize,
    /// Optional time stamps, one per field.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn encode(field: &SpectralField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_BYTES + 16 * field.coeffs().len());
    out.extend_from_slice(TAG);
    for v in [field.kind().rank() as u64, g.n_r() as u64, g.n_theta() as u64, g.n_z() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&g.period_l().to_le_bytes());
    for c in field.coeffs() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], at: usize) -> [u8; 8] {
    bytes[at..at + 8].try_into().expect("8-byte slice")
}

/// Decode one container from the front of `bytes`; returns the field and the bytes consumed.
pub fn decode(bytes: &[u8], grid: Option<&Arc<SpectralGrid>>) -> Result<(SpectralField, usize)> {
    if bytes.len() < HEADER_BYTES || &bytes[..8] != TAG {
        return Err(Error::Format("missing container tag".into()));
    }
    let h: Vec<u64> = (0..4).map(|i| u64::from_le_bytes(word(bytes, 8 + 8 * i))).collect();
    let period = f64::from_le_bytes(word(bytes, 40));
    if h[0] > 4 {
        return Err(Error::Format(format!("tensor rank {} not supported", h[0])));
    }
    let kind = FieldKind::from_rank(h[0] as usize);
    let g = match grid {
        Some(g) => {
            if (g.n_r() as u64, g.n_theta() as u64, g.n_z() as u64) != (h[1], h[2], h[3]) || g.period_l() != period {
                return Err(Error::GridMismatch);
            }
            Arc::clone(g)
        }
        None => Arc::new(SpectralGrid::new(h[1] as usize, h[2] as usize, h[3] as usize, period)?),
    };
    let count = kind.components() * g.n_theta() * g.n_z() * g.n_r();
    let end = HEADER_BYTES + 16 * count;
    if bytes.len() < end {
        return Err(Error::Format(format!("truncated payload: {} of {end} bytes", bytes.len())));
    }
    let coeffs = (0..count)
        .map(|i| {
            let at = HEADER_BYTES + 16 * i;
            C64::new(f64::from_le_bytes(word(bytes, at)), f64::from_le_bytes(word(bytes, at + 8)))
        })
        .collect();
    Ok((SpectralField::from_coeffs(kind, &g, coeffs)?, end))
}

fn sidecar_for(fields: &[SpectralField], times: &[f64]) -> Result<Sidecar> {
    let first = fields.first().ok_or_else(|| Error::Precondition("no fields to write".into()))?;
    for f in fields {
        first.same_layout(f)?;
    }
    let g = first.grid();
    Ok(Sidecar {
        format: String::from_utf8_lossy(TAG).into_owned(),
        rank: first.kind().rank(),
        components: first.kind().components(),
        n_r: g.n_r(),
        n_theta: g.n_theta(),
        n_z: g.n_z(),
        period_l: g.period_l(),
        fields: fields.len(),
        times: times.to_vec(),
    })
}

/// Write stacked fields (one container each) plus the sidecar.
pub fn write_series(path: &Path, fields: &[SpectralField], times: &[f64]) -> Result<()> {
    if !times.is_empty() && times.len() != fields.len() {
        return Err(Error::SizeMismatch {
            expected: fields.len(),
            found: times.len(),
        });
    }
    let side = sidecar_for(fields, times)?;
    let mut file = fs::File::create(path)?;
    for f in fields {
        file.write_all(&encode(f))?;
    }
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

pub fn write_field(path: &Path, field: &SpectralField) -> Result<()> {
    write_series(path, std::slice::from_ref(field), &[])
}

/// Read every container in a file; the sidecar, when present, must agree with the headers.
pub fn read_series(path: &Path) -> Result<(Vec<SpectralField>, Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut fields = Vec::new();
    let mut at = 0;
    let mut grid: Option<Arc<SpectralGrid>> = None;
    while at < bytes.len() {
        let (f, used) = decode(&bytes[at..], grid.as_ref()).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        grid.get_or_insert_with(|| Arc::clone(f.grid()));
        fields.push(f);
        at += used;
    }
    if fields.is_empty() {
        return Err(Error::Format(format!("{}: empty file", path.display())));
    }
    let side_path = sidecar_path(path);
    let mut times = Vec::new();
    if side_path.exists() {
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(&side_path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", side_path.display())))?;
        let expect = sidecar_for(&fields, &side.times)?;
        if side != expect {
            return Err(Error::Format(format!("{} disagrees with the container header", side_path.display())));
        }
        times = side.times;
    }
    Ok((fields, times))
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    let (mut fields, _) = read_series(path)?;
    if fields.len() != 1 {
        return Err(Error::Format(format!("{}: expected one field, found {}", path.display(), fields.len())));
    }
    Ok(fields.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_field, random_tensor, BandLimit};

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(SpectralGrid::new(6, 4, 6, 3.5).unwrap());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 1, 0);
        let path = dir.path().join("u.bin");
        write_field(&path, &f).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.kind(), f.kind());
        assert!(back.coeffs().iter().zip(f.coeffs()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!((side.n_r, side.n_theta, side.n_z, side.components), (6, 4, 6, 3));
    }

    #[test]
    fn series_with_times_and_tensors() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(SpectralGrid::new(5, 4, 4, 1.0).unwrap());
        let fields: Vec<_> = (0..3).map(|i| random_tensor(&g, BandLimit::smooth(&g), 2, i)).collect();
        let path = dir.path().join("t.bin");
        write_series(&path, &fields, &[0.0, 0.5, 1.0]).unwrap();
        let (back, times) = read_series(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(times, vec![0.0, 0.5, 1.0]);
        assert_eq!(back[2].coeffs(), fields[2].coeffs());
    }

    #[test]
    fn corrupted_files_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(SpectralGrid::new(5, 4, 4, 1.0).unwrap());
        let f = random_field(FieldKind::Scalar, &g, BandLimit::smooth(&g), 1, 0);
        let path = dir.path().join("s.bin");
        write_field(&path, &f).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_field(&path).unwrap_err().to_string();
        assert!(err.contains("s.bin"), "{err}");
        fs::write(&path, b"garbage").unwrap();
        assert!(read_field(&path).is_err());
    }
}
