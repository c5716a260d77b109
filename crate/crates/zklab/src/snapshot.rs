//! Binary snapshot format.
//!
//! Layout: `ZKF1`, then little-endian `u32 nx`, `u32 ny`, `f64 Lx`, `f64 Ly`,
//! `f64 t`, then `nx * ny` `f64` values in storage order (x-major).

use std::fs;
use std::path::Path;

use crate::error::{Result, ZkError};
use crate::grid::{Grid2D, RealField};

pub const MAGIC: &[u8; 4] = b"ZKF1";
pub const HEADER_LEN: usize = 4 + 8 + 24;

pub fn encode_snapshot(field: &RealField, t: f64) -> Vec<u8> {
    let g = field.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny as u32).to_le_bytes());
    out.extend_from_slice(&g.lx.to_le_bytes());
    out.extend_from_slice(&g.ly.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("slice of length 8"))
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("slice of length 4"))
}

pub fn decode_header(bytes: &[u8]) -> Result<SnapshotHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(ZkError::Format(format!(
            "truncated header: {} bytes, need {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(ZkError::Format(format!(
            "bad magic {:?}, expected \"ZKF1\"",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    Ok(SnapshotHeader {
        nx: u32_at(bytes, 4) as usize,
        ny: u32_at(bytes, 8) as usize,
        lx: f64_at(bytes, 12),
        ly: f64_at(bytes, 20),
        t: f64_at(bytes, 28),
    })
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(RealField, f64)> {
    let h = decode_header(bytes)?;
    let grid = Grid2D::new(h.nx, h.ny, h.lx, h.ly)
        .map_err(|e| ZkError::Format(format!("invalid grid in header: {e}")))?;
    let want = HEADER_LEN + 8 * grid.len();
    if bytes.len() != want {
        return Err(ZkError::Format(format!(
            "payload is {} bytes, header implies {want}",
            bytes.len()
        )));
    }
    let values = (0..grid.len())
        .map(|k| f64_at(bytes, HEADER_LEN + 8 * k))
        .collect();
    // bypasses the finiteness check so that any stored bit pattern round-trips
    Ok((RealField { grid, values }, h.t))
}

pub fn write_snapshot(field: &RealField, t: f64, path: &Path) -> Result<()> {
    fs::write(path, encode_snapshot(field, t))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(RealField, f64)> {
    decode_snapshot(&fs::read(path)?)
}

pub fn read_header(path: &Path) -> Result<SnapshotHeader> {
    decode_header(&fs::read(path)?)
}
