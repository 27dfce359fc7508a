//! Field snapshot files.
//!
//! Binary layout, all little-endian:
//!
//! | offset | type      | content                          |
//! |--------|-----------|----------------------------------|
//! | 0      | [u8; 8]   | magic `DCFIELD1`                 |
//! | 8      | u32       | format version (1)               |
//! | 12     | u32       | points per axis n                |
//! | 16     | f64       | box length L                     |
//! | 24     | f64       | time                             |
//! | 32     | f64 × 3   | m, ħ, c                          |
//! | 56     | f64 × 8n³ | (re, im) per component per point |
//!
//! Points run x-major with z fastest; the four components of a point are
//! contiguous.

use super::{Grid3, SolverError, SpinorField};
use crate::PhysicalParams;
use num_complex::Complex64 as C64;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"DCFIELD1";
const HEADER: usize = 56;

pub fn write_field_bytes(f: &SpinorField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 64 * f.grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(f.grid.n as u32).to_le_bytes());
    for v in [f.grid.l, f.time, f.params.m, f.params.hbar, f.params.c] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for p in 0..f.grid.len() {
        for a in 0..4 {
            out.extend_from_slice(&f.psi[a][p].re.to_le_bytes());
            out.extend_from_slice(&f.psi[a][p].im.to_le_bytes());
        }
    }
    out
}

fn fmt_err(offset: usize, message: impl Into<String>) -> SolverError {
    SolverError::FileFormat {
        offset,
        message: message.into(),
    }
}

fn take<const N: usize>(b: &[u8], off: usize) -> Result<[u8; N], SolverError> {
    b.get(off..off + N)
        .map(|s| s.try_into().unwrap())
        .ok_or_else(|| fmt_err(off, format!("unexpected end of data, needed {N} bytes")))
}

pub fn read_field_bytes(b: &[u8]) -> Result<SpinorField, SolverError> {
    if take::<8>(b, 0)? != *MAGIC {
        return Err(fmt_err(0, "bad magic"));
    }
    let version = u32::from_le_bytes(take(b, 8)?);
    if version != 1 {
        return Err(fmt_err(8, format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(take(b, 12)?) as usize;
    if n < 2 {
        return Err(fmt_err(12, format!("grid size {n} too small")));
    }
    let f64_at = |off: usize| -> Result<f64, SolverError> { Ok(f64::from_le_bytes(take(b, off)?)) };
    let l = f64_at(16)?;
    let time = f64_at(24)?;
    let params =
        PhysicalParams::new(f64_at(32)?, f64_at(40)?, f64_at(48)?).map_err(|e| fmt_err(32, e))?;
    if !(l > 0.0) {
        return Err(fmt_err(16, "box length must be positive"));
    }
    let grid = Grid3::new(n, l);
    let expect = HEADER + 64 * grid.len();
    if b.len() != expect {
        return Err(fmt_err(
            b.len().min(expect),
            format!("payload length {} differs from expected {expect}", b.len()),
        ));
    }
    let mut f = SpinorField::zeros(grid, params);
    f.time = time;
    let mut off = HEADER;
    for p in 0..grid.len() {
        for a in 0..4 {
            f.psi[a][p] = C64::new(f64_at(off)?, f64_at(off + 8)?);
            off += 16;
        }
    }
    Ok(f)
}

pub fn write_field(path: &Path, f: &SpinorField) -> Result<(), SolverError> {
    std::fs::write(path, write_field_bytes(f))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SpinorField, SolverError> {
    read_field_bytes(&std::fs::read(path)?)
}

/// One row per point: indices, coordinates, then (re, im) of each component.
pub fn write_field_csv(path: &Path, f: &SpinorField) -> Result<(), SolverError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "ix,iy,iz,x,y,z,re1,im1,re2,im2,re3,im3,re4,im4")?;
    for p in 0..f.grid.len() {
        let [i, j, k] = f.grid.unindex(p);
        let x = f.grid.point(p);
        write!(w, "{i},{j},{k},{:e},{:e},{:e}", x[0], x[1], x[2])?;
        for a in 0..4 {
            write!(w, ",{:e},{:e}", f.psi[a][p].re, f.psi[a][p].im)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_solver::GaussianPacket;

    #[test]
    fn roundtrip_is_lossless() {
        let (f, _) =
            GaussianPacket::default().field(Grid3::new(4, 20.0), PhysicalParams::default());
        let b = write_field_bytes(&f);
        let g = read_field_bytes(&b).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn truncated_reports_offset() {
        let (f, _) =
            GaussianPacket::default().field(Grid3::new(4, 20.0), PhysicalParams::default());
        let b = write_field_bytes(&f);
        match read_field_bytes(&b[..100]) {
            Err(SolverError::FileFormat { offset, .. }) => assert_eq!(offset, 100),
            other => panic!("{other:?}"),
        }
        match read_field_bytes(b"NOTMAGIC") {
            Err(SolverError::FileFormat { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }
}
