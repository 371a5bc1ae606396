//! Binary wavefunction checkpoints (`PLWF`) and real density grids (`PLRD`).
//!
//! Layout: 4 magic bytes, u32 version, one u64 per dimension
//! (`n_elec, n_x, n_phi[, n_phi]`), the values as little-endian f64
//! (interleaved re/im for `PLWF`), then an f64 timestamp in a.u.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{GridSpec, Wavefunction};
use crate::error::{Error, Result};

pub const WAVEFUNCTION_MAGIC: &[u8; 4] = b"PLWF";
pub const DENSITY_MAGIC: &[u8; 4] = b"PLRD";
pub const VERSION: u32 = 1;

fn dims_of(spec: &GridSpec, n_elec: usize) -> Vec<u64> {
    let mut d = vec![n_elec as u64, spec.n_x as u64];
    d.extend(std::iter::repeat(spec.n_phi as u64).take(spec.n_molecules));
    d
}

fn write_container(path: &Path, magic: &[u8; 4], dims: &[u64], values: impl Iterator<Item = f64>, time: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(magic)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&time.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

fn bad(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), line: 0, msg: msg.into() }
}

/// Returns `(dims, values, time)`.
fn read_container(path: &Path, magic: &[u8; 4]) -> Result<(Vec<u64>, Vec<f64>, f64)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != magic {
        return Err(bad(path, format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(path, format!("unsupported version {version}")));
    }
    let words: Vec<[u8; 8]> = bytes[8..].chunks_exact(8).map(|c| c.try_into().unwrap()).collect();
    if (bytes.len() - 8) % 8 != 0 || words.len() < 4 {
        return Err(bad(path, "truncated file"));
    }
    let n_elec = u64::from_le_bytes(words[0]);
    let rank = match n_elec {
        2 => 3,
        4 => 4,
        other => return Err(bad(path, format!("unsupported electronic dimension {other}"))),
    };
    let dims: Vec<u64> = words[..rank].iter().map(|w| u64::from_le_bytes(*w)).collect();
    let values: Vec<f64> = words[rank..words.len() - 1].iter().map(|w| f64::from_le_bytes(*w)).collect();
    let time = f64::from_le_bytes(words[words.len() - 1]);
    Ok((dims, values, time))
}

fn spec_from_dims(path: &Path, dims: &[u64], x_half_width: f64) -> Result<GridSpec> {
    let spec = GridSpec {
        n_phi: dims[2] as usize,
        n_x: dims[1] as usize,
        x_half_width,
        n_molecules: dims.len() - 2,
    };
    if dims.len() == 4 && dims[3] != dims[2] {
        return Err(bad(path, "unequal angular dimensions"));
    }
    Ok(spec)
}

pub fn write_checkpoint(path: impl AsRef<Path>, psi: &Wavefunction, time: f64) -> Result<()> {
    let values = psi.data.iter().flat_map(|z| [z.re, z.im]);
    write_container(path.as_ref(), WAVEFUNCTION_MAGIC, &dims_of(&psi.spec, psi.n_elec), values, time)
}

/// Reads a checkpoint; the x box width is not stored and must be supplied.
pub fn read_checkpoint(path: impl AsRef<Path>, x_half_width: f64) -> Result<(Wavefunction, f64)> {
    let path = path.as_ref();
    let (dims, values, time) = read_container(path, WAVEFUNCTION_MAGIC)?;
    let spec = spec_from_dims(path, &dims, x_half_width)?;
    if values.len() != 2 * spec.len() {
        return Err(bad(path, format!("expected {} values, found {}", 2 * spec.len(), values.len())));
    }
    let data = values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok((Wavefunction::from_data(spec, data)?, time))
}

/// Writes real per-component densities laid out like a wavefunction.
pub fn write_density(path: impl AsRef<Path>, spec: &GridSpec, n_elec: usize, values: &[f64], time: f64) -> Result<()> {
    if values.len() != n_elec * spec.block_len() {
        return Err(Error::Shape(format!("density of length {} for {} components", values.len(), n_elec)));
    }
    write_container(path.as_ref(), DENSITY_MAGIC, &dims_of(spec, n_elec), values.iter().copied(), time)
}

pub fn read_density(path: impl AsRef<Path>) -> Result<(Vec<u64>, Vec<f64>, f64)> {
    read_container(path.as_ref(), DENSITY_MAGIC)
}
