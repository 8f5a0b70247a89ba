//! Raw little-endian binary blocks for lattice fields, grid solutions and path ensembles.
//!
//! Lattice block: magic `FBLBLK01`, u32 rank, then rank × u64 shape, rank × f64 origin,
//! rank × f64 spacing, then the f64 values in row-major order (last axis fastest).
//!
//! Ensemble block: magic `FBLENS01`, u64 N, u64 steps, u64 d, f64 h_t, u64 seed, then
//! N × (steps+1) × d positions in row-major order.

use crate::error::{LabError, Result};
use std::io::{Read, Write};

const BLOCK_MAGIC: &[u8; 8] = b"FBLBLK01";
const ENSEMBLE_MAGIC: &[u8; 8] = b"FBLENS01";

/// A row-major array with per-axis origin and spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub data: Vec<f64>,
}

impl Block {
    /// Node-major lattice data (axis 0 fastest, `ncomp` values per node) as a row-major block
    /// with axes (x_{d-1}, …, x_0, component).
    pub fn from_lattice(lat: &crate::mollify::Lattice, ncomp: usize, data: Vec<f64>) -> Self {
        let d = lat.dim;
        let mut shape = vec![lat.cells; d];
        let mut origin = vec![lat.node(0); d];
        let mut spacing = vec![lat.h; d];
        shape.push(ncomp);
        origin.push(0.0);
        spacing.push(1.0);
        Self {
            shape,
            origin,
            spacing,
            data,
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if n != self.data.len() || self.origin.len() != self.shape.len() || self.spacing.len() != self.shape.len() {
            return Err(LabError::InvalidParameter("block header does not match data".into()));
        }
        w.write_all(BLOCK_MAGIC)?;
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for s in &self.shape {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        for v in self.origin.iter().chain(&self.spacing) {
            w.write_all(&v.to_le_bytes())?;
        }
        write_f64s(w, &self.data)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        expect_magic(r, BLOCK_MAGIC)?;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let rank = u32::from_le_bytes(b4) as usize;
        let shape: Vec<usize> = (0..rank).map(|_| read_u64(r).map(|v| v as usize)).collect::<Result<_>>()?;
        let origin = (0..rank).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let spacing = (0..rank).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            shape,
            origin,
            spacing,
            data,
        })
    }
}

/// Header of an ensemble block.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleHeader {
    pub n_paths: usize,
    pub steps: usize,
    pub dim: usize,
    pub h_t: f64,
    pub seed: u64,
}

pub fn write_ensemble(w: &mut impl Write, h: &EnsembleHeader, data: &[f64]) -> Result<()> {
    if data.len() != h.n_paths * (h.steps + 1) * h.dim {
        return Err(LabError::InvalidParameter("ensemble header does not match data".into()));
    }
    w.write_all(ENSEMBLE_MAGIC)?;
    for v in [h.n_paths as u64, h.steps as u64, h.dim as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&h.h_t.to_le_bytes())?;
    w.write_all(&h.seed.to_le_bytes())?;
    write_f64s(w, data)
}

pub fn read_ensemble(r: &mut impl Read) -> Result<(EnsembleHeader, Vec<f64>)> {
    expect_magic(r, ENSEMBLE_MAGIC)?;
    let n_paths = read_u64(r)? as usize;
    let steps = read_u64(r)? as usize;
    let dim = read_u64(r)? as usize;
    let h_t = read_f64(r)?;
    let seed = read_u64(r)?;
    let n = n_paths * (steps + 1) * dim;
    let data = (0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    Ok((
        EnsembleHeader {
            n_paths,
            steps,
            dim,
            h_t,
            seed,
        },
        data,
    ))
}

fn write_f64s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in data.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(LabError::Io(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
