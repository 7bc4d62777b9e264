//! Flat binary trajectory files.
//!
//! Layout: the magic bytes `SPDE`, a `u32` format version, a `u32` rank,
//! `rank` dimensions as `u64`, then the values as `f64`, row-major, all
//! little-endian. Trajectory dumps use rank 3: (trajectory, time, cell).

use crate::error::{invalid, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"SPDE";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn write_array<W: Write>(mut w: W, dims: &[usize], values: &[f64]) -> Result<()> {
    if dims.iter().product::<usize>() != values.len() {
        return invalid(format!("dims {dims:?} do not match {} values", values.len()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_array<R: Read>(mut r: R) -> Result<Array> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return invalid("not an SPDE trajectory file");
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return invalid(format!("unsupported trajectory format version {version}"));
    }
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4) as usize;
    let mut dims = Vec::with_capacity(rank);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let len: usize = dims.iter().product();
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Array { dims, values })
}
