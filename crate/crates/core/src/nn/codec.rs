//! Binary layout for [`ParamVector`]:
//!
//! ```text
//! magic  b"PVEC"
//! u32    layer count L
//! L x { u32 inputs, u32 outputs, u8 has_bias }
//! u32    id length, then UTF-8 id bytes
//! u64    value count
//! f64... values
//! ```
//!
//! A round checkpoint bundles several vectors:
//!
//! ```text
//! magic  b"FSCK"
//! u64    round index
//! u32    entry count E
//! E x { u8 flags (bit 0: submitted by an attacker), PVEC record }
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use super::params::{LayerShape, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PVEC";

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_param_vector<W: Write>(w: &mut W, p: &ParamVector) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&(p.shapes().len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for s in p.shapes() {
        w.write_all(&(s.inputs as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(s.outputs as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&[s.has_bias as u8]).map_err(io_err)?;
    }
    let id = p.id().as_bytes();
    w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(id).map_err(io_err)?;
    w.write_all(&(p.len() as u64).to_le_bytes()).map_err(io_err)?;
    for v in p.values() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_param_vector<R: Read>(r: &mut R) -> Result<ParamVector> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format("missing PVEC header".into()));
    }
    let n_layers = read_u32(r)? as usize;
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let inputs = read_u32(r)? as usize;
        let outputs = read_u32(r)? as usize;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag).map_err(io_err)?;
        shapes.push(LayerShape {
            inputs,
            outputs,
            has_bias: flag[0] != 0,
        });
    }
    let id_len = read_u32(r)? as usize;
    let mut id = vec![0u8; id_len];
    r.read_exact(&mut id).map_err(io_err)?;
    let id = String::from_utf8(id).map_err(|e| Error::Format(e.to_string()))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io_err)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8).map_err(io_err)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok(ParamVector::from_values(&shapes, values)?.with_id(id))
}

pub fn to_bytes(p: &ParamVector) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + p.len() * 8);
    write_param_vector(&mut buf, p).expect("writing to a Vec cannot fail");
    buf
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<ParamVector> {
    read_param_vector(&mut bytes)
}

const ROUND_MAGIC: &[u8; 4] = b"FSCK";

/// One vector of a round checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub params: ParamVector,
    pub malicious: bool,
}

pub fn write_round<W: Write>(w: &mut W, round: u64, entries: &[CheckpointEntry]) -> Result<()> {
    w.write_all(ROUND_MAGIC).map_err(io_err)?;
    w.write_all(&round.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(entries.len() as u32).to_le_bytes()).map_err(io_err)?;
    for e in entries {
        w.write_all(&[e.malicious as u8]).map_err(io_err)?;
        write_param_vector(w, &e.params)?;
    }
    Ok(())
}

pub fn read_round<R: Read>(r: &mut R) -> Result<(u64, Vec<CheckpointEntry>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != ROUND_MAGIC {
        return Err(Error::Format("missing FSCK header".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io_err)?;
    let round = u64::from_le_bytes(b8);
    let n = read_u32(r)? as usize;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag).map_err(io_err)?;
        entries.push(CheckpointEntry {
            malicious: flag[0] & 1 != 0,
            params: read_param_vector(r)?,
        });
    }
    Ok((round, entries))
}
