//! Little-endian binary helpers and the `MLPW1` network block.
//!
//! Layout of one block: magic `MLPW1`, `u32` layer count, then per layer
//! `u32 rows`, `u32 cols`, `u8` activation code, `rows*cols` f64 weights
//! (row-major) and `rows` f64 biases.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Activation, Dense, Matrix, Mlp};
use crate::error::{Error, Result};

pub const MLP_MAGIC: &[u8; 5] = b"MLPW1";

/// Upper bound on any single length field, to reject corrupt headers before allocating.
const MAX_LEN: usize = 1 << 28;

pub(crate) fn map_read(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::format("unexpected end of data (truncated file)")
    } else {
        Error::format(format!("read failed: {e}"))
    }
}

pub(crate) fn map_write(e: std::io::Error) -> Error {
    Error::format(format!("write failed: {e}"))
}

pub fn write_magic<W: Write>(w: &mut W, magic: &[u8]) -> Result<()> {
    w.write_all(magic).map_err(map_write)
}

pub fn expect_magic<R: Read>(r: &mut R, magic: &[u8]) -> Result<()> {
    let mut buf = vec![0u8; magic.len()];
    r.read_exact(&mut buf).map_err(map_read)?;
    if buf != magic {
        return Err(Error::format(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

pub fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_u8(v).map_err(map_write)
}

pub fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    r.read_u8().map_err(map_read)
}

pub fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::format(format!("{v} does not fit in u32")))?;
    w.write_u32::<LittleEndian>(v).map_err(map_write)
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let v = r.read_u32::<LittleEndian>().map_err(map_read)? as usize;
    if v > MAX_LEN {
        return Err(Error::format(format!("length field {v} is implausibly large")));
    }
    Ok(v)
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_f64::<LittleEndian>(v).map_err(map_write)
}

pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    r.read_f64::<LittleEndian>().map_err(map_read)
}

pub fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    vs.iter().try_for_each(|&v| write_f64(w, v))
}

pub fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

/// `u32` length followed by the values.
pub fn write_f64_block<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    write_u32(w, vs.len())?;
    write_f64s(w, vs)
}

pub fn read_f64_block<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_u32(r)?;
    read_f64s(r, n)
}

pub fn write_mlp<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    write_magic(w, MLP_MAGIC)?;
    write_u32(w, net.depth())?;
    for layer in net.layers() {
        write_u32(w, layer.output_dim())?;
        write_u32(w, layer.input_dim())?;
        write_u8(w, layer.activation.code())?;
        write_f64s(w, layer.weights.as_slice())?;
        write_f64s(w, &layer.bias)?;
    }
    Ok(())
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    expect_magic(r, MLP_MAGIC)?;
    let depth = read_u32(r)?;
    if depth == 0 {
        return Err(Error::format("network block with zero layers"));
    }
    let mut layers = Vec::with_capacity(depth.min(64));
    for l in 0..depth {
        let rows = read_u32(r)?;
        let cols = read_u32(r)?;
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) > MAX_LEN {
            return Err(Error::format(format!("layer {l} has shape {rows}x{cols}")));
        }
        let code = read_u8(r)?;
        let activation = Activation::from_code(code)
            .ok_or_else(|| Error::format(format!("unknown activation code {code}")))?;
        let weights = Matrix::from_vec(rows, cols, read_f64s(r, rows * cols)?)
            .map_err(|e| Error::format(format!("layer {l}: {e}")))?;
        let bias = read_f64s(r, rows)?;
        layers.push(Dense::new(weights, bias, activation)?);
    }
    Mlp::new(layers).map_err(|e| Error::format(format!("inconsistent network block: {e}")))
}

pub fn mlp_to_bytes(net: &Mlp) -> Vec<u8> {
    let mut buf = Vec::new();
    write_mlp(&mut buf, net).expect("writing to a Vec cannot fail");
    buf
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<Mlp> {
    let mut cur = bytes;
    let net = read_mlp(&mut cur)?;
    if !cur.is_empty() {
        return Err(Error::format(format!("{} trailing bytes", cur.len())));
    }
    Ok(net)
}
