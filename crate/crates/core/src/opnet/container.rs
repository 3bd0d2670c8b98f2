//! `MITO1` operator container.
//!
//! Layout (little-endian): magic `MITO1`; `u32 k`, `u32 q`, `u32 p`,
//! `u32 N_r`, `u32 τ`, `u8` variant tag, `u8` flags; `u32` network count and
//! that many `MLPW1` blocks in declared order; `u32` scaling-block count and
//! the blocks (each `u32` length plus f64 values); an auxiliary f64 block;
//! `b0` as an f64 block; `u8` projection flag, then `u32 rows`, `u32 cols` and
//! row-major values when set.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::OperatorScaling;
use crate::error::{Error, Result};
use crate::numkit::io::{
    expect_magic, read_f64_block, read_f64s, read_mlp, read_u32, read_u8, write_f64_block,
    write_f64s, write_magic, write_mlp, write_u32, write_u8,
};
use crate::numkit::{Matrix, Mlp};

pub const OPERATOR_MAGIC: &[u8; 5] = b"MITO1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    #[serde(rename = "MITONet")]
    Mitonet,
    #[serde(rename = "DON")]
    Don,
    #[serde(rename = "M-DON")]
    MDon,
    #[serde(rename = "L-DON")]
    LDon,
    #[serde(rename = "MIONet")]
    MioNet,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Don,
        Variant::MDon,
        Variant::LDon,
        Variant::MioNet,
        Variant::Mitonet,
    ];

    pub fn tag(self) -> u8 {
        match self {
            Variant::Mitonet => 0,
            Variant::Don => 1,
            Variant::MDon => 2,
            Variant::LDon => 3,
            Variant::MioNet => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mitonet => "MITONet",
            Variant::Don => "DON",
            Variant::MDon => "M-DON",
            Variant::LDon => "L-DON",
            Variant::MioNet => "MIONet",
        }
    }

    /// Whether the model works on autoencoder latents rather than node values.
    pub fn is_latent(self) -> bool {
        matches!(self, Variant::Mitonet | Variant::LDon)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|v| v.name().to_ascii_lowercase().replace('-', "") == norm)
            .ok_or_else(|| Error::config(format!("unknown model variant `{s}`")))
    }
}

/// Everything an operator model serializes, in declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorParts {
    pub variant: Variant,
    pub k: usize,
    pub q: usize,
    pub p: usize,
    pub n_r: usize,
    pub tau: usize,
    pub flags: u8,
    pub nets: Vec<Mlp>,
    pub scaling: OperatorScaling,
    pub aux: Vec<f64>,
    pub b0: Vec<f64>,
    pub projection: Option<Matrix>,
}

impl OperatorParts {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, OPERATOR_MAGIC)?;
        for v in [self.k, self.q, self.p, self.n_r, self.tau] {
            write_u32(w, v)?;
        }
        write_u8(w, self.variant.tag())?;
        write_u8(w, self.flags)?;
        write_u32(w, self.nets.len())?;
        for net in &self.nets {
            write_mlp(w, net)?;
        }
        let blocks = self.scaling.to_blocks();
        write_u32(w, blocks.len())?;
        for b in &blocks {
            write_f64_block(w, b)?;
        }
        write_f64_block(w, &self.aux)?;
        write_f64_block(w, &self.b0)?;
        match &self.projection {
            Some(p) => {
                write_u8(w, 1)?;
                write_u32(w, p.rows())?;
                write_u32(w, p.cols())?;
                write_f64s(w, p.as_slice())
            }
            None => write_u8(w, 0),
        }
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, OPERATOR_MAGIC)?;
        let k = read_u32(r)?;
        let q = read_u32(r)?;
        let p = read_u32(r)?;
        let n_r = read_u32(r)?;
        let tau = read_u32(r)?;
        let tag = read_u8(r)?;
        let variant =
            Variant::from_tag(tag).ok_or_else(|| Error::format(format!("unknown variant tag {tag}")))?;
        let flags = read_u8(r)?;
        let n_nets = read_u32(r)?;
        if n_nets > 64 {
            return Err(Error::format(format!("implausible network count {n_nets}")));
        }
        let nets = (0..n_nets).map(|_| read_mlp(r)).collect::<Result<Vec<_>>>()?;
        let n_blocks = read_u32(r)?;
        if n_blocks > 64 {
            return Err(Error::format(format!("implausible scaling block count {n_blocks}")));
        }
        let blocks = (0..n_blocks)
            .map(|_| read_f64_block(r))
            .collect::<Result<Vec<_>>>()?;
        let scaling =
            OperatorScaling::from_blocks(&blocks).map_err(|e| Error::format(e.to_string()))?;
        let aux = read_f64_block(r)?;
        let b0 = read_f64_block(r)?;
        let projection = match read_u8(r)? {
            0 => None,
            1 => {
                let rows = read_u32(r)?;
                let cols = read_u32(r)?;
                let data = read_f64s(r, rows * cols)?;
                Some(Matrix::from_vec(rows, cols, data).map_err(|e| Error::format(e.to_string()))?)
            }
            other => return Err(Error::format(format!("bad projection flag {other}"))),
        };
        Ok(Self {
            variant,
            k,
            q,
            p,
            n_r,
            tau,
            flags,
            nets,
            scaling,
            aux,
            b0,
            projection,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let parts = Self::read(&mut cur)?;
        if !cur.is_empty() {
            return Err(Error::format("trailing bytes after operator data"));
        }
        Ok(parts)
    }
}

/// Hex SHA-256 of a serialized artifact.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
