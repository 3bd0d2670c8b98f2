//! Snapshot datasets and the `SWSNAP1` file format.
//!
//! Layout (little-endian): magic `SWSNAP1`; `u32 N_s`, `u32 N_t`, `f64 Δt`
//! (hours), `f64 r`, `u8` variable count, `u8` scenario code; per variable an
//! 8-byte zero-padded name tag followed by `N_s·N_t` f64 values in
//! column-major order; then the boundary series, each as `u32` length plus
//! values, in scenario order (tidal: elevation; riverine: discharge, stage).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::io::{
    expect_magic, read_f64, read_f64_block, read_f64s, read_u32, read_u8, write_f64,
    write_f64_block, write_magic, write_u32, write_u8,
};
use crate::numkit::Matrix;

pub const SNAPSHOT_MAGIC: &[u8; 7] = b"SWSNAP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Tidal,
    Riverine,
}

impl ScenarioKind {
    pub fn code(self) -> u8 {
        match self {
            ScenarioKind::Tidal => 0,
            ScenarioKind::Riverine => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ScenarioKind::Tidal),
            1 => Some(ScenarioKind::Riverine),
            _ => None,
        }
    }

    /// Number of boundary series the scenario carries.
    pub fn bc_count(self) -> usize {
        match self {
            ScenarioKind::Tidal => 1,
            ScenarioKind::Riverine => 2,
        }
    }

    pub fn bc_names(self) -> &'static [&'static str] {
        match self {
            ScenarioKind::Tidal => &["elevation"],
            ScenarioKind::Riverine => &["discharge", "stage"],
        }
    }
}

/// Field matrices (`N_s × N_t`) per state variable with their forcing series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSet {
    pub scenario: ScenarioKind,
    pub dt_hours: f64,
    pub r: f64,
    pub variables: Vec<(String, Matrix)>,
    /// Boundary series sampled at the output times, one per scenario boundary.
    pub bc_series: Vec<Vec<f64>>,
}

impl SnapshotSet {
    pub fn validate(&self) -> Result<()> {
        let Some((_, first)) = self.variables.first() else {
            return Err(Error::shape("snapshot set has no variables"));
        };
        let (n_s, n_t) = (first.rows(), first.cols());
        for (name, m) in &self.variables {
            if m.rows() != n_s || m.cols() != n_t {
                return Err(Error::shape(format!(
                    "variable {name} is {}x{}, expected {n_s}x{n_t}",
                    m.rows(),
                    m.cols()
                )));
            }
            if name.is_empty() || name.len() > 8 || !name.is_ascii() {
                return Err(Error::shape(format!("variable name `{name}` must be 1-8 ASCII bytes")));
            }
        }
        if !(self.r > 0.0) {
            return Err(Error::argument(format!("bottom friction r = {} must be > 0", self.r)));
        }
        if self.bc_series.len() != self.scenario.bc_count() {
            return Err(Error::shape(format!(
                "{:?} scenario needs {} boundary series, got {}",
                self.scenario,
                self.scenario.bc_count(),
                self.bc_series.len()
            )));
        }
        for s in &self.bc_series {
            if s.len() != n_t {
                return Err(Error::shape("boundary series length differs from N_t"));
            }
        }
        Ok(())
    }

    pub fn n_s(&self) -> usize {
        self.variables.first().map_or(0, |(_, m)| m.rows())
    }

    pub fn n_t(&self) -> usize {
        self.variables.first().map_or(0, |(_, m)| m.cols())
    }

    pub fn variable(&self, name: &str) -> Option<&Matrix> {
        self.variables.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.variables.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Columns of `name` in `[start, end)`.
    pub fn columns(&self, name: &str, start: usize, end: usize) -> Result<Vec<Vec<f64>>> {
        let m = self
            .variable(name)
            .ok_or_else(|| Error::argument(format!("no variable named `{name}`")))?;
        if start > end || end > m.cols() {
            return Err(Error::argument(format!(
                "column range {start}..{end} outside 0..{}",
                m.cols()
            )));
        }
        Ok((start..end).map(|j| m.column(j)).collect())
    }

    /// Column index of the output closest to `hours` after the first column.
    pub fn index_at_hours(&self, hours: f64) -> usize {
        (hours / self.dt_hours).round().max(0.0) as usize
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        write_magic(w, SNAPSHOT_MAGIC)?;
        write_u32(w, self.n_s())?;
        write_u32(w, self.n_t())?;
        write_f64(w, self.dt_hours)?;
        write_f64(w, self.r)?;
        write_u8(w, self.variables.len() as u8)?;
        write_u8(w, self.scenario.code())?;
        for (name, m) in &self.variables {
            let mut tag = [0u8; 8];
            tag[..name.len()].copy_from_slice(name.as_bytes());
            w.write_all(&tag).map_err(crate::numkit::io::map_write)?;
            for j in 0..m.cols() {
                for i in 0..m.rows() {
                    write_f64(w, m.get(i, j))?;
                }
            }
        }
        for s in &self.bc_series {
            write_f64_block(w, s)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, SNAPSHOT_MAGIC)?;
        let n_s = read_u32(r)?;
        let n_t = read_u32(r)?;
        let dt_hours = read_f64(r)?;
        let fric = read_f64(r)?;
        let n_vars = read_u8(r)? as usize;
        let code = read_u8(r)?;
        let scenario = ScenarioKind::from_code(code)
            .ok_or_else(|| Error::format(format!("unknown scenario code {code}")))?;
        if n_vars == 0 || n_s == 0 || n_t == 0 {
            return Err(Error::format("empty snapshot header"));
        }
        let mut variables = Vec::with_capacity(n_vars);
        for v in 0..n_vars {
            let mut tag = [0u8; 8];
            r.read_exact(&mut tag).map_err(crate::numkit::io::map_read)?;
            let name = parse_tag(&tag)
                .ok_or_else(|| Error::format(format!("variable {v} has a corrupt name tag")))?;
            let col_major = read_f64s(r, n_s * n_t)?;
            let mut m = Matrix::zeros(n_s, n_t);
            for j in 0..n_t {
                for i in 0..n_s {
                    let val = col_major[j * n_s + i];
                    if !val.is_finite() {
                        return Err(Error::format(format!("non-finite value in variable {name}")));
                    }
                    m.set(i, j, val);
                }
            }
            variables.push((name, m));
        }
        let mut bc_series = Vec::with_capacity(scenario.bc_count());
        for _ in 0..scenario.bc_count() {
            let s = read_f64_block(r)?;
            if s.len() != n_t {
                return Err(Error::format(format!(
                    "boundary series has {} samples, header says N_t = {n_t}",
                    s.len()
                )));
            }
            bc_series.push(s);
        }
        let set = Self {
            scenario,
            dt_hours,
            r: fric,
            variables,
            bc_series,
        };
        set.validate().map_err(|e| Error::format(e.to_string()))?;
        Ok(set)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let set = Self::read(&mut cur)?;
        if !cur.is_empty() {
            return Err(Error::format(format!(
                "{} trailing bytes after snapshot data",
                cur.len()
            )));
        }
        Ok(set)
    }
}

fn parse_tag(tag: &[u8; 8]) -> Option<String> {
    let end = tag.iter().position(|&b| b == 0).unwrap_or(8);
    if end == 0 || tag[end..].iter().any(|&b| b != 0) {
        return None;
    }
    let name = &tag[..end];
    if !name.iter().all(|b| b.is_ascii_alphanumeric() || *b == b'_') {
        return None;
    }
    String::from_utf8(name.to_vec()).ok()
}

pub fn save_snapshots(set: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = set.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_snapshots(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    SnapshotSet::from_bytes(&bytes)
}
