//! On-disk field format: little-endian `f64` samples in row-major order,
//! components stored back to back, described by a JSON sidecar.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fields::{Field, Grid};

/// Sidecar of a `.bin` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub k: usize,
    pub t: f64,
    pub s: f64,
    /// `physical` for `(u, p)` snapshots, `scaled` for decompositions.
    pub kind: String,
    pub components: Vec<String>,
    /// Stage-specific scalars.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub extra: Value,
}

impl Sidecar {
    pub fn grid(&self) -> io::Result<Grid> {
        Grid::new(self.n, self.half_width, self.points)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn bin_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("{k}.bin"))
}

pub fn sidecar_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("{k}.json"))
}

/// Stores `fields` (all on one grid) as `<k>.bin` plus `<k>.json`.
pub fn write_fields(dir: &Path, meta: &Sidecar, fields: &[&Field]) -> io::Result<()> {
    if fields.len() != meta.components.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "component list does not match the fields",
        ));
    }
    let mut bytes = Vec::with_capacity(fields.iter().map(|f| f.data.len() * 8).sum());
    for f in fields {
        for v in &f.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(&bin_path(dir, meta.k), &bytes)?;
    let side = serde_json::to_vec_pretty(meta).map_err(io::Error::other)?;
    write_atomic(&sidecar_path(dir, meta.k), &side)
}

/// Reads `<k>.bin` and `<k>.json`, returning the sidecar and one field per
/// component.
pub fn read_fields(dir: &Path, k: usize) -> io::Result<(Sidecar, Vec<Field>)> {
    let meta: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(dir, k))?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let grid = meta.grid()?;
    let bytes = fs::read(bin_path(dir, k))?;
    let len = grid.len();
    if bytes.len() != 8 * len * meta.components.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{}: unexpected size {}", bin_path(dir, k).display(), bytes.len()),
        ));
    }
    let fields = bytes
        .chunks_exact(8 * len)
        .map(|chunk| Field {
            grid,
            data: chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect(),
        })
        .collect();
    Ok((meta, fields))
}

/// Indices `k` with a `<k>.json` sidecar in `dir`, ascending.
pub fn list_indices(dir: &Path) -> io::Result<Vec<usize>> {
    let mut ks: Vec<usize> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_suffix(".json")?.parse().ok()
        })
        .collect();
    ks.sort_unstable();
    Ok(ks)
}
