//! Files written by a run: the diagnostics CSV, binary field snapshots with
//! a JSON sidecar, and a run manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{CmmError, Result};

pub const CSV_HEADER: &str = "t,mass,momentum,e_kin,e_pot,e_tot,e_det,n_submaps,wall_s";

/// Writes the series as CSV. With `timing` off the wall-clock column is
/// written as zero so that repeated runs produce identical files.
pub fn write_timeseries(records: &[DiagnosticsRecord], path: &Path, timing: bool) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CmmError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = String::with_capacity(64 * (records.len() + 1));
    body.push_str(CSV_HEADER);
    body.push('\n');
    for r in records {
        let wall = if timing { r.wall_s } else { 0.0 };
        body.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{:?}\n",
            r.t, r.mass, r.momentum, r.e_kin, r.e_pot, r.e_tot, r.e_det, r.n_submaps, wall
        ));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CmmError::io(path, e))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| CmmError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(CmmError::Parse {
                line: 1,
                msg: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| CmmError::Parse { line: idx + 1, msg };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(bad(format!("expected 9 columns, got {}", cols.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cols[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("invalid number '{}'", cols[k])))
        };
        out.push(DiagnosticsRecord {
            t: num(0)?,
            mass: num(1)?,
            momentum: num(2)?,
            e_kin: num(3)?,
            e_pot: num(4)?,
            e_tot: num(5)?,
            e_det: num(6)?,
            n_submaps: cols[7]
                .trim()
                .parse()
                .map_err(|_| bad(format!("invalid count '{}'", cols[7])))?,
            wall_s: num(8)?,
        });
    }
    Ok(out)
}

/// Sidecar describing a binary snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub nx: usize,
    pub nv: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Lv")]
    pub lv: f64,
    pub t: f64,
    pub field_name: String,
    pub byte_order: String,
}

impl SnapshotMeta {
    pub fn new(nx: usize, nv: usize, lx: f64, lv: f64, t: f64, field_name: &str) -> Self {
        SnapshotMeta {
            nx,
            nv,
            lx,
            lv,
            t,
            field_name: field_name.to_string(),
            byte_order: "little".to_string(),
        }
    }
}

/// Path of the sidecar belonging to a snapshot file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes `data` (row-major, `v` fastest) as little-endian `f64` plus its sidecar.
pub fn write_snapshot(data: &[f64], meta: &SnapshotMeta, path: &Path) -> Result<()> {
    if data.len() != meta.nx * meta.nv {
        return Err(CmmError::Config(format!(
            "snapshot has {} values, metadata says {} x {}",
            data.len(),
            meta.nx,
            meta.nv
        )));
    }
    let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| CmmError::io(path, e))?;
    let mp = meta_path(path);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&mp, json + "\n").map_err(|e| CmmError::io(mp, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, Vec<f64>)> {
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(|e| CmmError::io(&mp, e))?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|e| CmmError::Parse {
        line: e.line(),
        msg: format!("{}: {e}", mp.display()),
    })?;
    if meta.byte_order != "little" {
        return Err(CmmError::Config(format!("unsupported byte order '{}'", meta.byte_order)));
    }
    let bytes = fs::read(path).map_err(|e| CmmError::io(path, e))?;
    if bytes.len() != meta.nx * meta.nv * 8 {
        return Err(CmmError::Config(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            meta.nx * meta.nv * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((meta, data))
}

/// Record of one invocation: the configuration used and every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config: String) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: unix_now(),
            finished_unix: 0.0,
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, path: &Path) {
        self.files.push(path.display().to_string());
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(|e| CmmError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CmmError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CmmError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }
}
