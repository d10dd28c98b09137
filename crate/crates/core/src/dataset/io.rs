//! JSON-lines trajectory files.
//!
//! A file holds one or more blocks. Each block opens with a header object
//! `{"participant", "task", "rate_hz", "trial"}` followed by one object per
//! sample: `{"t", "head_pos", "head_dir", "lo", "ld", "ro", "rd", "valid"}`.
//! Floats are written in shortest round-trip form, so a write/read cycle is
//! exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GazeSample, Task, Trajectory};
use crate::error::DatasetError;
use crate::geometry::Vec3;

#[derive(Serialize, Deserialize)]
struct Header {
    participant: u32,
    task: Task,
    rate_hz: f64,
    #[serde(default)]
    trial: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    t: f64,
    head_pos: Vec3,
    head_dir: Vec3,
    lo: Vec3,
    ld: Vec3,
    ro: Vec3,
    rd: Vec3,
    valid: bool,
}

impl From<&GazeSample> for Row {
    fn from(s: &GazeSample) -> Self {
        Row {
            t: s.t,
            head_pos: s.head_pos,
            head_dir: s.head_dir,
            lo: s.left_origin,
            ld: s.left_dir,
            ro: s.right_origin,
            rd: s.right_dir,
            valid: s.valid,
        }
    }
}

impl From<Row> for GazeSample {
    fn from(r: Row) -> Self {
        GazeSample {
            t: r.t,
            head_pos: r.head_pos,
            head_dir: r.head_dir,
            left_origin: r.lo,
            left_dir: r.ld,
            right_origin: r.ro,
            right_dir: r.rd,
            valid: r.valid,
        }
    }
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> std::io::Result<()> {
    let header = Header {
        participant: traj.participant,
        task: traj.task,
        rate_hz: traj.rate_hz,
        trial: traj.trial,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for s in &traj.samples {
        serde_json::to_writer(&mut w, &Row::from(s))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_trajectory(&mut w, traj).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Parses every trajectory block from a reader. Blocks without samples are
/// dropped; invalid samples are kept with `valid = false`.
pub fn read_trajectories<R: BufRead>(reader: R) -> Result<Vec<Trajectory>, DatasetError> {
    let mut out: Vec<Trajectory> = Vec::new();
    let mut current: Option<Trajectory> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(parse_err)?;
        if value.get("participant").is_some() {
            let h: Header = serde_json::from_value(value).map_err(parse_err)?;
            if let Some(done) = current.take() {
                out.push(done);
            }
            current = Some(Trajectory {
                participant: h.participant,
                task: h.task,
                trial: h.trial,
                rate_hz: h.rate_hz,
                samples: Vec::new(),
            });
            continue;
        }
        let row: Row = serde_json::from_value(value).map_err(parse_err)?;
        let traj = current.as_mut().ok_or_else(|| DatasetError::Parse {
            line: line_no,
            message: "sample row before any header".into(),
        })?;
        if let Some(prev) = traj.samples.last() {
            if !(row.t > prev.t) {
                return Err(DatasetError::NonMonotonic {
                    line: line_no,
                    t: row.t,
                    prev: prev.t,
                });
            }
        }
        traj.samples.push(row.into());
    }
    out.extend(current);
    out.retain(|t| !t.samples.is_empty());
    Ok(out)
}

/// Loads trajectories from a file, or from every `*.jsonl` file in a
/// directory (sorted by file name).
pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>, DatasetError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DatasetError::Io { path: p, source }
    };
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        let file = File::open(&f).map_err(io_err(&f))?;
        let mut trajs = read_trajectories(BufReader::new(file)).map_err(|e| match e {
            DatasetError::Parse { line, message } => DatasetError::Parse {
                line,
                message: format!("{}: {message}", f.display()),
            },
            other => other,
        })?;
        out.append(&mut trajs);
    }
    Ok(out)
}
