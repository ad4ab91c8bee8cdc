//! Per-run reports: one row per frame plus summary statistics.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::read_key_values;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub t_sec: f64,
    pub gt_x: f64,
    pub gt_y: f64,
    pub gt_yaw: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_yaw: f64,
    pub error_m: f64,
    pub n_evaluated: usize,
    pub k_bins: usize,
    pub degenerate: bool,
    /// Odometry-only (dead-reckoning) position and its error.
    pub dr_x: f64,
    pub dr_y: f64,
    pub dr_error_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub conversion: String,
    pub frames: usize,
    pub mean_error_m: f64,
    pub mean_evaluations: f64,
    pub dr_mean_error_m: f64,
    pub degenerate_frames: usize,
}

impl RunSummary {
    pub fn from_rows(seed: u64, conversion: &str, rows: &[FrameRecord]) -> Self {
        let n = rows.len().max(1) as f64;
        RunSummary {
            seed,
            conversion: conversion.to_string(),
            frames: rows.len(),
            mean_error_m: rows.iter().map(|r| r.error_m).sum::<f64>() / n,
            mean_evaluations: rows.iter().map(|r| r.n_evaluated as f64).sum::<f64>() / n,
            dr_mean_error_m: rows.iter().map(|r| r.dr_error_m).sum::<f64>() / n,
            degenerate_frames: rows.iter().filter(|r| r.degenerate).count(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "conversion={}", self.conversion);
        let _ = writeln!(s, "frames={}", self.frames);
        let _ = writeln!(s, "mean_error_m={}", self.mean_error_m);
        let _ = writeln!(s, "mean_evaluations={}", self.mean_evaluations);
        let _ = writeln!(s, "dr_mean_error_m={}", self.dr_mean_error_m);
        let _ = writeln!(s, "degenerate_frames={}", self.degenerate_frames);
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = read_key_values(path)?;
        let get = |k: &str| {
            kv.get(k)
                .cloned()
                .ok_or_else(|| Error::format(path, format!("missing key '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(path, format!("key '{k}' is not a number")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(path, format!("key '{k}' is not an integer")))
        };
        Ok(RunSummary {
            seed: int("seed")?,
            conversion: get("conversion")?,
            frames: int("frames")? as usize,
            mean_error_m: num("mean_error_m")?,
            mean_evaluations: num("mean_evaluations")?,
            dr_mean_error_m: num("dr_mean_error_m")?,
            degenerate_frames: int("degenerate_frames")? as usize,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub conversion: String,
    pub rows: Vec<FrameRecord>,
}

impl RunReport {
    pub fn summary(&self) -> RunSummary {
        RunSummary::from_rows(self.seed, &self.conversion, &self.rows)
    }

    /// CSV with `# key=value` header lines carrying the seed and conversion.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "# seed={}", self.seed).map_err(|e| Error::io(path, e))?;
        writeln!(file, "# conversion={}", self.conversion).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in &self.rows {
            w.serialize(row).map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", l.trim_start_matches('#')))
            .collect();
        let kv = crate::dataset::parse_key_values(&header, path)?;
        let seed = kv
            .get("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "report header lacks a seed"))?;
        let conversion = kv.get("conversion").cloned().unwrap_or_default();
        let rows = crate::dataset::read_rows(path)?;
        Ok(RunReport {
            seed,
            conversion,
            rows,
        })
    }
}
