//! Per-run trajectory CSVs and the number format shared by every table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use mrt_core::hydrate::Grid;
use mrt_core::RunReport;
use thiserror::Error;

use crate::metrics::{Field, Profile};

pub const TRAJECTORY_HEADER: &str = "t,z,P_g,S_w,S_h,T,u_z";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One row per cell and snapshot, in snapshot order then bottom to top.
pub fn trajectory_csv(report: &RunReport, grid: &Grid) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for snap in &report.snapshots {
        let cols: Vec<Vec<f64>> = Field::ALL.iter().map(|f| f.extract(&snap.active, &snap.latent)).collect();
        for i in 0..grid.cells {
            let _ = write!(out, "{},{}", fmt_num(snap.time), fmt_num(grid.center(i)));
            for col in &cols {
                let _ = write!(out, ",{}", fmt_num(col[i]));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("unexpected header {0:?}")]
    Header(String),
    #[error("line {0}: {1}")]
    Row(usize, String),
}

/// A trajectory read back from CSV: per time, the cell centers and fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub length: f64,
    /// Keyed by the bit pattern of the time so that the order is numeric for `t >= 0`.
    frames: BTreeMap<u64, Frame>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Frame {
    z: Vec<f64>,
    fields: [Vec<f64>; 5],
}

impl Trajectory {
    pub fn parse(text: &str, length: f64) -> Result<Self, TrajectoryError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != TRAJECTORY_HEADER {
            return Err(TrajectoryError::Header(header.into()));
        }
        let mut traj = Trajectory { length, frames: BTreeMap::new() };
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| TrajectoryError::Row(i + 2, e.to_string()))?;
            if vals.len() != 7 || !(vals[0] >= 0.0) {
                return Err(TrajectoryError::Row(i + 2, format!("expected 7 columns with t >= 0, got {line:?}")));
            }
            let frame = traj.frames.entry(vals[0].to_bits()).or_default();
            frame.z.push(vals[1]);
            for (k, col) in frame.fields.iter_mut().enumerate() {
                col.push(vals[2 + k]);
            }
        }
        Ok(traj)
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.keys().map(|&b| f64::from_bits(b)).collect()
    }

    pub fn profile(&self, field: Field, t: f64) -> Option<Profile> {
        let frame = self.frames.get(&t.to_bits())?;
        let k = Field::ALL.iter().position(|f| *f == field).expect("field is listed");
        Some(Profile { time: t, length: self.length, values: frame.fields[k].clone() })
    }
}
