//! Side-by-side comparison of two written runs.

use std::path::Path;

use anyhow::{bail, Context};
use mrt_core::perf::measure_work;

use crate::metrics::{l2_error, Field};
use crate::runner::RunSummary;
use crate::trajectory::{fmt_num, Trajectory};

pub struct LoadedRun {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
}

/// Reads a run summary and the trajectory CSV it names.
pub fn load_run(path: &Path) -> anyhow::Result<LoadedRun> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let summary: RunSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let csv_path = path.parent().unwrap_or(Path::new(".")).join(&summary.trajectory);
    let csv = std::fs::read_to_string(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let trajectory = Trajectory::parse(&csv, summary.length)?;
    Ok(LoadedRun { summary, trajectory })
}

/// L2 differences of `a` against `b` per field at `times` (default: the
/// last common snapshot), then the speed-up of `a` over `b`.
pub fn compare(a: &LoadedRun, b: &LoadedRun, times: &[f64]) -> anyhow::Result<String> {
    let common: Vec<f64> = a.trajectory.times().into_iter().filter(|t| b.trajectory.times().contains(t)).collect();
    let times: Vec<f64> = if times.is_empty() { common.last().copied().into_iter().collect() } else { times.to_vec() };
    if times.is_empty() {
        bail!("{} and {} share no snapshot time", a.summary.label, b.summary.label);
    }
    let mut out = String::from("field,t,L2\n");
    for &t in &times {
        for field in Field::ALL {
            let (Some(pa), Some(pb)) = (a.trajectory.profile(field, t), b.trajectory.profile(field, t)) else {
                bail!("no common snapshot at t = {t}");
            };
            out += &format!("{},{},{}\n", field.name(), fmt_num(t), fmt_num(l2_error(&pa, &pb)?));
        }
    }
    out += "\nquantity,value\n";
    out += &format!("wall_time_ratio,{}\n", fmt_num(b.summary.report.timing.total_seconds / a.summary.report.timing.total_seconds));
    if let Ok(w) = measure_work(&b.summary.report, &a.summary.report) {
        out += &format!("C,{}\nn_fp,{}\nn_it,{}\n", fmt_num(w.model.c()), fmt_num(w.model.n_fp), fmt_num(w.model.n_it));
    }
    Ok(out)
}
