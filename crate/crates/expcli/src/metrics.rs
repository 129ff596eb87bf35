//! Discrete L2 errors of cell profiles and their ratio to the baseline error.

use mrt_core::hydrate::HydrateSystem;
use mrt_core::RunReport;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Baseline errors below this are treated as zero.
pub const ZERO_BASELINE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("grids differ: {0} cells of length {1} vs {2} cells of length {3}")]
    GridMismatch(usize, f64, usize, f64),
    #[error("snapshot times differ: {0} vs {1}")]
    TimeMismatch(f64, f64),
    #[error("{0} has no snapshot at t = {1}")]
    MissingSnapshot(String, f64),
    #[error("baseline error {0:e} is below {ZERO_BASELINE:e}")]
    ZeroBaselineError(f64),
}

/// Per-cell fields of the benchmark; displacement is averaged to cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "P_g")]
    Pg,
    #[serde(rename = "S_w")]
    Sw,
    #[serde(rename = "S_h")]
    Sh,
    T,
    #[serde(rename = "u_z")]
    Uz,
}

impl Field {
    pub const ALL: [Field; 5] = [Field::Pg, Field::Sw, Field::Sh, Field::T, Field::Uz];

    pub fn name(&self) -> &'static str {
        match self {
            Field::Pg => "P_g",
            Field::Sw => "S_w",
            Field::Sh => "S_h",
            Field::T => "T",
            Field::Uz => "u_z",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Values of the field per cell.
    pub fn extract(&self, active: &[f64], latent: &[f64]) -> Vec<f64> {
        match self {
            Field::Uz => latent.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            f => {
                let k = *f as usize;
                HydrateSystem::unpack_cells(active).map(|c| c[k]).collect()
            }
        }
    }
}

/// One field on a uniform grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub time: f64,
    pub length: f64,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn from_report(report: &RunReport, length: f64, field: Field, t: f64) -> Result<Self, MetricError> {
        let snap = report
            .snapshot_at(t)
            .ok_or_else(|| MetricError::MissingSnapshot(report.scheme.to_string(), t))?;
        Ok(Self { time: snap.time, length, values: field.extract(&snap.active, &snap.latent) })
    }
}

/// `sqrt(sum dz (a - b)^2)` over the cells.
pub fn l2_error(run: &Profile, reference: &Profile) -> Result<f64, MetricError> {
    let (n, m) = (run.values.len(), reference.values.len());
    if n != m || run.length != reference.length || n == 0 {
        return Err(MetricError::GridMismatch(n, run.length, m, reference.length));
    }
    if (run.time - reference.time).abs() > 1e-9 * run.time.abs().max(1.0) {
        return Err(MetricError::TimeMismatch(run.time, reference.time));
    }
    let dz = run.length / n as f64;
    let sum: f64 = run.values.iter().zip(&reference.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((dz * sum).sqrt())
}

/// L2 error of `run` over that of `baseline`, both measured against `reference`.
pub fn relative_error(
    run: &RunReport,
    baseline: &RunReport,
    reference: &RunReport,
    length: f64,
    field: Field,
    t: f64,
) -> Result<f64, MetricError> {
    let r = Profile::from_report(reference, length, field, t)?;
    let e_base = l2_error(&Profile::from_report(baseline, length, field, t)?, &r)?;
    if e_base < ZERO_BASELINE {
        return Err(MetricError::ZeroBaselineError(e_base));
    }
    Ok(l2_error(&Profile::from_report(run, length, field, t)?, &r)? / e_base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mrt_core::report::{Counters, Snapshot, Timing, Warnings};
    use mrt_core::SchemeKind;

    fn profile(values: Vec<f64>) -> Profile {
        Profile { time: 10.0, length: 2.0, values }
    }

    #[test]
    fn identical_profiles_have_zero_error() {
        let p = profile(vec![1.0, -3.0, 2.5]);
        assert_eq!(l2_error(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_scales_with_root_length() {
        let a = profile(vec![1.0; 8]);
        let b = profile(vec![1.25; 8]);
        assert!((l2_error(&a, &b).unwrap() - 0.25 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn half_resolution_reference_is_rejected() {
        let a = profile(vec![0.0; 8]);
        let b = profile(vec![0.0; 4]);
        assert!(matches!(l2_error(&a, &b), Err(MetricError::GridMismatch(8, _, 4, _))));
        let c = Profile { time: 11.0, ..profile(vec![0.0; 8]) };
        assert!(matches!(l2_error(&a, &c), Err(MetricError::TimeMismatch(..))));
    }

    fn report(offset: f64) -> RunReport {
        let active: Vec<f64> = (0..3).flat_map(|i| [1e6 + offset * i as f64, 0.5, 0.4, 283.0]).collect();
        RunReport {
            scheme: SchemeKind::FullyImplicit,
            extrapolation_order: None,
            multirate_factor: 1,
            micro_step: 1.0,
            t_end: 1.0,
            n_macro: 1,
            fingerprint: String::new(),
            snapshots: vec![Snapshot { time: 1.0, active, latent: vec![0.0, offset, 2.0 * offset, 3.0 * offset] }],
            counters: Counters::default(),
            timing: Timing::default(),
            warnings: Warnings::default(),
        }
    }

    #[test]
    fn relative_error_end_points() {
        let (reference, baseline, run) = (report(0.0), report(1.0), report(3.0));
        assert_eq!(relative_error(&baseline, &baseline, &reference, 1.0, Field::Pg, 1.0).unwrap(), 1.0);
        assert_eq!(relative_error(&reference, &baseline, &reference, 1.0, Field::Uz, 1.0).unwrap(), 0.0);
        let r = relative_error(&run, &baseline, &reference, 1.0, Field::Pg, 1.0).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
        assert!(matches!(
            relative_error(&run, &reference, &reference, 1.0, Field::Pg, 1.0),
            Err(MetricError::ZeroBaselineError(_))
        ));
        assert!(matches!(
            relative_error(&run, &baseline, &reference, 1.0, Field::Pg, 0.5),
            Err(MetricError::MissingSnapshot(..))
        ));
    }

    #[test]
    fn fields_are_extracted_per_cell() {
        let r = report(2.0);
        let s = &r.snapshots[0];
        assert_eq!(Field::Sh.extract(&s.active, &s.latent), [0.4; 3]);
        assert_eq!(Field::Uz.extract(&s.active, &s.latent), [1.0, 3.0, 5.0]);
        assert!(Field::ALL.iter().all(|f| Field::parse(f.name()) == Some(*f)));
    }
}
