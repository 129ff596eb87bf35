//! Synchronized two-level time meshes.
//!
//! The macro grid `T_0 < T_1 < ... < T_N` carries the latent (slow) unknowns,
//! the micro grid subdivides every macro interval into micro steps for the
//! active (fast) unknowns. Interval `n` runs from `T_n` to `T_{n+1}`; its micro
//! points start exactly at `T_n` and end exactly at `T_{n+1}`.
//!
//! Points are stored explicitly, never re-accumulated, so the synchronization
//! identities hold with exact floating-point equality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default lower bound on macro step size after halving, in seconds.
pub const DEFAULT_H_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("horizon {t_end} s is not a multiple of the macro step {macro_step} s")]
    NonDivisibleHorizon { t_end: f64, macro_step: f64 },
    #[error("invalid step configuration: {0}")]
    InvalidStep(String),
    #[error("macro step {half} s would fall below the floor {h_min} s")]
    StepUnderflow { half: f64, h_min: f64 },
    #[error("macro interval {0} does not exist")]
    NoSuchInterval(usize),
    #[error("mesh invariant violated: {0}")]
    Invariant(String),
}

/// A synchronized macro/micro time mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    t_end: f64,
    /// Nominal micro step used to build (and re-tile) the mesh.
    h: f64,
    /// Nominal multirate factor.
    m: usize,
    /// `T_0 .. T_N`.
    macro_points: Vec<f64>,
    /// One entry per macro interval: `t_{n,0} .. t_{n,m_n}`.
    micro_points: Vec<Vec<f64>>,
}

/// Uniform mesh with micro step `h` and macro step `m * h`.
pub fn build_uniform_mesh(t_end: f64, h: f64, m: usize) -> Result<TimeMesh, MeshError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeshError::InvalidStep(format!("micro step must be positive, got {h}")));
    }
    if m < 1 {
        return Err(MeshError::InvalidStep("multirate factor must be at least 1".into()));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(MeshError::InvalidStep(format!("horizon must be positive, got {t_end}")));
    }
    let macro_step = m as f64 * h;
    let ratio = t_end / macro_step;
    let n_macro = ratio.round();
    if n_macro < 1.0 || (n_macro * macro_step - t_end).abs() > 1e-9 * t_end {
        return Err(MeshError::NonDivisibleHorizon { t_end, macro_step });
    }
    let n_macro = n_macro as usize;

    let mut macro_points: Vec<f64> = (0..=n_macro).map(|n| (n * m) as f64 * h).collect();
    macro_points[n_macro] = t_end;

    let micro_points = (0..n_macro)
        .map(|n| {
            let mut pts: Vec<f64> = (0..=m).map(|k| (n * m + k) as f64 * h).collect();
            pts[0] = macro_points[n];
            pts[m] = macro_points[n + 1];
            pts
        })
        .collect();

    let mesh = TimeMesh { t_end, h, m, macro_points, micro_points };
    mesh.validate()?;
    Ok(mesh)
}

impl TimeMesh {
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Nominal micro step.
    pub fn micro_step(&self) -> f64 {
        self.h
    }

    pub fn multirate_factor(&self) -> usize {
        self.m
    }

    /// Number of macro intervals `N`.
    pub fn n_macro(&self) -> usize {
        self.macro_points.len() - 1
    }

    /// Total number of micro steps over the horizon.
    pub fn n_micro(&self) -> usize {
        self.micro_points.iter().map(|p| p.len() - 1).sum()
    }

    pub fn macro_points(&self) -> &[f64] {
        &self.macro_points
    }

    /// `H_n` for interval `n` (from `T_n` to `T_{n+1}`).
    pub fn macro_step(&self, n: usize) -> f64 {
        self.macro_points[n + 1] - self.macro_points[n]
    }

    pub fn macro_steps(&self) -> Vec<f64> {
        (0..self.n_macro()).map(|n| self.macro_step(n)).collect()
    }

    /// Micro points `t_{n,0} .. t_{n,m_n}` of interval `n`.
    pub fn micro_points(&self, n: usize) -> &[f64] {
        &self.micro_points[n]
    }

    /// Micro steps `h_{n,1} .. h_{n,m_n}` of interval `n`.
    pub fn micro_steps(&self, n: usize) -> Vec<f64> {
        self.micro_points[n].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Normalized offsets `(t_{n,k} - T_n) / H_n` for `k = 1..m_n`; the last one is exactly 1.
    pub fn micro_offsets(&self, n: usize) -> Vec<f64> {
        let pts = &self.micro_points[n];
        let t0 = pts[0];
        let span = self.macro_step(n);
        let last = pts.len() - 1;
        (1..=last)
            .map(|k| if k == last { 1.0 } else { (pts[k] - t0) / span })
            .collect()
    }

    /// All micro points over the horizon, without duplicates at synchronization levels.
    pub fn all_micro_points(&self) -> Vec<f64> {
        let mut out = vec![self.macro_points[0]];
        for pts in &self.micro_points {
            out.extend_from_slice(&pts[1..]);
        }
        out
    }

    /// Checks every structural invariant of the mesh.
    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.n_macro();
        if n == 0 || self.micro_points.len() != n {
            return Err(MeshError::Invariant("interval count mismatch".into()));
        }
        if self.macro_points[0] != 0.0 {
            return Err(MeshError::Invariant("T_0 must be 0".into()));
        }
        if self.macro_points[n] != self.t_end {
            return Err(MeshError::Invariant("T_N must equal t_end".into()));
        }
        for (i, pts) in self.micro_points.iter().enumerate() {
            if pts.len() < 2 {
                return Err(MeshError::Invariant(format!("interval {i} has no micro step")));
            }
            if pts[0] != self.macro_points[i] || pts[pts.len() - 1] != self.macro_points[i + 1] {
                return Err(MeshError::Invariant(format!("interval {i} is not synchronized")));
            }
            if pts.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(MeshError::Invariant(format!("micro points of interval {i} not increasing")));
            }
        }
        let total: f64 = self.macro_steps().iter().sum();
        if (total - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(MeshError::Invariant("macro steps do not sum to t_end".into()));
        }
        Ok(())
    }

    /// Splits interval `n` into two halves, each re-tiled with
    /// `ceil((H_n/2) / h)` equal micro steps where `h` is the nominal micro step.
    ///
    /// With `restore_after` false, every later interval is also rebuilt with
    /// macro step `H_n/2` (the last one absorbs the remainder).
    pub fn halve_macro_step(
        &self,
        n: usize,
        h_min: f64,
        restore_after: bool,
    ) -> Result<TimeMesh, MeshError> {
        if n >= self.n_macro() {
            return Err(MeshError::NoSuchInterval(n));
        }
        let t_a = self.macro_points[n];
        let t_b = self.macro_points[n + 1];
        let half = 0.5 * (t_b - t_a);
        if half < h_min {
            return Err(MeshError::StepUnderflow { half, h_min });
        }
        let t_mid = t_a + half;

        let mut macro_points = self.macro_points[..=n].to_vec();
        let mut micro_points = self.micro_points[..n].to_vec();
        micro_points.push(self.tile(t_a, t_mid));
        macro_points.push(t_mid);

        if restore_after {
            micro_points.push(self.tile(t_mid, t_b));
            macro_points.push(t_b);
            micro_points.extend_from_slice(&self.micro_points[n + 1..]);
            macro_points.extend_from_slice(&self.macro_points[n + 2..]);
        } else {
            let mut start = t_mid;
            let mut j = 1usize;
            loop {
                let mut end = t_mid + j as f64 * half;
                if end > self.t_end || (self.t_end - end) < 0.5 * half {
                    end = self.t_end;
                }
                micro_points.push(self.tile(start, end));
                macro_points.push(end);
                if end == self.t_end {
                    break;
                }
                start = end;
                j += 1;
            }
        }

        let mesh = TimeMesh {
            t_end: self.t_end,
            h: self.h,
            m: self.m,
            macro_points,
            micro_points,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Equal subdivision of `[t_a, t_b]` into `ceil((t_b - t_a)/h)` micro steps.
    fn tile(&self, t_a: f64, t_b: f64) -> Vec<f64> {
        let span = t_b - t_a;
        // Tolerate round-off when the span is an exact multiple of h.
        let k = ((span / self.h) - 1e-9).ceil().max(1.0) as usize;
        let mut pts: Vec<f64> = (0..=k).map(|i| t_a + span * (i as f64 / k as f64)).collect();
        pts[0] = t_a;
        pts[k] = t_b;
        pts
    }
}

/// Free-function form of [`TimeMesh::halve_macro_step`] with `restore_after = true`.
pub fn halve_macro_step(mesh: &TimeMesh, n: usize, h_min: f64) -> Result<TimeMesh, MeshError> {
    mesh.halve_macro_step(n, h_min, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_test1_mesh() {
        let mesh = build_uniform_mesh(18000.0, 60.0, 5).unwrap();
        assert_eq!(mesh.n_macro(), 60);
        assert_eq!(mesh.n_micro(), 300);
        assert_eq!(mesh.macro_step(7), 300.0);
        assert_eq!(mesh.macro_points()[60], 18000.0);
    }

    #[test]
    fn unit_multirate_factor_collapses_grids() {
        let mesh = build_uniform_mesh(18000.0, 60.0, 1).unwrap();
        assert_eq!(mesh.n_macro(), 300);
        assert_eq!(mesh.all_micro_points(), mesh.macro_points().to_vec());
        assert!(mesh.macro_steps().iter().all(|&h| h == 60.0));
    }

    #[test]
    fn reservoir_scale_mesh() {
        let mesh = build_uniform_mesh(30000.0, 200.0, 15).unwrap();
        assert_eq!(mesh.n_macro(), 10);
        assert_eq!(mesh.macro_step(0), 3000.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_uniform_mesh(18000.0, 70.0, 5),
            Err(MeshError::NonDivisibleHorizon { .. })
        ));
        assert!(matches!(build_uniform_mesh(18000.0, 0.0, 5), Err(MeshError::InvalidStep(_))));
        assert!(matches!(build_uniform_mesh(18000.0, -60.0, 5), Err(MeshError::InvalidStep(_))));
        assert!(matches!(build_uniform_mesh(18000.0, 60.0, 0), Err(MeshError::InvalidStep(_))));
    }

    #[test]
    fn halving_retiles_with_nominal_resolution() {
        let mesh = build_uniform_mesh(1500.0, 60.0, 5).unwrap();
        let halved = halve_macro_step(&mesh, 2, DEFAULT_H_MIN).unwrap();
        assert_eq!(halved.n_macro(), 6);
        assert_eq!(halved.macro_step(2), 150.0);
        assert_eq!(halved.macro_step(3), 150.0);
        // ceil(150/60) = 3 micro steps of 50 s
        assert_eq!(halved.micro_steps(2), vec![50.0, 50.0, 50.0]);
        assert_eq!(halved.micro_steps(3), vec![50.0, 50.0, 50.0]);
        // untouched elsewhere
        assert_eq!(halved.micro_points(1), mesh.micro_points(1));
        assert_eq!(halved.micro_points(4), mesh.micro_points(3));
        halved.validate().unwrap();
    }

    #[test]
    fn halving_unit_factor() {
        let mesh = build_uniform_mesh(180.0, 60.0, 1).unwrap();
        let halved = halve_macro_step(&mesh, 0, DEFAULT_H_MIN).unwrap();
        assert_eq!(halved.micro_steps(0), vec![30.0]);
        assert_eq!(halved.micro_steps(1), vec![30.0]);
        assert_eq!(halved.n_macro(), 4);
    }

    #[test]
    fn halving_until_floor_underflows() {
        let mesh = build_uniform_mesh(300.0, 60.0, 5).unwrap();
        let once = halve_macro_step(&mesh, 0, 100.0).unwrap();
        let err = halve_macro_step(&once, 0, 100.0).unwrap_err();
        assert!(matches!(err, MeshError::StepUnderflow { .. }));
    }

    #[test]
    fn halving_without_restore_shrinks_tail() {
        let mesh = build_uniform_mesh(1200.0, 60.0, 5).unwrap();
        let halved = mesh.halve_macro_step(1, DEFAULT_H_MIN, false).unwrap();
        assert!(halved.macro_steps()[1..].iter().all(|&h| (h - 150.0).abs() < 1e-9));
        assert_eq!(halved.n_macro(), 7);
        assert_eq!(halved.macro_points()[halved.n_macro()], 1200.0);
    }

    #[test]
    fn offsets_end_at_one() {
        let mesh = build_uniform_mesh(600.0, 60.0, 10).unwrap();
        let offs = mesh.micro_offsets(0);
        assert_eq!(offs.len(), 10);
        assert_eq!(offs[9], 1.0);
        assert!((offs[4] - 0.5).abs() < 1e-15);
    }
}
