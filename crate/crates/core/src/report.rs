//! Run records shared by every time-marching scheme.

use serde::{Deserialize, Serialize};

use crate::schemes::SchemeKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub active: Vec<f64>,
    pub latent: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    /// Implicit Euler solves of the active part on the micro grid.
    pub flow_solves: usize,
    pub flow_newton_iterations: usize,
    pub latent_solves: usize,
    pub latent_newton_iterations: usize,
    /// Compound-fast predictor: one large active step and its latent solve.
    pub predictor_flow_solves: usize,
    pub predictor_flow_iterations: usize,
    pub predictor_latent_solves: usize,
    pub predictor_latent_iterations: usize,
    pub monolithic_solves: usize,
    pub monolithic_iterations: usize,
    /// Iteratively coupled baseline: steps taken and block sweeps summed over them.
    pub fixed_point_steps: usize,
    pub fixed_point_sweeps: usize,
    pub micro_steps: usize,
    pub macro_steps: usize,
}

impl Counters {
    pub fn mean_fixed_point_sweeps(&self) -> Option<f64> {
        (self.fixed_point_steps > 0).then(|| self.fixed_point_sweeps as f64 / self.fixed_point_steps as f64)
    }

    pub fn mean_flow_iterations(&self) -> Option<f64> {
        (self.flow_solves > 0).then(|| self.flow_newton_iterations as f64 / self.flow_solves as f64)
    }

    pub fn mean_predictor_iterations(&self) -> Option<f64> {
        (self.predictor_flow_solves > 0)
            .then(|| self.predictor_flow_iterations as f64 / self.predictor_flow_solves as f64)
    }
}

/// Wall-clock seconds per solve block, measured with a monotonic clock.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub flow_seconds: f64,
    pub latent_seconds: f64,
    pub predictor_flow_seconds: f64,
    pub predictor_latent_seconds: f64,
    pub monolithic_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingEvent {
    pub macro_index: usize,
    pub t_start: f64,
    pub new_macro_step: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Warnings {
    /// Active iterates projected by more than `CLIP_WARN`.
    pub clip_events: usize,
    pub max_clip: f64,
    pub halvings: Vec<HalvingEvent>,
}

/// Clips at or below this magnitude are considered round-off.
pub const CLIP_WARN: f64 = 1e-8;

impl Warnings {
    pub fn record_clip(&mut self, clip: f64) {
        if clip > CLIP_WARN {
            self.clip_events += 1;
        }
        self.max_clip = self.max_clip.max(clip);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub extrapolation_order: Option<usize>,
    pub multirate_factor: usize,
    pub micro_step: f64,
    pub t_end: f64,
    /// Macro intervals actually taken, after any halving.
    pub n_macro: usize,
    pub fingerprint: String,
    /// States at every synchronization level `T_n`, including `T_0` and `t_end`.
    pub snapshots: Vec<Snapshot>,
    pub counters: Counters,
    pub timing: Timing,
    pub warnings: Warnings,
}

impl RunReport {
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 1e-9 * self.t_end.abs().max(1.0);
        self.snapshots.iter().find(|s| (s.time - t).abs() <= tol)
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("a report always holds the initial snapshot")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}
