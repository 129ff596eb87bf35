//! Time-marching strategies for partitioned DAE systems.
//!
//! Every scheme starts from a consistent state (latent solved against the
//! initial active vector at `t = 0`) and records a snapshot at each
//! synchronization level of the mesh.

mod compound_fast;
mod fully_implicit;
mod iterative;
mod semi_implicit;
mod sequential;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dae::{solve_latent, PartitionedState, PartitionedSystem};
use crate::mesh::{MeshError, TimeMesh, DEFAULT_H_MIN};
use crate::newton::{NewtonError, NewtonSettings};
use crate::report::{Counters, RunReport, Snapshot, Timing, Warnings};

pub use compound_fast::{march_compound_fast_mrt, march_compound_fast_mrt_observed};
pub use fully_implicit::{march_fully_implicit, march_fully_implicit_observed};
pub use iterative::{march_iterative_coupled, march_iterative_coupled_observed};
pub use semi_implicit::{march_semi_implicit_mrt, march_semi_implicit_mrt_observed};
pub use sequential::{march_decoupled_sequential, march_decoupled_sequential_observed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    FullyImplicit,
    IterativeCoupled,
    SemiImplicitMrt,
    CompoundFastMrt,
    /// One micro step with the latent frozen at its last solved value, then one latent solve.
    DecoupledSequential,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::FullyImplicit => "fully_implicit",
            SchemeKind::IterativeCoupled => "iterative_coupled",
            SchemeKind::SemiImplicitMrt => "semi_implicit_mrt",
            SchemeKind::CompoundFastMrt => "compound_fast_mrt",
            SchemeKind::DecoupledSequential => "decoupled_sequential",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MAX_EXTRAPOLATION_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub extrapolation_order: usize,
    pub newton_main: NewtonSettings,
    pub newton_relaxed: NewtonSettings,
    /// Bound on the scaled max-norm change between block sweeps.
    pub fixed_point_tol: f64,
    pub fixed_point_max: usize,
    pub restore_macro_after_halving: bool,
    pub h_min: f64,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind) -> Self {
        Self {
            scheme,
            extrapolation_order: 0,
            newton_main: NewtonSettings::main(),
            newton_relaxed: NewtonSettings::relaxed(),
            fixed_point_tol: 1e-6,
            fixed_point_max: 50,
            restore_macro_after_halving: true,
            h_min: DEFAULT_H_MIN,
        }
    }

    pub fn with_order(mut self, p: usize) -> Self {
        self.extrapolation_order = p;
        self
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if self.extrapolation_order > MAX_EXTRAPOLATION_ORDER {
            return Err(SchemeError::InvalidConfig(format!(
                "extrapolation order {} exceeds {MAX_EXTRAPOLATION_ORDER}",
                self.extrapolation_order
            )));
        }
        if self.fixed_point_max < 1 {
            return Err(SchemeError::InvalidConfig("fixed_point_max must be >= 1".into()));
        }
        if !(self.fixed_point_tol > 0.0) {
            return Err(SchemeError::InvalidConfig("fixed_point_tol must be positive".into()));
        }
        if !(self.h_min > 0.0) {
            return Err(SchemeError::InvalidConfig("h_min must be positive".into()));
        }
        for s in [&self.newton_main, &self.newton_relaxed] {
            s.validate().map_err(|e| SchemeError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initialization,
    MicroStep,
    LatentSolve,
    Monolithic,
    Predictor,
    PredictorLatent,
    Corrector,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("{phase:?} solve failed at macro {n}, micro {k} (t = {time}): {source}")]
    Solver {
        phase: Phase,
        n: usize,
        k: usize,
        time: f64,
        #[source]
        source: NewtonError,
    },
    #[error("fixed-point iteration diverged at t = {time} after {sweeps} sweeps (change {change:e})")]
    FixedPointDivergence { time: f64, sweeps: usize, change: f64 },
    #[error("predictor failed at macro {n} (t = {time}) and the step cannot be halved further: {source}")]
    PredictorFailure {
        n: usize,
        time: f64,
        #[source]
        source: MeshError,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Extrapolation(#[from] ExtrapolationError),
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
}

impl SchemeError {
    /// Short class name for manifests.
    pub fn class(&self) -> &'static str {
        match self {
            SchemeError::Solver { source: NewtonError::NoConvergence(_), .. } => "NoConvergence",
            SchemeError::Solver { source: NewtonError::NonFiniteResidual(_), .. } => "NonFiniteResidual",
            SchemeError::Solver { .. } => "SolverError",
            SchemeError::FixedPointDivergence { .. } => "FixedPointDivergence",
            SchemeError::PredictorFailure { .. } => "PredictorFailure",
            SchemeError::Mesh(_) => "MeshError",
            SchemeError::Extrapolation(_) => "ExtrapolationError",
            SchemeError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

/// One completed active step, as seen by an observer.
#[derive(Debug)]
pub struct MicroStepRecord<'a> {
    pub t_prev: f64,
    pub t_next: f64,
    pub prev_active: &'a [f64],
    /// Latent value paired with `prev_active` in the previous step's storage term.
    pub prev_latent: &'a [f64],
    pub latent_used: &'a [f64],
    pub active_next: &'a [f64],
}

pub type Observer<'o> = dyn FnMut(&MicroStepRecord<'_>) + 'o;

/// Runs the scheme selected by `config.scheme`.
pub fn march<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
) -> Result<RunReport, SchemeError> {
    match config.scheme {
        SchemeKind::FullyImplicit => march_fully_implicit(system, mesh, config),
        SchemeKind::IterativeCoupled => march_iterative_coupled(system, mesh, config),
        SchemeKind::SemiImplicitMrt => march_semi_implicit_mrt(system, mesh, config),
        SchemeKind::CompoundFastMrt => march_compound_fast_mrt(system, mesh, config),
        SchemeKind::DecoupledSequential => march_decoupled_sequential(system, mesh, config),
    }
}

// ---------------------------------------------------------------------------
// Latent history and polynomial extrapolation

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtrapolationError {
    #[error("order {order} needs {needed} history values, {available} available")]
    InsufficientHistory { order: usize, needed: usize, available: usize },
    #[error("history times must increase strictly ({previous} then {next})")]
    NonMonotoneHistory { previous: f64, next: f64 },
    #[error("evaluation time {t_eval} precedes newest history time {newest}")]
    BeforeHistory { t_eval: f64, newest: f64 },
    #[error("micro offset {0} outside (0, 1]")]
    OffsetOutOfRange(f64),
}

/// Solved latent values at past synchronization levels, newest last.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatentHistory {
    capacity: usize,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl LatentHistory {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), times: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, value: Vec<f64>) -> Result<(), ExtrapolationError> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(ExtrapolationError::NonMonotoneHistory { previous: last, next: t });
            }
        }
        self.times.push(t);
        self.values.push(value);
        if self.times.len() > self.capacity {
            self.times.remove(0);
            self.values.remove(0);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn newest(&self) -> Option<(f64, &[f64])> {
        self.times.last().map(|&t| (t, self.values.last().unwrap().as_slice()))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Order-`p` polynomial through the `p + 1` newest values.
    pub fn polynomial(&self, p: usize) -> Result<LatentPolynomial, ExtrapolationError> {
        let needed = p + 1;
        if self.len() < needed {
            return Err(ExtrapolationError::InsufficientHistory { order: p, needed, available: self.len() });
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ExtrapolationError::NonMonotoneHistory { previous: w[0], next: w[1] });
            }
        }
        let start = self.len() - needed;
        // newest first, so the Newton form starts at the anchor
        let times: Vec<f64> = self.times[start..].iter().rev().copied().collect();
        let values: Vec<&[f64]> = self.values[start..].iter().rev().map(|v| v.as_slice()).collect();
        Ok(LatentPolynomial::fit(&times, &values))
    }
}

/// `X(t) = X_anchor + sum_{j=1..p} A_j (t - t_anchor)^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPolynomial {
    pub anchor_time: f64,
    pub anchor: Vec<f64>,
    /// `coefficients[j - 1]` holds `A_j`.
    pub coefficients: Vec<Vec<f64>>,
}

impl LatentPolynomial {
    /// `times[0]` is the anchor; nodes need not be ordered otherwise.
    fn fit(times: &[f64], values: &[&[f64]]) -> Self {
        let p = times.len() - 1;
        let dim = values[0].len();
        let t0 = times[0];
        let s: Vec<f64> = times.iter().map(|&t| t - t0).collect();

        // monomial coefficients of the Newton basis prod_{i<j} (s - s_i)
        let mut basis: Vec<Vec<f64>> = vec![vec![1.0]];
        for j in 1..=p {
            let prev = &basis[j - 1];
            let mut next = vec![0.0; prev.len() + 1];
            for (d, &c) in prev.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= c * s[j - 1];
            }
            basis.push(next);
        }

        let mut coefficients = vec![vec![0.0; dim]; p];
        let mut dd = vec![0.0; p + 1];
        for c in 0..dim {
            for i in 0..=p {
                dd[i] = values[i][c];
            }
            for level in 1..=p {
                for i in (level..=p).rev() {
                    dd[i] = (dd[i] - dd[i - 1]) / (s[i] - s[i - level]);
                }
            }
            for j in 1..=p {
                for d in 1..=j {
                    coefficients[d - 1][c] += dd[j] * basis[j][d];
                }
            }
        }
        Self { anchor_time: t0, anchor: values[0].to_vec(), coefficients }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let s = t - self.anchor_time;
        let mut out = self.anchor.clone();
        if self.coefficients.is_empty() || s == 0.0 {
            return out;
        }
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in self.coefficients.iter().rev() {
                acc = (acc + a[c]) * s;
            }
            *o += acc;
        }
        out
    }
}

/// Order-`p` extrapolation of the latent history to `t_eval`.
pub fn extrapolate_latent(history: &LatentHistory, p: usize, t_eval: f64) -> Result<Vec<f64>, ExtrapolationError> {
    let poly = history.polynomial(p)?;
    if t_eval < poly.anchor_time {
        return Err(ExtrapolationError::BeforeHistory { t_eval, newest: poly.anchor_time });
    }
    Ok(poly.eval(t_eval))
}

/// `X_prev + (X_pred - X_prev) * offset` for each partial-sum offset in `(0, 1]`.
pub fn interpolate_latent_linear(
    xg_prev: &[f64],
    xg_pred: &[f64],
    micro_offsets: &[f64],
) -> Result<Vec<Vec<f64>>, ExtrapolationError> {
    micro_offsets.iter().map(|&o| interpolate_at(xg_prev, xg_pred, o)).collect()
}

pub(crate) fn interpolate_at(xg_prev: &[f64], xg_pred: &[f64], offset: f64) -> Result<Vec<f64>, ExtrapolationError> {
    if !(offset > 0.0 && offset <= 1.0) {
        return Err(ExtrapolationError::OffsetOutOfRange(offset));
    }
    if offset == 1.0 {
        return Ok(xg_pred.to_vec());
    }
    Ok(xg_prev.iter().zip(xg_pred).map(|(a, b)| a + (b - a) * offset).collect())
}

// ---------------------------------------------------------------------------
// Shared marching state

pub(crate) struct Recorder {
    pub report: RunReport,
    started: Instant,
}

impl Recorder {
    pub fn new<S: PartitionedSystem + ?Sized>(
        system: &S,
        mesh: &TimeMesh,
        config: &SchemeConfig,
        order: Option<usize>,
    ) -> Self {
        Self {
            report: RunReport {
                scheme: config.scheme,
                extrapolation_order: order,
                multirate_factor: mesh.multirate_factor(),
                micro_step: mesh.micro_step(),
                t_end: mesh.t_end(),
                n_macro: 0,
                fingerprint: system.fingerprint(),
                snapshots: Vec::new(),
                counters: Counters::default(),
                timing: Timing::default(),
                warnings: Warnings::default(),
            },
            started: Instant::now(),
        }
    }

    pub fn snapshot(&mut self, time: f64, active: &[f64], latent: &[f64]) {
        self.report.snapshots.push(Snapshot { time, active: active.to_vec(), latent: latent.to_vec() });
    }

    pub fn counters(&mut self) -> &mut Counters {
        &mut self.report.counters
    }

    pub fn timing(&mut self) -> &mut Timing {
        &mut self.report.timing
    }

    pub fn clip<S: PartitionedSystem + ?Sized>(&mut self, system: &S, xf: &mut [f64]) {
        let c = system.clip_active(xf);
        self.report.warnings.record_clip(c);
    }

    pub fn finish(mut self, n_macro: usize) -> RunReport {
        self.report.n_macro = n_macro;
        self.report.timing.total_seconds = self.started.elapsed().as_secs_f64();
        self.report
    }
}

/// Consistent initial state: latent solved against the initial active vector.
pub(crate) fn initialize<S: PartitionedSystem + ?Sized>(
    system: &S,
    config: &SchemeConfig,
    rec: &mut Recorder,
) -> Result<PartitionedState, SchemeError> {
    config.validate()?;
    let mut state = system.initial_state();
    state.time = 0.0;
    let t0 = Instant::now();
    let (xg, rep) = solve_latent(system, 0.0, &state.active, &state.latent, &config.newton_main).map_err(|e| {
        SchemeError::Solver { phase: Phase::Initialization, n: 0, k: 0, time: 0.0, source: e }
    })?;
    rec.timing().latent_seconds += t0.elapsed().as_secs_f64();
    rec.counters().latent_solves += 1;
    rec.counters().latent_newton_iterations += rep.iterations;
    state.latent = xg;
    rec.snapshot(0.0, &state.active, &state.latent);
    Ok(state)
}

/// Largest entry of `|a - b| / (|a| + scale)`.
pub(crate) fn scaled_change(a: &[f64], b: &[f64], scales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(scales)
        .map(|((x, y), s)| (x - y).abs() / (x.abs() + s))
        .fold(0.0, f64::max)
}

pub(crate) fn solver_err(phase: Phase, n: usize, k: usize, time: f64) -> impl FnOnce(NewtonError) -> SchemeError {
    move |source| SchemeError::Solver { phase, n, k, time, source }
}
