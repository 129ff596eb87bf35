//! Compound-fast multirate scheme: a relaxed one-step predictor over the
//! macro interval, micro steps against linearly interpolated latent values,
//! and a corrector latent solve started from the predicted latent.

use std::time::Instant;

use super::{
    initialize, interpolate_at, solver_err, MicroStepRecord, Observer, Phase, Recorder, SchemeConfig, SchemeError,
};
use crate::dae::{implicit_euler_micro_step, solve_latent, PartitionedState, PartitionedSystem};
use crate::mesh::TimeMesh;
use crate::newton::NewtonError;
use crate::report::{HalvingEvent, RunReport};

pub fn march_compound_fast_mrt<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
) -> Result<RunReport, SchemeError> {
    march_compound_fast_mrt_observed(system, mesh, config, &mut |_| {})
}

/// A predictor that fails to converge halves the macro step and retries.
pub fn march_compound_fast_mrt_observed<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
    observer: &mut Observer<'_>,
) -> Result<RunReport, SchemeError> {
    let mut rec = Recorder::new(system, mesh, config, None);
    let state0 = initialize(system, config, &mut rec)?;
    let mut mesh = mesh.clone();
    let mut xf = state0.active;
    let mut xg = state0.latent;
    let mut paired = xg.clone();

    let mut n = 0usize;
    while n < mesh.n_macro() {
        let t_a = mesh.macro_points()[n];
        let t_b = mesh.macro_points()[n + 1];
        let big_h = t_b - t_a;

        // predictor: one step over the whole interval with the latent frozen
        let prev = PartitionedState::new(xf, paired, t_a);
        let t0 = Instant::now();
        let predicted = implicit_euler_micro_step(system, &prev, &xg, t_b, big_h, &config.newton_relaxed);
        rec.timing().predictor_flow_seconds += t0.elapsed().as_secs_f64();
        let mut xf_pred = match predicted {
            Ok((x, rep)) => {
                rec.counters().predictor_flow_solves += 1;
                rec.counters().predictor_flow_iterations += rep.iterations;
                x
            }
            Err(e @ (NewtonError::NoConvergence(_) | NewtonError::NonFiniteResidual(_))) => {
                if let NewtonError::NoConvergence(rep) = &e {
                    rec.counters().predictor_flow_iterations += rep.iterations;
                }
                rec.counters().predictor_flow_solves += 1;
                mesh = mesh
                    .halve_macro_step(n, config.h_min, config.restore_macro_after_halving)
                    .map_err(|source| SchemeError::PredictorFailure { n, time: t_a, source })?;
                rec.report.warnings.halvings.push(HalvingEvent {
                    macro_index: n,
                    t_start: t_a,
                    new_macro_step: 0.5 * big_h,
                });
                xf = prev.active;
                paired = prev.latent;
                continue;
            }
            Err(e) => return Err(solver_err(Phase::Predictor, n, 0, t_b)(e)),
        };
        system.clip_active(&mut xf_pred);

        let t0 = Instant::now();
        let (xg_pred, rep) = solve_latent(system, t_b, &xf_pred, &xg, &config.newton_main)
            .map_err(solver_err(Phase::PredictorLatent, n, 0, t_b))?;
        rec.timing().predictor_latent_seconds += t0.elapsed().as_secs_f64();
        rec.counters().predictor_latent_solves += 1;
        rec.counters().predictor_latent_iterations += rep.iterations;

        let pts = mesh.micro_points(n).to_vec();
        let offsets = mesh.micro_offsets(n);
        let mut xf_cur = prev.active;
        let mut paired_cur = prev.latent;
        for k in 1..pts.len() {
            let (t_prev, t_next) = (pts[k - 1], pts[k]);
            let xg_used = interpolate_at(&xg, &xg_pred, offsets[k - 1])?;
            let step_prev = PartitionedState::new(xf_cur, paired_cur, t_prev);
            let t0 = Instant::now();
            let (mut xf_new, rep) =
                implicit_euler_micro_step(system, &step_prev, &xg_used, t_next, t_next - t_prev, &config.newton_main)
                    .map_err(solver_err(Phase::MicroStep, n, k, t_next))?;
            rec.timing().flow_seconds += t0.elapsed().as_secs_f64();
            rec.clip(system, &mut xf_new);
            rec.counters().flow_solves += 1;
            rec.counters().flow_newton_iterations += rep.iterations;
            rec.counters().micro_steps += 1;
            observer(&MicroStepRecord {
                t_prev,
                t_next,
                prev_active: &step_prev.active,
                prev_latent: &step_prev.latent,
                latent_used: &xg_used,
                active_next: &xf_new,
            });
            xf_cur = xf_new;
            paired_cur = xg_used;
        }

        // corrector
        let t0 = Instant::now();
        let (xg_new, rep) = solve_latent(system, t_b, &xf_cur, &xg_pred, &config.newton_main)
            .map_err(solver_err(Phase::Corrector, n, pts.len() - 1, t_b))?;
        rec.timing().latent_seconds += t0.elapsed().as_secs_f64();
        rec.counters().latent_solves += 1;
        rec.counters().latent_newton_iterations += rep.iterations;
        rec.counters().macro_steps += 1;

        xf = xf_cur;
        paired = paired_cur;
        xg = xg_new;
        rec.snapshot(t_b, &xf, &xg);
        n += 1;
    }
    Ok(rec.finish(mesh.n_macro()))
}
