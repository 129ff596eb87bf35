//! Iteratively coupled baseline: block Gauss-Seidel sweeps on every micro step.

use std::time::Instant;

use super::{
    initialize, scaled_change, solver_err, MicroStepRecord, Observer, Phase, Recorder, SchemeConfig, SchemeError,
};
use crate::dae::{implicit_euler_micro_step_from, solve_latent, PartitionedState, PartitionedSystem};
use crate::mesh::TimeMesh;
use crate::report::RunReport;

pub fn march_iterative_coupled<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
) -> Result<RunReport, SchemeError> {
    march_iterative_coupled_observed(system, mesh, config, &mut |_| {})
}

/// Each sweep solves the active step against the latest latent iterate, then
/// the latent against the new active iterate. The first sweep has nothing to
/// compare with, so convergence is detected at sweep two at the earliest.
pub fn march_iterative_coupled_observed<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
    observer: &mut Observer<'_>,
) -> Result<RunReport, SchemeError> {
    let mut rec = Recorder::new(system, mesh, config, None);
    let state0 = initialize(system, config, &mut rec)?;
    let sf = system.active_scales();
    let sg = system.latent_scales();
    let mut xf = state0.active;
    let mut xg = state0.latent;
    let mut paired = xg.clone();

    for n in 0..mesh.n_macro() {
        let pts = mesh.micro_points(n);
        for k in 1..pts.len() {
            let (t_prev, t_next) = (pts[k - 1], pts[k]);
            let h = t_next - t_prev;
            let prev = PartitionedState::new(xf, paired, t_prev);
            let mut xg_iter = xg.clone();
            let mut xf_iter = prev.active.clone();
            let mut sweeps = 0usize;
            let (xf_new, xg_used, xg_new) = loop {
                sweeps += 1;
                let t0 = Instant::now();
                let (mut xf_s, rep) = implicit_euler_micro_step_from(
                    system,
                    &prev,
                    &xg_iter,
                    t_next,
                    h,
                    &xf_iter,
                    &config.newton_main,
                )
                .map_err(solver_err(Phase::MicroStep, n, k, t_next))?;
                rec.timing().flow_seconds += t0.elapsed().as_secs_f64();
                rec.clip(system, &mut xf_s);
                rec.counters().flow_solves += 1;
                rec.counters().flow_newton_iterations += rep.iterations;

                let t0 = Instant::now();
                let (xg_s, rep) = solve_latent(system, t_next, &xf_s, &xg_iter, &config.newton_main)
                    .map_err(solver_err(Phase::LatentSolve, n, k, t_next))?;
                rec.timing().latent_seconds += t0.elapsed().as_secs_f64();
                rec.counters().latent_solves += 1;
                rec.counters().latent_newton_iterations += rep.iterations;

                let change = if sweeps == 1 {
                    f64::INFINITY
                } else {
                    scaled_change(&xf_s, &xf_iter, &sf).max(scaled_change(&xg_s, &xg_iter, &sg))
                };
                if change <= config.fixed_point_tol {
                    break (xf_s, xg_iter, xg_s);
                }
                if sweeps >= config.fixed_point_max {
                    return Err(SchemeError::FixedPointDivergence { time: t_next, sweeps, change });
                }
                xf_iter = xf_s;
                xg_iter = xg_s;
            };
            let c = rec.counters();
            c.fixed_point_steps += 1;
            c.fixed_point_sweeps += sweeps;
            c.micro_steps += 1;
            observer(&MicroStepRecord {
                t_prev,
                t_next,
                prev_active: &prev.active,
                prev_latent: &prev.latent,
                latent_used: &xg_used,
                active_next: &xf_new,
            });
            xf = xf_new;
            xg = xg_new;
            paired = xg_used;
        }
        rec.counters().macro_steps += 1;
        rec.snapshot(pts[pts.len() - 1], &xf, &xg);
    }
    Ok(rec.finish(mesh.n_macro()))
}
