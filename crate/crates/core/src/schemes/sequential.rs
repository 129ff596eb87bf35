//! Decoupled sequential scheme: one micro step with the latent frozen at its
//! last solved value, then one latent solve, on every micro interval.

use std::time::Instant;

use super::{initialize, solver_err, MicroStepRecord, Observer, Phase, Recorder, SchemeConfig, SchemeError};
use crate::dae::{implicit_euler_micro_step, solve_latent, PartitionedState, PartitionedSystem};
use crate::mesh::TimeMesh;
use crate::report::RunReport;

pub fn march_decoupled_sequential<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
) -> Result<RunReport, SchemeError> {
    march_decoupled_sequential_observed(system, mesh, config, &mut |_| {})
}

pub fn march_decoupled_sequential_observed<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
    observer: &mut Observer<'_>,
) -> Result<RunReport, SchemeError> {
    let mut rec = Recorder::new(system, mesh, config, None);
    let state0 = initialize(system, config, &mut rec)?;
    let mut xf = state0.active;
    let mut xg = state0.latent;
    // latent value paired with xf in the storage term
    let mut paired = xg.clone();

    for n in 0..mesh.n_macro() {
        let pts = mesh.micro_points(n);
        for k in 1..pts.len() {
            let (t_prev, t_next) = (pts[k - 1], pts[k]);
            let prev = PartitionedState::new(xf, paired, t_prev);
            let t0 = Instant::now();
            let (mut xf_new, rep) =
                implicit_euler_micro_step(system, &prev, &xg, t_next, t_next - t_prev, &config.newton_main)
                    .map_err(solver_err(Phase::MicroStep, n, k, t_next))?;
            rec.timing().flow_seconds += t0.elapsed().as_secs_f64();
            rec.clip(system, &mut xf_new);
            rec.counters().flow_solves += 1;
            rec.counters().flow_newton_iterations += rep.iterations;
            rec.counters().micro_steps += 1;
            observer(&MicroStepRecord {
                t_prev,
                t_next,
                prev_active: &prev.active,
                prev_latent: &prev.latent,
                latent_used: &xg,
                active_next: &xf_new,
            });

            let t0 = Instant::now();
            let (xg_new, rep) = solve_latent(system, t_next, &xf_new, &xg, &config.newton_main)
                .map_err(solver_err(Phase::LatentSolve, n, k, t_next))?;
            rec.timing().latent_seconds += t0.elapsed().as_secs_f64();
            rec.counters().latent_solves += 1;
            rec.counters().latent_newton_iterations += rep.iterations;
            paired = std::mem::replace(&mut xg, xg_new);
            xf = xf_new;
        }
        rec.counters().macro_steps += 1;
        rec.snapshot(pts[pts.len() - 1], &xf, &xg);
    }
    Ok(rec.finish(mesh.n_macro()))
}
