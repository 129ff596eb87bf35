//! Semi-implicit multirate scheme: extrapolate the latent over the macro
//! interval, march the active part on the micro grid, then solve the latent
//! once at the new synchronization level.

use std::time::Instant;

use super::{
    initialize, solver_err, LatentHistory, MicroStepRecord, Observer, Phase, Recorder, SchemeConfig, SchemeError,
};
use crate::dae::{implicit_euler_micro_step, solve_latent, PartitionedState, PartitionedSystem};
use crate::mesh::TimeMesh;
use crate::report::RunReport;

pub fn march_semi_implicit_mrt<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
) -> Result<RunReport, SchemeError> {
    march_semi_implicit_mrt_observed(system, mesh, config, &mut |_| {})
}

/// Until `p + 1` solved levels exist the order drops to `available - 1`.
pub fn march_semi_implicit_mrt_observed<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
    observer: &mut Observer<'_>,
) -> Result<RunReport, SchemeError> {
    let p = config.extrapolation_order;
    let mut rec = Recorder::new(system, mesh, config, Some(p));
    let state0 = initialize(system, config, &mut rec)?;
    let mut history = LatentHistory::new(p + 1);
    history.push(0.0, state0.latent.clone())?;
    let mut xf = state0.active;
    let mut xg = state0.latent;
    let mut paired = xg.clone();

    for n in 0..mesh.n_macro() {
        let order = p.min(history.len() - 1);
        let poly = history.polynomial(order)?;
        let pts = mesh.micro_points(n);
        for k in 1..pts.len() {
            let (t_prev, t_next) = (pts[k - 1], pts[k]);
            let xg_used = poly.eval(t_next);
            let prev = PartitionedState::new(xf, paired, t_prev);
            let t0 = Instant::now();
            let (mut xf_new, rep) =
                implicit_euler_micro_step(system, &prev, &xg_used, t_next, t_next - t_prev, &config.newton_main)
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
                latent_used: &xg_used,
                active_next: &xf_new,
            });
            xf = xf_new;
            paired = xg_used;
        }

        let t_n = pts[pts.len() - 1];
        let t0 = Instant::now();
        let (xg_new, rep) = solve_latent(system, t_n, &xf, &xg, &config.newton_main)
            .map_err(solver_err(Phase::LatentSolve, n, pts.len() - 1, t_n))?;
        rec.timing().latent_seconds += t0.elapsed().as_secs_f64();
        rec.counters().latent_solves += 1;
        rec.counters().latent_newton_iterations += rep.iterations;
        rec.counters().macro_steps += 1;
        xg = xg_new;
        history.push(t_n, xg.clone())?;
        rec.snapshot(t_n, &xf, &xg);
    }
    Ok(rec.finish(mesh.n_macro()))
}
