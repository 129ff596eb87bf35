//! Monolithic implicit Euler reference.

use std::time::Instant;

use super::{initialize, solver_err, MicroStepRecord, Observer, Phase, Recorder, SchemeConfig, SchemeError};
use crate::dae::{MonolithicProblem, PartitionedState, PartitionedSystem};
use crate::mesh::TimeMesh;
use crate::newton::newton_solve;
use crate::report::RunReport;

pub fn march_fully_implicit<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
) -> Result<RunReport, SchemeError> {
    march_fully_implicit_observed(system, mesh, config, &mut |_| {})
}

/// Solves `[A(x) - A_prev - h F; G] = 0` for `(X_F, X_G)` at every micro point.
pub fn march_fully_implicit_observed<S: PartitionedSystem + ?Sized>(
    system: &S,
    mesh: &TimeMesh,
    config: &SchemeConfig,
    observer: &mut Observer<'_>,
) -> Result<RunReport, SchemeError> {
    let mut rec = Recorder::new(system, mesh, config, None);
    let mut state = initialize(system, config, &mut rec)?;

    for n in 0..mesh.n_macro() {
        let pts = mesh.micro_points(n);
        for k in 1..pts.len() {
            let (t_prev, t_next) = (pts[k - 1], pts[k]);
            let t0 = Instant::now();
            let problem = MonolithicProblem::new(system, &state, t_next, t_next - t_prev)
                .map_err(|e| solver_err(Phase::Monolithic, n, k, t_next)(e.into()))?;
            let guess = problem.pack(&state.active, &state.latent);
            let (x, rep) =
                newton_solve(&problem, &guess, &config.newton_main).map_err(solver_err(Phase::Monolithic, n, k, t_next))?;
            let (mut xf, xg) = problem.unpack(&x);
            rec.timing().monolithic_seconds += t0.elapsed().as_secs_f64();
            rec.clip(system, &mut xf);
            let c = rec.counters();
            c.monolithic_solves += 1;
            c.monolithic_iterations += rep.iterations;
            c.micro_steps += 1;
            observer(&MicroStepRecord {
                t_prev,
                t_next,
                prev_active: &state.active,
                prev_latent: &state.latent,
                latent_used: &xg,
                active_next: &xf,
            });
            state = PartitionedState::new(xf, xg, t_next);
        }
        rec.counters().macro_steps += 1;
        rec.snapshot(state.time, &state.active, &state.latent);
    }
    Ok(rec.finish(mesh.n_macro()))
}
