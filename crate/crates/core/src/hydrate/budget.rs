//! Discrete balance of each conserved quantity over one implicit Euler step.

use super::flow::NEQ;
use super::system::HydrateSystem;
use crate::newton::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBudget {
    /// `I_new - I_old - h (inflow + sources)` per unit cross-section, for
    /// `[CH4, H2O, hydrate, energy]`.
    pub imbalance: [f64; NEQ],
    /// `imbalance` over the largest magnitude among the terms it combines.
    pub relative: [f64; NEQ],
}

impl StepBudget {
    pub fn worst_relative(&self) -> f64 {
        self.relative.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

fn inventories(system: &HydrateSystem, xf: &[f64], xg: &[f64]) -> Result<[f64; NEQ], EvalError> {
    use crate::dae::PartitionedSystem;
    let mut acc = vec![0.0; xf.len()];
    system.accumulation(xf, xg, &mut acc)?;
    let dz = system.grid().dz();
    let mut total = [0.0; NEQ];
    for cell in acc.chunks_exact(NEQ) {
        for e in 0..NEQ {
            total[e] += cell[e] * dz;
        }
    }
    Ok(total)
}

/// Budget of the step from `(prev_active, prev_latent)` to `active_next`
/// with the latent argument `latent_used`.
pub fn step_budget(
    system: &HydrateSystem,
    prev_active: &[f64],
    prev_latent: &[f64],
    active_next: &[f64],
    latent_used: &[f64],
    h: f64,
) -> Result<StepBudget, EvalError> {
    let old = inventories(system, prev_active, prev_latent)?;
    let new = inventories(system, active_next, latent_used)?;
    let terms = system.flow_terms(active_next, latent_used)?;
    let mut imbalance = [0.0; NEQ];
    let mut relative = [0.0; NEQ];
    for e in 0..NEQ {
        let flux = h * terms.boundary_inflow[e];
        let source = h * terms.source_total[e];
        imbalance[e] = new[e] - old[e] - flux - source;
        let scale = new[e].abs().max(old[e].abs()).max(flux.abs()).max(source.abs());
        relative[e] = if scale > 0.0 { imbalance[e] / scale } else { 0.0 };
    }
    Ok(StepBudget { imbalance, relative })
}
