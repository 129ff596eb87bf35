//! Cost model of the multirate schemes against the iteratively coupled
//! baseline, and activity numbers of the latent component.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydrate::constitutive::{relative_permeabilities, CellProps};
use crate::hydrate::kinetics::reaction_area;
use crate::hydrate::material::{MaterialTable, M_CH4, M_H2O};
use crate::report::RunReport;

/// Per-step costs and Newton-count ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkModel {
    /// Flow solve per step of the baseline, s.
    pub w_f: f64,
    /// Latent solve, s.
    pub w_g: f64,
    /// One Newton step of the flow system, s.
    pub w_f_newton: f64,
    /// Latent solve inside the compound-fast predictor, s.
    pub w_g_predictor: f64,
    /// Newton steps per flow solve in the baseline.
    pub n_it: f64,
    /// Fixed-point sweeps per baseline step.
    pub n_fp: f64,
    /// Newton steps per semi-implicit micro step, relative to `n_it`.
    pub n_s1: f64,
    /// Same for compound-fast micro steps.
    pub n_s2: f64,
    /// Same for the compound-fast predictor.
    pub n_s2_predictor: f64,
}

impl WorkModel {
    /// Calibrated work fit for the 1D benchmark: `W_g = 0.9 s`, `W_f = 1.21 s`,
    /// `n_fp = 2`, stable micro steps and a predictor as costly as one step.
    pub fn reference_fit() -> Self {
        Self {
            w_f: 1.21,
            w_g: 0.9,
            w_f_newton: 1.21,
            w_g_predictor: 0.9,
            n_it: 1.0,
            n_fp: 2.0,
            n_s1: 1.0,
            n_s2: 1.0,
            n_s2_predictor: 1.0,
        }
    }

    /// Model with a prescribed work ratio `C` and unit step costs.
    pub fn with_ratio(c: f64, n_fp: f64) -> Self {
        Self { w_f: 1.0 - c, w_g: c, w_f_newton: 1.0 - c, w_g_predictor: c, n_fp, ..Self::reference_fit() }
    }

    /// `C = W_g / (W_f + W_g)`.
    pub fn c(&self) -> f64 {
        self.w_g / (self.w_f + self.w_g)
    }

    pub fn c_p(&self) -> f64 {
        self.w_g_predictor / (self.w_f + self.w_g)
    }

    /// `Delta_p = n_s2p (1 - C) + C_p`.
    pub fn delta_p(&self) -> f64 {
        self.n_s2_predictor * (1.0 - self.c()) + self.c_p()
    }
}

/// `n_fp m / (n_s1 (1 - C) m + C)`.
pub fn speedup_semi_implicit(model: &WorkModel, m: usize) -> f64 {
    let (m, c) = (m as f64, model.c());
    model.n_fp * m / (model.n_s1 * (1.0 - c) * m + c)
}

/// `n_fp m / ((1 - C) m + C + Delta_p)`.
pub fn speedup_compound_fast(model: &WorkModel, m: usize) -> f64 {
    let (m, c) = (m as f64, model.c());
    model.n_fp * m / ((1.0 - c) * m + c + model.delta_p())
}

/// Consolidation and reaction coefficients of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityNumbers {
    pub c_v: f64,
    pub c_r: f64,
    /// Bulk storativity, 1/Pa.
    pub storativity: f64,
    /// Bulk compressibility `K_sh / (1 - alpha)`, 1/Pa.
    pub k_m: f64,
    pub phi_e: f64,
    pub ratio: f64,
}

/// Evaluated with the gas compressibility `1 / P_g`, and the effective gas
/// saturation `1 - S_we`.
pub fn activity_numbers(cell: &CellProps, mat: &MaterialTable) -> ActivityNumbers {
    let k_sh = mat.skeleton_compressibility(cell.s_h);
    let k_m = k_sh / (1.0 - mat.alpha_biot);
    let k_g = 1.0 / cell.p_g;
    let s_we = cell.s_we;
    let phi_e = cell.phi_e;
    let storativity = phi_e * (mat.k_water * s_we + k_g * (1.0 - s_we)) + (mat.alpha_biot - phi_e) * k_sh;
    let denom = mat.alpha_biot * mat.alpha_biot * k_m + storativity;
    let (krw, krg) = relative_permeabilities(s_we, mat);
    let mobility = krw / mat.water_viscosity(cell.t) + krg / mat.gas_viscosity(cell.t);
    let c_v = cell.kappa * mobility / denom;
    let volume_change = M_CH4 / cell.rho_g + mat.hydration_number * M_H2O / mat.rho_water - mat.m_hydrate() / mat.rho_hydrate;
    let kinetics = mat.rate_constant(cell.t) * reaction_area(phi_e, cell.s_h, mat);
    let c_r = volume_change * kinetics / denom;
    ActivityNumbers { c_v, c_r, storativity, k_m, phi_e, ratio: c_v / c_r }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerfError {
    #[error("runs are not comparable: {0} vs {1}")]
    MismatchedRuns(String, String),
    #[error("baseline report lacks {0}")]
    MissingBaselineData(&'static str),
}

/// Work model and measured speed-up of `mrt` against `baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkMeasurement {
    pub model: WorkModel,
    pub measured_speedup: f64,
    pub multirate_factor: usize,
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

pub fn measure_work(baseline: &RunReport, mrt: &RunReport) -> Result<WorkMeasurement, PerfError> {
    if baseline.fingerprint != mrt.fingerprint || baseline.t_end != mrt.t_end || baseline.micro_step != mrt.micro_step {
        return Err(PerfError::MismatchedRuns(
            format!("{} (h={}, T={})", baseline.scheme, baseline.micro_step, baseline.t_end),
            format!("{} (h={}, T={})", mrt.scheme, mrt.micro_step, mrt.t_end),
        ));
    }
    let (bc, bt) = (&baseline.counters, &baseline.timing);
    let (mc, mt) = (&mrt.counters, &mrt.timing);
    let (w_f, n_it, w_g) = if bc.flow_solves > 0 && bc.latent_solves > 0 {
        (
            bt.flow_seconds / bc.flow_solves as f64,
            bc.flow_newton_iterations as f64 / bc.flow_solves as f64,
            bt.latent_seconds / bc.latent_solves as f64,
        )
    } else {
        return Err(PerfError::MissingBaselineData("flow and latent solve timings"));
    };
    let n_fp = baseline.counters.mean_fixed_point_sweeps().unwrap_or(1.0);
    let per_micro = ratio(mc.flow_newton_iterations as f64, mc.flow_solves).unwrap_or(n_it) / n_it;
    let predictor = ratio(mc.predictor_flow_iterations as f64, mc.predictor_flow_solves).map_or(0.0, |v| v / n_it);
    let w_g_predictor = ratio(mt.predictor_latent_seconds, mc.predictor_latent_solves).unwrap_or(0.0);
    let model = WorkModel {
        w_f,
        w_g,
        w_f_newton: w_f / n_it,
        w_g_predictor,
        n_it,
        n_fp,
        n_s1: per_micro,
        n_s2: per_micro,
        n_s2_predictor: predictor,
    };
    Ok(WorkMeasurement { model, measured_speedup: bt.total_seconds / mt.total_seconds, multirate_factor: mrt.multirate_factor })
}

/// Least-squares `C` of the semi-implicit model through measured `(m, speed-up)` points.
pub fn fit_work_ratio(points: &[(usize, f64)], n_fp: f64, n_s1: f64) -> f64 {
    let cost = |c: f64| {
        let model = WorkModel { n_s1, ..WorkModel::with_ratio(c, n_fp) };
        points.iter().map(|&(m, s)| (speedup_semi_implicit(&model, m) - s).powi(2)).sum::<f64>()
    };
    // golden-section search on (0, 1); the cost is unimodal in C
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-9, 1.0 - 1e-9);
    for _ in 0..200 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if cost(x1) < cost(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    0.5 * (a + b)
}
