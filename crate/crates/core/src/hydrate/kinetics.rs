//! Hydrate dissociation kinetics.
//!
//! `g_ch4 > 0` means dissociation. The hydrate source carries the opposite
//! sign so that `g_ch4 + g_h2o + g_h = 0`.

use super::constitutive::CellProps;
use super::material::{MaterialTable, M_CH4, M_H2O};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KineticsResult {
    /// kg/(m^3 s)
    pub g_ch4: f64,
    pub g_h2o: f64,
    pub g_h: f64,
    /// W/m^3, negative while dissociating.
    pub q_h: f64,
    /// m^2/m^3
    pub a_rs: f64,
    /// Pa
    pub p_eqb: f64,
}

/// Reaction surface area `Gamma phi_e sqrt(S_h (1 - S_h))`.
pub fn reaction_area(phi_e: f64, s_h: f64, mat: &MaterialTable) -> f64 {
    let s = s_h.clamp(0.0, 1.0);
    mat.area_scale * phi_e.max(0.0) * (s * (1.0 - s)).sqrt()
}

pub fn kinetic_rates(cell: &CellProps, mat: &MaterialTable) -> KineticsResult {
    let p_eqb = mat.equilibrium_pressure(cell.t);
    let a_rs = reaction_area(cell.phi_e, cell.s_h, mat);
    let drive = p_eqb - cell.p_g;
    let formation_blocked = drive < 0.0 && cell.s_h >= 1.0 - mat.s_wr - mat.s_gr;
    let dissociation_blocked = drive > 0.0 && cell.s_h <= 0.0;
    if drive == 0.0 || formation_blocked || dissociation_blocked {
        return KineticsResult { a_rs, p_eqb, ..Default::default() };
    }
    let g_ch4 = mat.rate_constant(cell.t) * M_CH4 * a_rs * drive;
    let g_h2o = mat.hydration_number * M_H2O / M_CH4 * g_ch4;
    let m_h = mat.m_hydrate();
    let g_h = -(m_h / M_CH4) * g_ch4;
    let q_h = g_h / m_h * mat.heat_of_dissociation(cell.t);
    KineticsResult { g_ch4, g_h2o, g_h, q_h, a_rs, p_eqb }
}
