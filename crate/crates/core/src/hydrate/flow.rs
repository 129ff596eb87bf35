//! Cell-centred finite volumes for the two mass balances of the mobile
//! components, the hydrate balance and the energy balance.
//!
//! `z` points upward from the fixed bottom. Face transmissibilities use the
//! harmonic mean of the cell permeabilities; mobilities, densities and
//! enthalpies are taken from the upstream cell.

use serde::{Deserialize, Serialize};

use super::constitutive::CellProps;
use super::kinetics::{kinetic_rates, KineticsResult};
use super::material::MaterialTable;
use crate::newton::EvalError;

/// Number of balance equations (and active unknowns) per cell.
pub const NEQ: usize = 4;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub cells: usize,
    /// m
    pub length: f64,
}

impl Grid {
    pub fn new(cells: usize, length: f64) -> Self {
        assert!(cells > 0 && length > 0.0, "grid needs cells and a positive length");
        Self { cells, length }
    }

    pub fn dz(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dz()
    }
}

/// State imposed just outside a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Boundary {
    /// No flow of mass or heat.
    Sealed,
    /// Fixed gas pressure. Saturations default to the adjacent cell's; the
    /// temperature applies to inflowing fluid.
    Dirichlet { p_g: f64, s_w: Option<f64>, s_h: Option<f64>, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBoundaries {
    pub bottom: Boundary,
    pub top: Boundary,
}

/// Flux assembly output, per unit cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTerms {
    /// `F` per cell in `[CH4, H2O, hydrate, energy]` order, per unit volume.
    pub rhs: Vec<f64>,
    /// Net inflow through both boundary faces, per equation.
    pub boundary_inflow: [f64; NEQ],
    /// Sum of `source * dz` over the cells, per equation.
    pub source_total: [f64; NEQ],
    pub kinetics: Vec<KineticsResult>,
}

/// Upward face fluxes of (CH4 mass, H2O mass, energy) from `lo` to `hi`.
/// `trans` is `kappa_face / distance`, `k_heat` is conductivity over distance.
fn face_flux(lo: &CellProps, hi: &CellProps, trans: f64, k_heat: f64, dz: f64, g: f64, mat: &MaterialTable) -> [f64; 3] {
    let rho_w = mat.rho_water;
    let rho_g_face = 0.5 * (lo.rho_g + hi.rho_g);
    // Darcy velocities (volumetric), positive upward.
    let pot_w = hi.p_w - lo.p_w + rho_w * g * dz;
    let pot_g = hi.p_g - lo.p_g + rho_g_face * g * dz;
    let (up_w, up_g) = (if pot_w <= 0.0 { lo } else { hi }, if pot_g <= 0.0 { lo } else { hi });
    let v_w = -trans * up_w.mob_w * pot_w;
    let v_g = -trans * up_g.mob_g * pot_g;
    let m_w = rho_w * v_w;
    let m_g = up_g.rho_g * v_g;
    let energy = m_w * mat.cp_water * (up_w.t - mat.t_ref) + m_g * mat.cp_gas * (up_g.t - mat.t_ref)
        - k_heat * (hi.t - lo.t);
    [m_g, m_w, energy]
}

/// Ghost cell outside a Dirichlet face.
fn ghost(cell: &CellProps, p_g: f64, s_w: Option<f64>, s_h: Option<f64>, t: f64, mat: &MaterialTable) -> CellProps {
    CellProps::with_porosity(p_g, s_w.unwrap_or(cell.s_w), s_h.unwrap_or(cell.s_h), t, cell.phi, mat)
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Right-hand side `F` of `d/dt A = F` for all cells.
pub fn assemble_flow_rhs(
    grid: &Grid,
    cells: &[CellProps],
    boundaries: &FlowBoundaries,
    gravity: bool,
    mat: &MaterialTable,
) -> Result<FlowTerms, EvalError> {
    let n = grid.cells;
    assert_eq!(cells.len(), n, "one CellProps per cell");
    let dz = grid.dz();
    let g = if gravity { GRAVITY } else { 0.0 };
    let mut rhs = vec![0.0; NEQ * n];
    let mut boundary_inflow = [0.0; NEQ];
    let mut source_total = [0.0; NEQ];

    // interior faces
    for i in 0..n.saturating_sub(1) {
        let (lo, hi) = (&cells[i], &cells[i + 1]);
        let trans = harmonic(lo.kappa, hi.kappa) / dz;
        let k_heat = harmonic(lo.k_eff, hi.k_eff) / dz;
        let f = face_flux(lo, hi, trans, k_heat, dz, g, mat);
        for (e, q) in [(0, f[0]), (1, f[1]), (3, f[2])] {
            rhs[NEQ * i + e] -= q / dz;
            rhs[NEQ * (i + 1) + e] += q / dz;
        }
    }

    // boundary faces, conduction excluded (adiabatic)
    let half = 0.5 * dz;
    if let Boundary::Dirichlet { p_g, s_w, s_h, t } = boundaries.bottom {
        let c = &cells[0];
        let gh = ghost(c, p_g, s_w, s_h, t, mat);
        let f = face_flux(&gh, c, c.kappa / half, 0.0, half, g, mat);
        for (e, q) in [(0, f[0]), (1, f[1]), (3, f[2])] {
            rhs[e] += q / dz;
            boundary_inflow[e] += q;
        }
    }
    if let Boundary::Dirichlet { p_g, s_w, s_h, t } = boundaries.top {
        let c = &cells[n - 1];
        let gh = ghost(c, p_g, s_w, s_h, t, mat);
        let f = face_flux(c, &gh, c.kappa / half, 0.0, half, g, mat);
        for (e, q) in [(0, f[0]), (1, f[1]), (3, f[2])] {
            rhs[NEQ * (n - 1) + e] -= q / dz;
            boundary_inflow[e] -= q;
        }
    }

    let mut kinetics = Vec::with_capacity(n);
    for (i, c) in cells.iter().enumerate() {
        let k = kinetic_rates(c, mat);
        let s = [k.g_ch4, k.g_h2o, k.g_h, k.q_h];
        for e in 0..NEQ {
            rhs[NEQ * i + e] += s[e];
            source_total[e] += s[e] * dz;
        }
        kinetics.push(k);
    }

    if let Some(bad) = rhs.iter().position(|v| !v.is_finite()) {
        return Err(EvalError(format!("non-finite flow residual in cell {}", bad / NEQ)));
    }
    Ok(FlowTerms { rhs, boundary_inflow, source_total, kinetics })
}

/// Stored quantities `[phi rho_g S_g, phi rho_w S_w, phi rho_h S_h, energy]` of one cell.
pub fn cell_accumulation(c: &CellProps, mat: &MaterialTable) -> [f64; NEQ] {
    let dt = c.t - mat.t_ref;
    let pore = c.rho_g * c.s_g * mat.cv_gas() + mat.rho_water * c.s_w * mat.cv_water()
        + mat.rho_hydrate * c.s_h * mat.cv_hydrate;
    [
        c.phi * c.rho_g * c.s_g,
        c.phi * mat.rho_water * c.s_w,
        c.phi * mat.rho_hydrate * c.s_h,
        ((1.0 - c.phi) * mat.rho_soil * mat.cv_soil + c.phi * pore) * dt,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, p: f64, s_w: f64, s_h: f64, t: f64, mat: &MaterialTable) -> Vec<CellProps> {
        vec![CellProps::with_porosity(p, s_w, s_h, t, mat.phi0, mat); n]
    }

    #[test]
    fn equilibrium_state_is_stationary() {
        let mat = MaterialTable::default();
        let t = 283.15;
        let cells = uniform(10, mat.equilibrium_pressure(t), 0.5, 0.3, t, &mat);
        let sealed = FlowBoundaries { bottom: Boundary::Sealed, top: Boundary::Sealed };
        let terms = assemble_flow_rhs(&Grid::new(10, 1.0), &cells, &sealed, false, &mat).unwrap();
        assert!(terms.rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_cell_single_phase_flux() {
        // Hydrate-free, fully water-saturated: only water moves, and the face
        // flux reduces to kappa0 / mu_w * dP / dx.
        let mat = MaterialTable::default();
        let t = 283.15;
        let grid = Grid::new(2, 0.2);
        let dx = grid.dz();
        let cells = vec![
            CellProps::with_porosity(7e6, 1.0, 0.0, t, mat.phi0, &mat),
            CellProps::with_porosity(7.5e6, 1.0, 0.0, t, mat.phi0, &mat),
        ];
        let mut no_kinetics = mat.clone();
        no_kinetics.area_scale = 0.0;
        let sealed = FlowBoundaries { bottom: Boundary::Sealed, top: Boundary::Sealed };
        let terms = assemble_flow_rhs(&grid, &cells, &sealed, false, &no_kinetics).unwrap();
        let expected_velocity = mat.kappa0 / mat.water_viscosity(t) * 0.5e6 / dx;
        // water moves downward into cell 0
        let mass_into_0 = terms.rhs[1] * dx;
        assert!((mass_into_0 - mat.rho_water * expected_velocity).abs() <= 1e-12 * mass_into_0.abs());
        assert_eq!(terms.rhs[1], -terms.rhs[NEQ + 1]);
        assert_eq!(terms.rhs[0], 0.0);
    }

    #[test]
    fn interior_fluxes_telescope() {
        let mat = MaterialTable::default();
        let grid = Grid::new(6, 1.0);
        let cells: Vec<_> = (0..6)
            .map(|i| CellProps::with_porosity(6e6 + 5e5 * i as f64, 0.5 - 0.02 * i as f64, 0.35, 283.0 - i as f64, 0.3, &mat))
            .collect();
        let sealed = FlowBoundaries { bottom: Boundary::Sealed, top: Boundary::Sealed };
        let terms = assemble_flow_rhs(&grid, &cells, &sealed, true, &mat).unwrap();
        for e in 0..NEQ {
            let total: f64 = (0..6).map(|i| terms.rhs[NEQ * i + e] * grid.dz()).sum();
            let scale = (0..6).map(|i| terms.rhs[NEQ * i + e].abs() * grid.dz()).sum::<f64>() + terms.source_total[e].abs();
            assert!((total - terms.source_total[e]).abs() <= 1e-12 * scale, "equation {e}");
        }
    }

    #[test]
    fn depressurized_bottom_drains_water() {
        let mut mat = MaterialTable::default();
        mat.area_scale = 0.0;
        let grid = Grid::new(4, 1.0);
        let cells = uniform(4, 10e6, 0.6, 0.4, 283.15, &mat);
        let bc = FlowBoundaries {
            bottom: Boundary::Dirichlet { p_g: 6e6, s_w: None, s_h: None, t: 283.15 },
            top: Boundary::Dirichlet { p_g: 10e6, s_w: Some(0.6), s_h: Some(0.4), t: 283.15 },
        };
        let terms = assemble_flow_rhs(&grid, &cells, &bc, false, &mat).unwrap();
        assert!(terms.boundary_inflow[1] < 0.0);
        assert_eq!(terms.rhs[NEQ + 1], 0.0, "interior cells see no pressure gradient yet");
    }
}
