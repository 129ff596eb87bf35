//! Uniaxial poroelastic momentum balance on piecewise-linear elements.
//!
//! Node `0` sits on the fixed bottom and node `N` carries the top load. With
//! one element per flow cell, element `i` spans nodes `i` and `i + 1`, and its
//! total stress (tension positive) is measured from the initial state:
//! `sigma_i = M(S_h) eps_i - alpha (P_eff - P_eff0)`.

use super::constitutive::{capillary_pressure, effective_water_saturation};
use super::flow::Grid;
use super::material::MaterialTable;
use crate::linalg::BandedMatrix;
use crate::newton::EvalError;

/// Saturation-weighted pore pressure from the primary unknowns.
pub fn effective_pore_pressure(p_g: f64, s_w: f64, s_h: f64, mat: &MaterialTable) -> f64 {
    let p_w = p_g - capillary_pressure(effective_water_saturation(s_w, s_h, mat), mat);
    (1.0 - s_w - s_h) * p_g + s_w * p_w
}

pub fn element_strains(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let dz = grid.dz();
    u.windows(2).map(|w| (w[1] - w[0]) / dz).collect()
}

/// Inputs of the momentum balance taken from the active unknowns, per element.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomechLoad<'a> {
    pub s_h: &'a [f64],
    pub p_eff: &'a [f64],
    pub p_eff0: &'a [f64],
    /// Compressive stress applied on the top boundary, Pa.
    pub top_load: f64,
    /// Modulus used to scale the Dirichlet row of node 0.
    pub reference_modulus: f64,
}

/// Nodal residuals; every row is a stress in Pa.
pub fn assemble_geomech(grid: &Grid, load: &GeomechLoad<'_>, u: &[f64], mat: &MaterialTable, out: &mut [f64]) -> Result<(), EvalError> {
    let n = grid.cells;
    assert_eq!(u.len(), n + 1);
    assert_eq!(out.len(), n + 1);
    let dz = grid.dz();
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            let eps = (u[i + 1] - u[i]) / dz;
            mat.oedometric_modulus(load.s_h[i]) * eps - mat.alpha_biot * (load.p_eff[i] - load.p_eff0[i])
        })
        .collect();
    out[0] = load.reference_modulus * u[0] / dz;
    for j in 1..n {
        out[j] = sigma[j - 1] - sigma[j];
    }
    out[n] = sigma[n - 1] + load.top_load;
    if let Some(j) = out.iter().position(|v| !v.is_finite()) {
        return Err(EvalError(format!("non-finite momentum residual at node {j}")));
    }
    Ok(())
}

/// `d(residual)/du`, tridiagonal and independent of `u`.
pub fn geomech_jacobian(grid: &Grid, load: &GeomechLoad<'_>, mat: &MaterialTable) -> BandedMatrix {
    let n = grid.cells;
    let dz = grid.dz();
    let k: Vec<f64> = load.s_h.iter().map(|&s| mat.oedometric_modulus(s) / dz).collect();
    let mut jac = BandedMatrix::zeros(n + 1, 1, 1);
    jac.set(0, 0, load.reference_modulus / dz);
    for j in 1..n {
        jac.set(j, j - 1, -k[j - 1]);
        jac.set(j, j, k[j - 1] + k[j]);
        jac.set(j, j + 1, -k[j]);
    }
    jac.set(n, n - 1, -k[n - 1]);
    jac.set(n, n, k[n - 1]);
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_linear_banded;

    fn solve(grid: &Grid, load: &GeomechLoad<'_>, mat: &MaterialTable) -> Vec<f64> {
        let n = grid.cells + 1;
        let mut r = vec![0.0; n];
        assemble_geomech(grid, load, &vec![0.0; n], mat, &mut r).unwrap();
        let du = solve_linear_banded(&geomech_jacobian(grid, load, mat), &r).unwrap();
        du.iter().map(|v| -v).collect()
    }

    fn uniform_load<'a>(s_h: &'a [f64], zeros: &'a [f64], top_load: f64) -> GeomechLoad<'a> {
        GeomechLoad { s_h, p_eff: zeros, p_eff0: zeros, top_load, reference_modulus: 2e8 }
    }

    #[test]
    fn uniform_load_matches_closed_form() {
        let mat = MaterialTable::default();
        let grid = Grid::new(200, 1.0);
        let s_h = vec![0.4; 200];
        let zeros = vec![0.0; 200];
        let u = solve(&grid, &uniform_load(&s_h, &zeros, 1e6), &mat);
        let strain = -1e6 / mat.oedometric_modulus(0.4);
        for (j, &v) in u.iter().enumerate() {
            let exact = strain * j as f64 * grid.dz();
            assert!((v - exact).abs() <= 1e-10 * strain.abs(), "node {j}: {v} vs {exact}");
        }
    }

    #[test]
    fn unloaded_sample_does_not_move() {
        let mat = MaterialTable::default();
        let grid = Grid::new(20, 1.0);
        let s_h = vec![0.4; 20];
        let zeros = vec![0.0; 20];
        assert!(solve(&grid, &uniform_load(&s_h, &zeros, 0.0), &mat).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stiffening_with_hydrate_scales_compaction() {
        let mat = MaterialTable::default();
        let grid = Grid::new(50, 1.0);
        let zeros = vec![0.0; 50];
        let (free, laden) = (vec![0.0; 50], vec![0.4; 50]);
        let top_free = *solve(&grid, &uniform_load(&free, &zeros, 1e6), &mat).last().unwrap();
        let top_laden = *solve(&grid, &uniform_load(&laden, &zeros, 1e6), &mat).last().unwrap();
        assert!((top_laden / top_free - 160.0 / 260.0).abs() < 1e-12);
    }

    #[test]
    fn depressurization_adds_compaction() {
        let mat = MaterialTable::default();
        let grid = Grid::new(10, 1.0);
        let s_h = vec![0.4; 10];
        let p0 = vec![10e6; 10];
        let p = vec![8e6; 10];
        let load = GeomechLoad { s_h: &s_h, p_eff: &p, p_eff0: &p0, top_load: 1e6, reference_modulus: 2e8 };
        let u = solve(&grid, &load, &mat);
        let strain = (mat.alpha_biot * -2e6 - 1e6) / mat.oedometric_modulus(0.4);
        assert!((u[10] - strain).abs() < 1e-12);
    }

    #[test]
    fn effective_pressure_of_water_saturated_pores() {
        let mat = MaterialTable::default();
        // mobile pores full of water: P_w = P_g - P_entry
        let p = effective_pore_pressure(10e6, 0.6, 0.4, &mat);
        assert!((p - 0.6 * (10e6 - 50e3)).abs() < 1e-6);
    }
}
