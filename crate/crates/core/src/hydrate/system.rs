//! The depressurized consolidation benchmark as a partitioned system.
//!
//! Active unknowns are `[P_g, S_w, S_h, T]` per cell, latent unknowns the
//! vertical nodal displacements.

use serde::{Deserialize, Serialize};

use super::constitutive::CellProps;
use super::flow::{assemble_flow_rhs, cell_accumulation, Boundary, FlowBoundaries, FlowTerms, Grid, NEQ};
use super::geomech::{assemble_geomech, effective_pore_pressure, element_strains, geomech_jacobian, GeomechLoad};
use super::material::MaterialTable;
use crate::dae::{CoupledLayout, PartitionedState, PartitionedSystem};
use crate::linalg::BandedMatrix;
use crate::newton::EvalError;

/// Which boundary data the sample sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Initial pressure held on top, `p_bottom` on the bottom.
    Depressurized,
    /// No flow anywhere.
    Sealed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Test1Config {
    pub cells: usize,
    pub length: f64,
    pub p_initial: f64,
    pub s_w_initial: f64,
    pub s_h_initial: f64,
    pub t_initial: f64,
    pub p_bottom: f64,
    /// Compressive vertical stress on the top boundary, Pa.
    pub top_load: f64,
    pub gravity: bool,
    pub boundaries: BoundaryKind,
    pub material: MaterialTable,
}

impl Default for Test1Config {
    fn default() -> Self {
        Self {
            cells: 200,
            length: 1.0,
            p_initial: 10e6,
            s_w_initial: 0.6,
            s_h_initial: 0.4,
            t_initial: 283.15,
            p_bottom: 6e6,
            top_load: 1e6,
            gravity: false,
            boundaries: BoundaryKind::Depressurized,
            material: MaterialTable::default(),
        }
    }
}

impl Test1Config {
    /// Sealed, unloaded sample at the hydrate equilibrium pressure.
    pub fn equilibrium(cells: usize) -> Self {
        let material = MaterialTable::default();
        let t = 283.15;
        Self {
            cells,
            p_initial: material.equilibrium_pressure(t),
            t_initial: t,
            top_load: 0.0,
            boundaries: BoundaryKind::Sealed,
            material,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.material.validate()?;
        if self.cells < 2 || !(self.length > 0.0) {
            return Err("need at least two cells and a positive length".into());
        }
        let (s_w, s_h) = (self.s_w_initial, self.s_h_initial);
        if !(s_h >= 0.0 && s_w >= 0.0 && s_w + s_h <= 1.0) {
            return Err("initial saturations must be non-negative and sum to at most 1".into());
        }
        if !(self.p_initial > 0.0 && self.p_bottom > 0.0 && self.t_initial > 0.0) {
            return Err("pressures and temperature must be positive".into());
        }
        Ok(())
    }
}

pub struct HydrateSystem {
    config: Test1Config,
    grid: Grid,
    boundaries: FlowBoundaries,
    p_eff0: Vec<f64>,
    active_weights: Vec<f64>,
    active_scales: Vec<f64>,
}

/// Variable scales: pressure, saturations, temperature, displacement.
const P_SCALE: f64 = 1e6;
const U_SCALE: f64 = 1e-3;
/// Largest admissible hydrate saturation.
const S_H_MAX: f64 = 1.0 - 1e-6;

pub fn build_test1_system(config: Test1Config) -> Result<HydrateSystem, String> {
    config.validate()?;
    let n = config.cells;
    let mat = &config.material;
    let grid = Grid::new(n, config.length);
    let boundaries = match config.boundaries {
        BoundaryKind::Sealed => FlowBoundaries { bottom: Boundary::Sealed, top: Boundary::Sealed },
        BoundaryKind::Depressurized => FlowBoundaries {
            bottom: Boundary::Dirichlet { p_g: config.p_bottom, s_w: None, s_h: None, t: config.t_initial },
            top: Boundary::Dirichlet {
                p_g: config.p_initial,
                s_w: Some(config.s_w_initial),
                s_h: Some(config.s_h_initial),
                t: config.t_initial,
            },
        },
    };
    let p_eff0 = vec![effective_pore_pressure(config.p_initial, config.s_w_initial, config.s_h_initial, mat); n];
    let w_mass = 1.0 / (mat.phi0 * mat.rho_water);
    let w_energy = 1.0 / (mat.phi0 * mat.rho_water * mat.cp_water);
    let active_weights = (0..n).flat_map(|_| [w_mass, w_mass, w_mass, w_energy]).collect();
    let active_scales = (0..n).flat_map(|_| [P_SCALE, 1.0, 1.0, 1.0]).collect();
    Ok(HydrateSystem { config, grid, boundaries, p_eff0, active_weights, active_scales })
}

impl HydrateSystem {
    pub fn config(&self) -> &Test1Config {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn material(&self) -> &MaterialTable {
        &self.config.material
    }

    pub fn boundaries(&self) -> &FlowBoundaries {
        &self.boundaries
    }

    pub fn cell_props(&self, xf: &[f64], xg: &[f64]) -> Result<Vec<CellProps>, EvalError> {
        let mat = &self.config.material;
        element_strains(&self.grid, xg)
            .iter()
            .enumerate()
            .map(|(i, &eps)| {
                let x = &xf[NEQ * i..NEQ * i + NEQ];
                CellProps::new(x[0], x[1], x[2], x[3], eps, mat).map_err(|e| EvalError(format!("cell {i}: {e}")))
            })
            .collect()
    }

    pub fn flow_terms(&self, xf: &[f64], xg: &[f64]) -> Result<FlowTerms, EvalError> {
        let cells = self.cell_props(xf, xg)?;
        assemble_flow_rhs(&self.grid, &cells, &self.boundaries, self.config.gravity, &self.config.material)
    }

    fn geomech_inputs(&self, xf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mat = &self.config.material;
        xf.chunks_exact(NEQ).map(|x| (x[2], effective_pore_pressure(x[0], x[1], x[2], mat))).unzip()
    }

    fn geomech_load<'a>(&'a self, s_h: &'a [f64], p_eff: &'a [f64]) -> GeomechLoad<'a> {
        GeomechLoad {
            s_h,
            p_eff,
            p_eff0: &self.p_eff0,
            top_load: self.config.top_load,
            reference_modulus: self.config.material.oedometric_modulus(self.config.s_h_initial),
        }
    }

    /// Per-cell `[P_g, S_w, S_h, T]` of an active vector.
    pub fn unpack_cells(xf: &[f64]) -> impl Iterator<Item = &[f64]> {
        xf.chunks_exact(NEQ)
    }
}

impl PartitionedSystem for HydrateSystem {
    fn active_dim(&self) -> usize {
        NEQ * self.config.cells
    }

    fn latent_dim(&self) -> usize {
        self.config.cells + 1
    }

    fn eval_active(&self, _t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        out.copy_from_slice(&self.flow_terms(xf, xg)?.rhs);
        Ok(())
    }

    fn eval_latent(&self, _t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let (s_h, p_eff) = self.geomech_inputs(xf);
        assemble_geomech(&self.grid, &self.geomech_load(&s_h, &p_eff), xg, &self.config.material, out)
    }

    fn accumulation(&self, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (i, c) in self.cell_props(xf, xg)?.iter().enumerate() {
            out[NEQ * i..NEQ * i + NEQ].copy_from_slice(&cell_accumulation(c, &self.config.material));
        }
        Ok(())
    }

    fn initial_state(&self) -> PartitionedState {
        let c = &self.config;
        let cell = [c.p_initial, c.s_w_initial, c.s_h_initial, c.t_initial];
        let active = (0..c.cells).flat_map(|_| cell).collect();
        PartitionedState::new(active, vec![0.0; c.cells + 1], 0.0)
    }

    fn active_weights(&self) -> Vec<f64> {
        self.active_weights.clone()
    }

    fn latent_weights(&self) -> Vec<f64> {
        vec![1e-6; self.latent_dim()]
    }

    fn active_scales(&self) -> Vec<f64> {
        self.active_scales.clone()
    }

    fn latent_scales(&self) -> Vec<f64> {
        vec![U_SCALE; self.latent_dim()]
    }

    fn active_bandwidth(&self) -> (usize, usize) {
        (2 * NEQ - 1, 2 * NEQ - 1)
    }

    fn latent_bandwidth(&self) -> (usize, usize) {
        (1, 1)
    }

    /// `[u_0, cell_0, u_1, cell_1, ..., u_N]`. A cell couples to its
    /// neighbours and, through their porosities, to nodes `i - 1 ..= i + 2`.
    fn coupled_layout(&self) -> Option<CoupledLayout> {
        let n = self.config.cells;
        let nf = NEQ * n;
        let mut order = Vec::with_capacity(nf + n + 1);
        for i in 0..n {
            order.push(nf + i);
            order.extend(NEQ * i..NEQ * i + NEQ);
        }
        order.push(nf + n);
        let band = 2 * NEQ + 1;
        Some(CoupledLayout { order, kl: band, ku: band })
    }

    fn latent_jacobian(&self, _t: f64, xf: &[f64], _xg: &[f64]) -> Option<Result<BandedMatrix, EvalError>> {
        let (s_h, p_eff) = self.geomech_inputs(xf);
        Some(Ok(geomech_jacobian(&self.grid, &self.geomech_load(&s_h, &p_eff), &self.config.material)))
    }

    fn clip_active(&self, xf: &mut [f64]) -> f64 {
        let s_wr = self.config.material.s_wr;
        let mut worst: f64 = 0.0;
        for x in xf.chunks_exact_mut(NEQ) {
            let s_h = x[2].clamp(0.0, S_H_MAX);
            let s_w = x[1].clamp(s_wr.min(1.0 - s_h), 1.0 - s_h);
            worst = worst.max((s_h - x[2]).abs()).max((s_w - x[1]).abs());
            x[1] = s_w;
            x[2] = s_h;
        }
        worst
    }

    fn fingerprint(&self) -> String {
        format!("hydrate1d {:?}", self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::solve_latent;
    use crate::newton::NewtonSettings;

    #[test]
    fn dimensions_and_layout() {
        let sys = build_test1_system(Test1Config::default()).unwrap();
        assert_eq!(sys.active_dim(), 800);
        assert_eq!(sys.latent_dim(), 201);
        assert!(sys.coupled_layout().unwrap().validate(1001));
        let s = sys.initial_state();
        assert_eq!(&s.active[..4], &[10e6, 0.6, 0.4, 283.15]);
    }

    #[test]
    fn initial_latent_solve_gives_uniform_compaction() {
        let sys = build_test1_system(Test1Config::default()).unwrap();
        let s = sys.initial_state();
        let (u, rep) = solve_latent(&sys, 0.0, &s.active, &s.latent, &NewtonSettings::main()).unwrap();
        assert!(rep.converged);
        let strain = -1e6 / sys.material().oedometric_modulus(0.4);
        let top = *u.last().unwrap();
        assert!(((top - strain) / strain).abs() <= 1e-3, "{top} vs {strain}");
    }

    #[test]
    fn clipping_reports_the_largest_change() {
        let sys = build_test1_system(Test1Config { cells: 2, ..Test1Config::default() }).unwrap();
        let mut x = vec![1e7, 0.7, 0.4, 283.0, 1e7, 0.5, -0.01, 283.0];
        let clip = sys.clip_active(&mut x);
        assert!((clip - 0.1).abs() < 1e-12);
        assert_eq!(x[1], 0.6);
        assert_eq!(x[6], 0.0);
    }
}
