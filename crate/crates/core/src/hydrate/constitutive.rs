//! Closure relations: saturations, capillarity, relative permeability,
//! porosity and permeability.

use thiserror::Error;

use super::material::MaterialTable;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("volumetric strain {eps_v} closes the pore space (phi0 = {phi0})")]
pub struct UnphysicalStrain {
    pub phi0: f64,
    pub eps_v: f64,
}

/// Total porosity of a skeleton with incompressible grains whose bulk volume
/// is scaled by `1 + eps_v`.
pub fn porosity_from_strain(phi0: f64, eps_v: f64) -> Result<f64, UnphysicalStrain> {
    if !(1.0 + eps_v > 1.0 - phi0) {
        return Err(UnphysicalStrain { phi0, eps_v });
    }
    // same as 1 - (1 - phi0) / (1 + eps_v), exact at eps_v = 0
    Ok((phi0 + eps_v) / (1.0 + eps_v))
}

/// `kappa0 (1 - S_h)^exponent`.
pub fn permeability_scaling(kappa0: f64, s_h: f64, exponent: f64) -> f64 {
    kappa0 * (1.0 - s_h).max(0.0).powf(exponent)
}

/// Kozeny-Carman ratio `K(phi) / K(phi0)` with `K = phi^3 / (1 - phi)^2`.
pub fn kozeny_carman_ratio(phi: f64, phi0: f64) -> f64 {
    let kc = |p: f64| p * p * p / ((1.0 - p) * (1.0 - p));
    kc(phi) / kc(phi0)
}

/// Half-width of the quadratic blend that rounds off the `[0, 1]` clamp.
const CLAMP_BLEND: f64 = 0.01;

/// `s.clamp(0, 1)` with continuous slope: quadratic within `CLAMP_BLEND` of
/// either end point. The kink of a hard clamp stalls Newton when a cell
/// first desaturates.
pub fn smooth_unit_clamp(s: f64) -> f64 {
    let d = CLAMP_BLEND;
    if s >= 1.0 + d {
        1.0
    } else if s > 1.0 - d {
        s - (s - 1.0 + d).powi(2) / (4.0 * d)
    } else if s >= d {
        s
    } else if s > -d {
        (s + d).powi(2) / (4.0 * d)
    } else {
        0.0
    }
}

/// Water saturation of the mobile pore space, normalized by the residuals.
pub fn effective_water_saturation(s_w: f64, s_h: f64, mat: &MaterialTable) -> f64 {
    let mobile = (1.0 - s_h).max(1e-12);
    smooth_unit_clamp((s_w / mobile - mat.s_wr) / (1.0 - mat.s_wr - mat.s_gr))
}

/// Below this effective saturation the Brooks-Corey curve is continued linearly.
const PC_KNEE: f64 = 0.01;

/// Brooks-Corey `P_entry S_we^(-1/lambda)`, linear below `PC_KNEE`.
pub fn capillary_pressure(s_we: f64, mat: &MaterialTable) -> f64 {
    let e = -1.0 / mat.lambda_bc;
    if s_we >= PC_KNEE {
        mat.p_entry * s_we.powf(e)
    } else {
        let p_knee = mat.p_entry * PC_KNEE.powf(e);
        let slope = mat.p_entry * e * PC_KNEE.powf(e - 1.0);
        p_knee + slope * (s_we - PC_KNEE)
    }
}

/// Brooks-Corey `(k_rw, k_rg)`.
pub fn relative_permeabilities(s_we: f64, mat: &MaterialTable) -> (f64, f64) {
    let l = mat.lambda_bc;
    let krw = s_we.powf((2.0 + 3.0 * l) / l);
    let krg = (1.0 - s_we).powi(2) * (1.0 - s_we.powf((2.0 + l) / l));
    (krw, krg)
}

/// Derived quantities of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProps {
    pub p_g: f64,
    pub s_w: f64,
    pub s_h: f64,
    pub s_g: f64,
    pub t: f64,
    pub s_we: f64,
    pub p_c: f64,
    pub p_w: f64,
    pub phi: f64,
    pub phi_e: f64,
    pub kappa: f64,
    pub rho_g: f64,
    pub mob_w: f64,
    pub mob_g: f64,
    pub k_eff: f64,
    /// Saturation-weighted pore pressure `S_g P_g + S_w P_w`.
    pub p_eff: f64,
}

impl CellProps {
    pub fn new(p_g: f64, s_w: f64, s_h: f64, t: f64, eps_v: f64, mat: &MaterialTable) -> Result<Self, UnphysicalStrain> {
        let phi = porosity_from_strain(mat.phi0, eps_v)?;
        Ok(Self::with_porosity(p_g, s_w, s_h, t, phi, mat))
    }

    pub fn with_porosity(p_g: f64, s_w: f64, s_h: f64, t: f64, phi: f64, mat: &MaterialTable) -> Self {
        let s_g = 1.0 - s_w - s_h;
        let s_we = effective_water_saturation(s_w, s_h, mat);
        let p_c = capillary_pressure(s_we, mat);
        let p_w = p_g - p_c;
        let kappa = permeability_scaling(mat.kappa0, s_h, mat.perm_exponent) * kozeny_carman_ratio(phi, mat.phi0);
        let (krw, krg) = relative_permeabilities(s_we, mat);
        let k_eff = phi * (s_g * mat.gas_conductivity(t) + s_w * mat.water_conductivity(t) + s_h * mat.k_hydrate)
            + (1.0 - phi) * mat.k_soil;
        Self {
            p_g,
            s_w,
            s_h,
            s_g,
            t,
            s_we,
            p_c,
            p_w,
            phi,
            phi_e: phi * (1.0 - s_h),
            kappa,
            rho_g: mat.gas_density(p_g, t),
            mob_w: krw / mat.water_viscosity(t),
            mob_g: krg / mat.gas_viscosity(t),
            k_eff,
            p_eff: s_g * p_g + s_w * p_w,
        }
    }
}
