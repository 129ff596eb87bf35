//! Material constants and correlations of the hydrate-bearing sediment.

use serde::{Deserialize, Serialize};

/// Universal gas constant, J/(mol K).
pub const R_UNIVERSAL: f64 = 8.314462618;
/// Molar masses, kg/mol.
pub const M_CH4: f64 = 16.04e-3;
pub const M_H2O: f64 = 18.015e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialTable {
    // thermal conductivities, W/(m K)
    pub k_hydrate: f64,
    pub k_soil: f64,
    // specific heats, J/(kg K)
    pub cp_water: f64,
    pub cv_hydrate: f64,
    pub cv_soil: f64,
    /// Methane at constant pressure; `cv_gas` follows from the ideal-gas relation.
    pub cp_gas: f64,
    // densities, kg/m^3
    pub rho_water: f64,
    pub rho_hydrate: f64,
    pub rho_soil: f64,
    /// Gas deviation factor.
    pub z_factor: f64,
    // Brooks-Corey
    pub lambda_bc: f64,
    pub p_entry: f64,
    pub s_wr: f64,
    pub s_gr: f64,
    // kinetics
    pub kr_prefactor: f64,
    pub kr_activation: f64,
    pub hydration_number: f64,
    pub peq_a: f64,
    pub peq_b: f64,
    /// Heat of dissociation coefficients, `B1 - B2 / T` in J/mol.
    pub heat_b1: f64,
    pub heat_b2: f64,
    /// Scale of the reaction surface area `Gamma phi_e sqrt(S_h (1 - S_h))`, m^2/m^3.
    pub area_scale: f64,
    // poroelasticity
    pub alpha_biot: f64,
    pub nu_sh: f64,
    /// `E_sh = e_base + e_slope * S_h`, Pa.
    pub e_base: f64,
    pub e_slope: f64,
    // reference state
    pub phi0: f64,
    pub kappa0: f64,
    /// `kappa / kappa0 = (1 - S_h)^n`; default solves `0.6^n = 0.198`.
    pub perm_exponent: f64,
    /// Water compressibility, 1/Pa (activity diagnostics only).
    pub k_water: f64,
    /// Internal energies are measured from this temperature, K.
    pub t_ref: f64,
}

impl Default for MaterialTable {
    fn default() -> Self {
        Self {
            k_hydrate: 2.1,
            k_soil: 1.9,
            cp_water: 4186.0,
            cv_hydrate: 2700.0,
            cv_soil: 800.0,
            cp_gas: 2220.0,
            rho_water: 1000.0,
            rho_hydrate: 900.0,
            rho_soil: 2100.0,
            z_factor: 1.0,
            lambda_bc: 1.2,
            p_entry: 50e3,
            s_wr: 0.05,
            s_gr: 0.02,
            kr_prefactor: 3.6e4,
            kr_activation: 9752.73,
            hydration_number: 5.75,
            peq_a: 14.17,
            peq_b: 1886.79,
            heat_b1: 56599.0,
            heat_b2: 16.744,
            area_scale: 1.0,
            alpha_biot: 0.8,
            nu_sh: 0.15,
            e_base: 160e6,
            e_slope: 250e6,
            phi0: 0.3,
            kappa0: 1e-12,
            perm_exponent: default_perm_exponent(),
            k_water: 4.5e-10,
            t_ref: 273.15,
        }
    }
}

/// `ln(0.198) / ln(0.6)`.
pub fn default_perm_exponent() -> f64 {
    0.198f64.ln() / 0.6f64.ln()
}

impl MaterialTable {
    pub fn m_hydrate(&self) -> f64 {
        M_CH4 + self.hydration_number * M_H2O
    }

    pub fn r_gas(&self) -> f64 {
        R_UNIVERSAL / M_CH4
    }

    pub fn r_water(&self) -> f64 {
        R_UNIVERSAL / M_H2O
    }

    pub fn cv_water(&self) -> f64 {
        self.cp_water + self.r_water()
    }

    pub fn cv_gas(&self) -> f64 {
        self.cp_gas - self.r_gas()
    }

    pub fn gas_density(&self, p: f64, t: f64) -> f64 {
        p / (self.z_factor * self.r_gas() * t)
    }

    pub fn gas_viscosity(&self, t: f64) -> f64 {
        10.4e-6 * ((273.15 + 162.0) / (t + 162.0)) * (t / 273.15).powf(1.5)
    }

    pub fn water_viscosity(&self, t: f64) -> f64 {
        let r = 273.15 / t;
        0.001792 * (-1.94 - 4.80 * r + 6.74 * r * r).exp()
    }

    pub fn gas_conductivity(&self, t: f64) -> f64 {
        -0.886e-2 + 0.242e-3 * t - 0.699e-6 * t * t + 0.122e-8 * t * t * t
    }

    pub fn water_conductivity(&self, t: f64) -> f64 {
        0.3834 * t.ln() - 1.581
    }

    /// Hydrate equilibrium pressure, Pa.
    pub fn equilibrium_pressure(&self, t: f64) -> f64 {
        1e6 * (self.peq_a - self.peq_b / t).exp()
    }

    /// Intrinsic rate constant, mol/(m^2 Pa s).
    pub fn rate_constant(&self, t: f64) -> f64 {
        self.kr_prefactor * (-self.kr_activation / t).exp()
    }

    /// Heat of dissociation per mole of hydrate, J/mol.
    pub fn heat_of_dissociation(&self, t: f64) -> f64 {
        self.heat_b1 - self.heat_b2 / t
    }

    pub fn youngs_modulus(&self, s_h: f64) -> f64 {
        self.e_base + self.e_slope * s_h
    }

    /// Lame parameters `(G, lambda)` of the soil-hydrate composite.
    pub fn lame(&self, s_h: f64) -> (f64, f64) {
        let e = self.youngs_modulus(s_h);
        let nu = self.nu_sh;
        (e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }

    /// Constrained (oedometric) modulus `2G + lambda`.
    pub fn oedometric_modulus(&self, s_h: f64) -> f64 {
        let (g, l) = self.lame(s_h);
        2.0 * g + l
    }

    /// Skeleton compressibility `3 (1 - 2 nu) / E`, 1/Pa.
    pub fn skeleton_compressibility(&self, s_h: f64) -> f64 {
        3.0 * (1.0 - 2.0 * self.nu_sh) / self.youngs_modulus(s_h)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("k_hydrate", self.k_hydrate),
            ("k_soil", self.k_soil),
            ("cp_water", self.cp_water),
            ("cv_hydrate", self.cv_hydrate),
            ("cv_soil", self.cv_soil),
            ("cp_gas", self.cp_gas),
            ("rho_water", self.rho_water),
            ("rho_hydrate", self.rho_hydrate),
            ("rho_soil", self.rho_soil),
            ("z_factor", self.z_factor),
            ("lambda_bc", self.lambda_bc),
            ("p_entry", self.p_entry),
            ("kr_prefactor", self.kr_prefactor),
            ("hydration_number", self.hydration_number),
            ("e_base", self.e_base),
            ("kappa0", self.kappa0),
            ("perm_exponent", self.perm_exponent),
            ("k_water", self.k_water),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.area_scale >= 0.0) {
            return Err("area_scale must be non-negative".into());
        }
        if !(self.phi0 > 0.0 && self.phi0 < 1.0) {
            return Err(format!("phi0 must lie in (0, 1), got {}", self.phi0));
        }
        if !(self.alpha_biot > 0.0 && self.alpha_biot <= 1.0) {
            return Err("alpha_biot must lie in (0, 1]".into());
        }
        if !(self.nu_sh > -1.0 && self.nu_sh < 0.5) {
            return Err("nu_sh must lie in (-1, 0.5)".into());
        }
        if !(self.s_wr >= 0.0 && self.s_gr >= 0.0 && self.s_wr + self.s_gr < 1.0) {
            return Err("residual saturations must be non-negative and sum below 1".into());
        }
        if self.cv_gas() <= 0.0 {
            return Err("cp_gas must exceed the specific gas constant".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let m = MaterialTable::default();
        assert!((m.cv_water() - (4186.0 + 8.314462618 / 18.015e-3)).abs() < 1e-9);
        assert_eq!(m.youngs_modulus(0.0), 160e6);
        assert_eq!(m.youngs_modulus(0.4), 260e6);
        assert!((m.perm_exponent - 3.1699).abs() < 1e-3);
        assert!((0.6f64.powf(m.perm_exponent) - 0.198).abs() < 1e-12);
        assert!((m.m_hydrate() - (16.04e-3 + 5.75 * 18.015e-3)).abs() < 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn equilibrium_pressure_formula() {
        let m = MaterialTable::default();
        let t = 283.15;
        let expected = 1e6 * (14.17f64 - 1886.79 / t).exp();
        assert_eq!(m.equilibrium_pressure(t), expected);
        // strictly increasing
        let mut last = 0.0;
        for i in 0..=100 {
            let p = m.equilibrium_pressure(250.0 + i as f64);
            assert!(p > last);
            last = p;
        }
        // large-T asymptote: exp(14.17) MPa
        let ratio = m.equilibrium_pressure(1e12) / (1e6 * 14.17f64.exp());
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn correlations_are_finite_on_the_working_range() {
        let m = MaterialTable::default();
        for i in 0..=50 {
            let t = 270.0 + i as f64;
            for v in [m.gas_viscosity(t), m.water_viscosity(t), m.gas_conductivity(t), m.water_conductivity(t)] {
                assert!(v.is_finite() && v > 0.0, "T={t}");
            }
        }
        // spot values: water ~1.3 mPa s and gas ~11 uPa s at 10 C
        assert!((m.water_viscosity(283.15) - 1.33e-3).abs() < 0.02e-3);
        assert!((m.gas_viscosity(283.15) - 1.073e-5).abs() < 0.01e-5);
    }

    #[test]
    fn lame_parameters_reproduce_the_modulus() {
        let m = MaterialTable::default();
        let (g, l) = m.lame(0.4);
        let e = 260e6;
        let nu = 0.15;
        assert!((g * (3.0 * l + 2.0 * g) / (l + g) - e).abs() < 1e-3);
        assert!((m.oedometric_modulus(0.4) - e * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))).abs() < 1e-3);
    }
}
