//! Material constants of (S)-mandelic acid in water and derived closures.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// g/mol
pub const MOLAR_MASS_WATER: f64 = 18.02;
/// g/mol
pub const MOLAR_MASS_SOLUTE: f64 = 152.15;
/// J/(mol K)
pub const GAS_CONSTANT: f64 = 8.314_462_618;
/// Friction prefactor of the interface drag term.
pub const FRICTION_H: f64 = 2.757;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// kJ/mol, negative
    pub delta_h: f64,
    /// J/(mol K)
    pub cp_solid: f64,
    /// J/(mol K)
    pub cp_liquid: f64,
    /// mm²/s
    pub kappa_solid: f64,
    /// mm²/s
    pub kappa_liquid: f64,
    /// mm²/s
    pub diffusivity: f64,
    /// cm/s
    pub k0: f64,
    /// J/mol, zero for a temperature-independent rate constant
    pub activation_energy: f64,
    /// g/cm³
    pub rho_solid: f64,
    /// g/cm³
    pub rho_liquid: f64,
    /// mm²/s, kinematic viscosity of the liquid
    pub viscosity: f64,
    pub epsilon_s: f64,
    /// mm
    pub w0: f64,
    /// s
    pub tau0: f64,
    pub lambda: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            delta_h: -18.5,
            cp_solid: 160.5,
            cp_liquid: 75.0,
            kappa_solid: 1.1,
            kappa_liquid: 0.146,
            diffusivity: 1.2e-3,
            k0: 1.0e-5,
            activation_energy: 0.0,
            rho_solid: 1.341,
            rho_liquid: 1.0,
            viscosity: 1.0,
            epsilon_s: 0.05,
            w0: 0.25,
            tau0: 0.02,
            lambda: 3.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa_solid", self.kappa_solid),
            ("kappa_liquid", self.kappa_liquid),
            ("diffusivity", self.diffusivity),
            ("k0", self.k0),
            ("rho_solid", self.rho_solid),
            ("rho_liquid", self.rho_liquid),
            ("w0", self.w0),
            ("tau0", self.tau0),
            ("cp_solid", self.cp_solid),
            ("cp_liquid", self.cp_liquid),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::invalid(name, format!("{v} must be positive")));
            }
        }
        if !(self.delta_h < 0.0) {
            return Err(SimError::invalid("delta_h", "crystallization enthalpy must be negative"));
        }
        if !(self.viscosity >= 0.0) {
            return Err(SimError::invalid("viscosity", "must be non-negative"));
        }
        if !(self.epsilon_s.abs() < 1.0) {
            return Err(SimError::invalid("epsilon_s", "must lie in (-1, 1)"));
        }
        Ok(())
    }

    /// mol/cm³ of solute in the crystal.
    pub fn solid_molar_density(&self) -> f64 {
        self.rho_solid / MOLAR_MASS_SOLUTE
    }

    /// J/(cm³ K)
    pub fn heat_capacity_liquid(&self) -> f64 {
        self.rho_liquid / MOLAR_MASS_WATER * self.cp_liquid
    }

    /// J/(cm³ K)
    pub fn heat_capacity_solid(&self) -> f64 {
        self.solid_molar_density() * self.cp_solid
    }

    /// Latent heat released per unit solid volume, J/cm³ (positive).
    pub fn latent_heat_volumetric(&self) -> f64 {
        -self.delta_h * 1e3 * self.solid_molar_density()
    }

    /// Saturation concentration, mol/cm³.
    pub fn c_sat(&self, t: f64) -> f64 {
        c_sat(t)
    }

    /// Growth rate constant, cm/s.
    pub fn k_growth(&self, t: f64) -> f64 {
        self.k0 * (-self.activation_energy / (GAS_CONSTANT * t)).exp()
    }
}

/// Mixture blend `((1−φ)·liquid + (1+φ)·solid)/2`.
#[inline]
pub fn blend(phi: f64, liquid: f64, solid: f64) -> f64 {
    0.5 * ((1.0 - phi) * liquid + (1.0 + phi) * solid)
}

/// Affine solubility law of the aqueous solution, mol/cm³.
pub fn c_sat(t: f64) -> f64 {
    -0.005006 + 0.00001923 * t
}

pub const C_SAT_SLOPE: f64 = 0.00001923;

/// Validity band of the solubility correlation, K.
pub const C_SAT_BAND: (f64, f64) = (283.0, 313.0);

/// Relative excess of one saturation concentration over another.
pub fn supersaturation_from_concentrations(c_sat2: f64, c_sat1: f64) -> Result<f64> {
    if c_sat1 == 0.0 || !c_sat1.is_finite() {
        return Err(SimError::invalid("c_sat1", "must be nonzero"));
    }
    Ok((c_sat2 - c_sat1) / c_sat1)
}

/// Reynolds number from an inlet speed, a length and a viscosity.
pub fn reynolds(u_in: f64, length: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) || length < 0.0 {
        return Err(SimError::invalid("reynolds", "length and viscosity must be positive"));
    }
    Ok(u_in * length / nu)
}
