//! Conversion between physical units (mm, s) and lattice units.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// mm/s
    Velocity,
    /// mm²/s
    Diffusivity,
    /// s
    Time,
    /// mm
    Length,
    /// mm/s² (force per unit mass)
    Acceleration,
    /// 1/s
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// mm per cell
    pub dx: f64,
    /// s per step
    pub dt: f64,
}

/// Default ceiling on the lattice Mach number of prescribed velocities.
pub const MACH_CEILING: f64 = 0.1;

impl UnitSystem {
    pub fn new(dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(SimError::invalid("dx", format!("{dx} must be positive")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::invalid("dt", format!("{dt} must be positive")));
        }
        Ok(UnitSystem { dx, dt })
    }

    fn factor(&self, kind: Kind) -> f64 {
        match kind {
            Kind::Velocity => self.dt / self.dx,
            Kind::Diffusivity => self.dt / (self.dx * self.dx),
            Kind::Time => 1.0 / self.dt,
            Kind::Length => 1.0 / self.dx,
            Kind::Acceleration => self.dt * self.dt / self.dx,
            Kind::Rate => self.dt,
        }
    }

    pub fn to_lattice(&self, value: f64, kind: Kind) -> f64 {
        value * self.factor(kind)
    }

    pub fn to_physical(&self, value: f64, kind: Kind) -> f64 {
        value / self.factor(kind)
    }

    /// Lattice diffusivity, rejected unless finite and positive.
    pub fn lattice_diffusivity(&self, name: &str, value: f64) -> Result<f64> {
        let l = self.to_lattice(value, Kind::Diffusivity);
        if l > 0.0 && l.is_finite() {
            Ok(l)
        } else {
            Err(SimError::invalid(name, format!("lattice diffusivity {l} is not positive")))
        }
    }

    /// Lattice Mach number `u δt/δx / c_s` of a physical speed.
    pub fn mach(&self, speed: f64, cs2: f64) -> f64 {
        self.to_lattice(speed, Kind::Velocity).abs() / cs2.sqrt()
    }

    pub fn check_mach(&self, speed: f64, cs2: f64, ceiling: f64) -> Result<()> {
        let ma = self.mach(speed, cs2);
        if ma < ceiling {
            Ok(())
        } else {
            Err(SimError::Stability(format!(
                "lattice Mach number {ma:.3} of inlet velocity {speed} mm/s exceeds {ceiling}"
            )))
        }
    }
}
