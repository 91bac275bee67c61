//! Run configuration: TOML text with one section per concern.
//!
//! Parsing rejects unknown keys. [`RunConfig::to_canonical`] writes every
//! field explicitly, so parsing the canonical text and writing it again gives
//! the same bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{ReactorGeometry, Seed};
use crate::material::MaterialParams;
use crate::metrics::HeatUnit;
use crate::phase::{min_tau0_steps, PremultiplierAt};
use crate::scalar::StabilityRule;
use crate::units::{UnitSystem, MACH_CEILING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Reactor,
    Adiabatic,
    Gaussian,
    Custom,
}

/// How temperature enters the phase-field driving force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaCoupling {
    /// `θ = (T − T1)/T1`
    Normalized,
    /// `θ = −c_sat'·(T − T1)/n_S`: the shift of the solubility with
    /// temperature, in supersaturation units.
    Solubility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermalWalls {
    /// Walls and inlet held at `t_wall`.
    Isothermal,
    /// Zero heat flux through walls.
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub dim: usize,
    pub cells: [usize; 3],
    /// mm
    pub dx: f64,
    /// s
    pub dt: f64,
    /// s
    pub total_time: f64,
    /// s between metric samples
    pub output_every: f64,
    /// initial (and inlet) supersaturation
    pub u0: f64,
    /// K, wall, inlet and reference temperature
    pub t_wall: f64,
    /// mm/s along +x
    pub u_in: f64,
    /// solve the flow (2D only)
    pub flow: bool,
    pub walls: ThermalWalls,
    pub theta: ThetaCoupling,
    pub premultiplier: PremultiplierAt,
    /// Time acceleration of growth: solute diffusivity is multiplied and
    /// the latent heat divided by this factor, and growth times are
    /// reported multiplied by it.
    pub acceleration: f64,
    pub weno_eps: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Reactor,
            dim: 2,
            cells: [440, 404, 1],
            dx: 0.1,
            dt: 5.0e-4,
            total_time: 57600.0,
            output_every: 3600.0,
            u0: 0.045,
            t_wall: 298.15,
            u_in: 0.0,
            flow: true,
            walls: ThermalWalls::Isothermal,
            theta: ThetaCoupling::Normalized,
            premultiplier: PremultiplierAt::Destination,
            acceleration: 1.0,
            weno_eps: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// s between field snapshots; zero writes only the final state
    pub snapshot_every: f64,
    pub heat_unit: HeatUnitName,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            snapshot_every: 0.0,
            heat_unit: HeatUnitName::Kelvin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatUnitName {
    /// K/s
    Kelvin,
    /// W/cm³
    Watt,
}

impl From<HeatUnitName> for HeatUnit {
    fn from(h: HeatUnitName) -> Self {
        match h {
            HeatUnitName::Kelvin => HeatUnit::TemperatureRate,
            HeatUnitName::Watt => HeatUnit::Volumetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub reactor: ReactorGeometry,
    #[serde(default)]
    pub seed: Seed,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses and validates; errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            SimError::Config(m) => SimError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_canonical(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn units(&self) -> Result<UnitSystem> {
        UnitSystem::new(self.scenario.dx, self.scenario.dt)
    }

    /// Effective solute diffusivity, mm²/s.
    pub fn solute_diffusivity(&self) -> f64 {
        self.material.diffusivity * self.scenario.acceleration
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        self.material.validate()?;
        if !(s.dim == 2 || s.dim == 3) {
            return Err(SimError::invalid("scenario.dim", format!("{} is not 2 or 3", s.dim)));
        }
        if s.dim == 3 && s.flow {
            return Err(SimError::UnsupportedLattice("3D flow unsupported".into()));
        }
        if !(s.u0 >= 0.0) {
            return Err(SimError::invalid("scenario.u0", "initial supersaturation must be >= 0"));
        }
        if !(s.total_time > 0.0) {
            return Err(SimError::invalid("scenario.total_time", "must be positive"));
        }
        if !(s.output_every > 0.0) {
            return Err(SimError::invalid("scenario.output_every", "must be positive"));
        }
        if !(s.t_wall > 0.0) {
            return Err(SimError::invalid("scenario.t_wall", "must be positive"));
        }
        if !(s.acceleration >= 1.0) {
            return Err(SimError::invalid("scenario.acceleration", "must be >= 1"));
        }
        if !(s.weno_eps > 0.0) {
            return Err(SimError::invalid("scenario.weno_eps", "must be positive"));
        }
        if !(self.output.snapshot_every >= 0.0) {
            return Err(SimError::invalid("output.snapshot_every", "must be >= 0"));
        }
        let units = self.units()?;
        if s.kind == ScenarioKind::Gaussian {
            return Ok(());
        }
        let tau0 = units.to_lattice(self.material.tau0, crate::units::Kind::Time);
        let min_tau = min_tau0_steps(self.material.lambda);
        if tau0 < min_tau {
            return Err(SimError::Stability(format!(
                "tau0/dt = {tau0:.3} is below {min_tau:.3}, the explicit phase-source limit at lambda = {}",
                self.material.lambda
            )));
        }
        if s.flow {
            units.check_mach(s.u_in, 1.0 / 3.0, MACH_CEILING)?;
            let nu = units.to_lattice(self.material.viscosity, crate::units::Kind::Diffusivity);
            if !(nu > 0.0) {
                return Err(SimError::invalid("material.viscosity", "must be positive with flow enabled"));
            }
        }
        let m = &self.material;
        let kappa_max = m.kappa_solid.max(m.kappa_liquid).max(self.solute_diffusivity());
        StabilityRule::default().check(s.dt, s.dx, s.dim, kappa_max, s.u_in.abs())?;
        self.reactor.validate()?;
        Ok(())
    }
}
