//! Scenario driver: builds the geometry from a [`RunConfig`], owns every
//! solver, advances them in a fixed order and samples metrics.
//!
//! Per step: θ from T, phase field, flow (friction from the new φ), masked
//! velocity, supersaturation, temperature, boundary values.

use std::io::Write;
use std::path::Path;

use crate::config::{RunConfig, ScenarioKind, ThermalWalls, ThetaCoupling};
use crate::error::{Result, SimError};
use crate::flow::{relaxation_from_viscosity, FlowSolver, Friction};
use crate::geometry::{GeometryMask, SeedShape};
use crate::grid::{CellTag, Field, Grid, TagMap};
use crate::material::{blend, c_sat, C_SAT_SLOPE};
use crate::metrics::{self, CrystalShape};
use crate::phase::{PhaseParams, PhaseSolver};
use crate::scalar::{self, TransportParams, WallPolicy};
use crate::snapshot::Snapshot;
use crate::units::{Kind, UnitSystem};

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: u64,
    /// simulated seconds
    pub time: f64,
    /// seconds of growth represented, `time × acceleration`
    pub growth_time: f64,
    /// mm² (2D) or mm³ (3D)
    pub solid: f64,
    pub shape: Option<CrystalShape>,
    /// mm/h, displacement and side-length forms
    pub growth: Option<(f64, f64)>,
    pub quality: Option<f64>,
    /// K
    pub peak_t: f64,
    pub peak_cell: [usize; 3],
    /// cells from the T peak to the nearest interface cell
    pub peak_to_interface: Option<f64>,
    /// largest latent heat source in the configured unit
    pub peak_heat: f64,
    /// liquid-weighted mean supersaturation
    pub mean_u_liquid: f64,
    /// K
    pub mean_t: f64,
    /// J; 2D runs count a slab one cell thick
    pub heat_added: f64,
}

impl Sample {
    pub const CSV_HEADER: &'static str = "step,time_s,growth_time_s,solid,L1_mm,L2_mm,L3_mm,L4_mm,L5_mm,L6_mm,G_disp_mm_h,G_length_mm_h,Q,peak_T_K,peak_i,peak_j,peak_k,peak_to_interface_cells,peak_heat,mean_U_liquid,mean_T_K,heat_added_J";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.9e}"));
        let sides: Vec<String> = match &self.shape {
            Some(s) => s.sides.iter().map(|v| format!("{v:.9e}")).collect(),
            None => vec![String::new(); 6],
        };
        let [pi, pj, pk] = self.peak_cell;
        writeln!(
            w,
            "{},{:.9e},{:.9e},{:.9e},{},{},{},{},{:.9e},{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.step,
            self.time,
            self.growth_time,
            self.solid,
            sides.join(","),
            opt(self.growth.map(|g| g.0)),
            opt(self.growth.map(|g| g.1)),
            opt(self.quality),
            self.peak_t,
            pi,
            pj,
            pk,
            opt(self.peak_to_interface),
            self.peak_heat,
            self.mean_u_liquid,
            self.mean_t,
            self.heat_added
        )
    }
}

pub struct Simulation {
    pub config: RunConfig,
    pub mask: GeometryMask,
    pub units: UnitSystem,
    pub phase: PhaseSolver,
    pub flow: Option<FlowSolver>,
    /// supersaturation
    pub u: Field,
    /// K
    pub t: Field,
    pub velocity: Field,
    pub transport: TransportParams,
    pub t_policy: WallPolicy,
    pub step: u64,
    /// J
    pub heat_added: f64,
    initial_shape: Option<CrystalShape>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let s = config.scenario;
        let m = config.material;
        if s.kind == ScenarioKind::Gaussian {
            return Err(SimError::invalid("scenario.kind", "the gaussian benchmark runs through the campaign API"));
        }
        let units = config.units()?;
        let grid = Grid::new(s.dim, s.cells)?;
        let mut mask = match s.kind {
            ScenarioKind::Reactor => GeometryMask::reactor(grid, s.dx, &config.reactor, Some(&config.seed))?,
            _ => GeometryMask::closed_box(grid),
        };
        let phi0 = mask.place_seed(&config.seed, s.dx, m.w0)?;
        let tags = mask.tags.clone();

        let params = PhaseParams {
            w0: units.to_lattice(m.w0, Kind::Length),
            tau0: units.to_lattice(m.tau0, Kind::Time),
            eps: m.epsilon_s,
            lambda: m.lambda,
            premultiplier: s.premultiplier,
        };
        let mut phase = PhaseSolver::new(grid, params)?;
        phase.initialize(phi0, &tags);

        let flow = if s.flow {
            let cs2 = 1.0 / 3.0;
            let nu = units.lattice_diffusivity("material.viscosity", m.viscosity)?;
            let mut f = FlowSolver::new(grid, relaxation_from_viscosity(nu, cs2, 1.0))?;
            f.friction = Some(Friction { eta_f: nu, w0: params.w0 });
            f.inlet_velocity = [units.to_lattice(s.u_in, Kind::Velocity), 0.0];
            f.update_moments(Some(&phase.phi), &tags);
            Some(f)
        } else {
            None
        };

        let transport = TransportParams {
            d: units.lattice_diffusivity("material.diffusivity", config.solute_diffusivity())?,
            kappa_l: units.lattice_diffusivity("material.kappa_liquid", m.kappa_liquid)?,
            kappa_s: units.lattice_diffusivity("material.kappa_solid", m.kappa_solid)?,
            cap_l: m.heat_capacity_liquid(),
            cap_s: m.heat_capacity_solid(),
            latent: 0.5 * m.latent_heat_volumetric() / s.acceleration,
            weno_eps: s.weno_eps,
        };
        let t_policy = match s.walls {
            ThermalWalls::Isothermal => WallPolicy::Dirichlet,
            ThermalWalls::Adiabatic => WallPolicy::Neumann,
        };
        let u = Field::scalar(grid, s.u0);
        let t = Field::scalar(grid, s.t_wall);
        let mut sim = Simulation {
            velocity: Field::new(grid, s.dim, 0.0),
            config,
            mask,
            units,
            phase,
            flow,
            u,
            t,
            transport,
            t_policy,
            step: 0,
            heat_added: 0.0,
            initial_shape: None,
        };
        sim.refresh_velocity();
        sim.initial_shape = sim.shape();
        Ok(sim)
    }

    pub fn grid(&self) -> Grid {
        self.phase.grid()
    }

    pub fn tags(&self) -> &TagMap {
        &self.mask.tags
    }

    /// Simulated seconds.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.units.dt
    }

    /// mm³ (or mm² per unit depth in 2D) of one cell, in cm³ for the heat tally.
    fn cell_volume_cm3(&self) -> f64 {
        (self.units.dx * 0.1).powi(3)
    }

    fn refresh_velocity(&mut self) {
        if let Some(f) = &self.flow {
            self.velocity = f.masked_velocity_field();
        }
    }

    /// Driving-force temperature term at every cell.
    pub fn theta(&self) -> Field {
        let s = self.config.scenario;
        let n_s = self.config.material.solid_molar_density();
        scalar::coefficient_field(&self.t, |t| match s.theta {
            ThetaCoupling::Normalized => (t - s.t_wall) / s.t_wall,
            ThetaCoupling::Solubility => -C_SAT_SLOPE * (t - s.t_wall) / n_s,
        })
    }

    pub fn advance(&mut self) -> Result<()> {
        let step = self.step + 1;
        self.advance_inner().map_err(|e| e.at_step(step))?;
        self.step = step;
        Ok(())
    }

    fn advance_inner(&mut self) -> Result<()> {
        let tags = self.mask.tags.clone();
        let theta = self.theta();
        self.phase.step(&self.u, &theta, &tags)?;
        if let Some(f) = &mut self.flow {
            f.step(Some(&self.phase.phi), &tags)?;
        }
        self.refresh_velocity();
        let p = self.transport;
        let phi = &self.phase.phi;
        let dphi = &self.phase.dphi;
        let rhs = scalar::supersaturation_rhs(&self.u, phi, dphi, &self.velocity, &tags, &p);
        let u = scalar::euler_update(&self.u, &rhs, &tags, 1.0);
        scalar::check_depletion(&u, &tags)?;
        let rhs = scalar::temperature_rhs(&self.t, phi, dphi, &self.velocity, &tags, self.t_policy, &p);
        let t = scalar::euler_update(&self.t, &rhs, &tags, 1.0);
        t.check_finite("T")?;
        self.u = u;
        self.t = t;
        let g = self.grid();
        let released = g.sum(|idx| if tags.get(idx).is_domain() { dphi.at(idx) } else { 0.0 });
        self.heat_added += p.latent * self.config.scenario.acceleration * released * self.cell_volume_cm3();
        self.apply_boundaries();
        Ok(())
    }

    /// Inlet cells carry the feed state; isothermal walls the wall temperature.
    fn apply_boundaries(&mut self) {
        let s = self.config.scenario;
        let g = self.grid();
        let tags = &self.mask.tags;
        for idx in 0..g.len() {
            match tags.get(idx) {
                CellTag::Inlet => {
                    self.u.set(idx, s.u0);
                    self.t.set(idx, s.t_wall);
                }
                CellTag::Wall if s.walls == ThermalWalls::Isothermal => self.t.set(idx, s.t_wall),
                _ => {}
            }
        }
    }

    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.advance()?;
        }
        Ok(())
    }

    /// Runs to `total_time`, calling `observe` at t = 0 and every
    /// `output_every` seconds (and at the end).
    pub fn run<F: FnMut(&Simulation, &Sample) -> Result<()>>(&mut self, mut observe: F) -> Result<()> {
        let s = self.config.scenario;
        let total = (s.total_time / s.dt).round() as u64;
        let every = ((s.output_every / s.dt).round() as u64).max(1);
        if self.step == 0 {
            observe(self, &self.sample())?;
        }
        while self.step < total {
            self.advance()?;
            if self.step % every == 0 || self.step == total {
                observe(self, &self.sample())?;
            }
        }
        Ok(())
    }

    /// Side lengths of a hexagonal 2D crystal, if one can be extracted.
    pub fn shape(&self) -> Option<CrystalShape> {
        let seed = self.mask.seed?;
        if seed.shape != SeedShape::Hexagon || self.grid().dim() != 2 {
            return None;
        }
        metrics::extract_sides(&self.phase.phi, self.tags(), self.units.dx, seed.orientation).ok()
    }

    pub fn sample(&self) -> Sample {
        let s = self.config.scenario;
        let g = self.grid();
        let tags = self.tags();
        let phi = &self.phase.phi;
        let growth_time = self.time() * s.acceleration;
        let shape = self.shape();
        let growth = match (&shape, &self.initial_shape) {
            (Some(a), Some(b)) if growth_time > 0.0 => metrics::growth_rate(a, b, growth_time / 3600.0).ok(),
            _ => None,
        };
        let quality = shape.as_ref().and_then(|sh| metrics::quality(sh).ok());
        let probe = metrics::probes(&self.t, tags);
        let peak_to_interface = metrics::distance_to_interface(phi, tags, probe.peak_cell);
        let heat = self.heat_source();
        let peak_heat = g
            .interior()
            .filter(|&i| tags.get(i).is_domain())
            .map(|i| heat.at(i))
            .fold(0.0, f64::max);
        let w_liq = |idx: usize| 0.5 * (1.0 - phi.at(idx));
        let liquid = scalar::weighted_total(g, tags, w_liq);
        let mean_u_liquid = if liquid > 0.0 {
            scalar::weighted_total(g, tags, |i| w_liq(i) * self.u.at(i)) / liquid
        } else {
            f64::NAN
        };
        let domain = scalar::weighted_total(g, tags, |_| 1.0);
        let mean_t = scalar::weighted_total(g, tags, |i| self.t.at(i)) / domain;
        Sample {
            step: self.step,
            time: self.time(),
            growth_time,
            solid: metrics::solid_measure(phi, tags, self.units.dx),
            shape,
            growth,
            quality,
            peak_t: probe.peak,
            peak_cell: probe.peak_cell,
            peak_to_interface,
            peak_heat,
            mean_u_liquid,
            mean_t,
            heat_added: self.heat_added,
        }
    }

    /// Latent heat source of the last step, in the configured unit, per
    /// second of represented growth.
    pub fn heat_source(&self) -> Field {
        let s = self.config.scenario;
        let rate = 1.0 / (self.units.dt * s.acceleration);
        let dphi_dt = scalar::coefficient_field(&self.phase.dphi, |d| d * rate);
        metrics::heat_generation(&dphi_dt, &self.phase.phi, &self.config.material, self.config.output.heat_unit.into())
    }

    /// `Σ(U + (1+φ)/2)` over domain cells: the solute content up to the
    /// constant `c_sat(T1)` and the factor `n_S`. Constant in closed boxes.
    pub fn solute_invariant(&self) -> f64 {
        let phi = &self.phase.phi;
        scalar::weighted_total(self.grid(), self.tags(), |i| self.u.at(i) + 0.5 * (1.0 + phi.at(i)))
    }

    /// Liquid concentration from the mean liquid supersaturation, mol/cm³.
    pub fn liquid_concentration(&self, mean_u_liquid: f64) -> f64 {
        c_sat(self.config.scenario.t_wall) + self.config.material.solid_molar_density() * mean_u_liquid
    }

    /// Volume-weighted heat capacity `Σ C̃(φ)` over the domain, J/K.
    pub fn heat_capacity(&self) -> f64 {
        let m = &self.config.material;
        let (cl, cs) = (m.heat_capacity_liquid(), m.heat_capacity_solid());
        let phi = &self.phase.phi;
        scalar::weighted_total(self.grid(), self.tags(), |i| blend(phi.at(i), cl, cs)) * self.cell_volume_cm3()
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut snap = Snapshot::new(self.grid(), self.units.dx, self.time(), self.step);
        snap.meta.insert("heat_added".into(), self.heat_added);
        let tags = self.tags();
        let mut codes = Field::scalar(self.grid(), 0.0);
        for idx in self.grid().interior().collect::<Vec<_>>() {
            codes.set(idx, tags.get(idx) as u8 as f64);
        }
        snap.push("tags", &codes);
        snap.push("phi", &self.phase.phi);
        snap.push("h", &self.phase.h);
        snap.push("U", &self.u);
        snap.push("T", &self.t);
        if let Some(f) = &self.flow {
            snap.push("f", &f.f);
        }
        snap
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        self.snapshot().save(path)
    }

    /// Rebuilds the run state from a snapshot taken with the same config.
    pub fn restore(config: RunConfig, snap: &Snapshot) -> Result<Self> {
        let mut sim = Simulation::new(config)?;
        if snap.extents != sim.grid().extents() || snap.dim != sim.grid().dim() {
            return Err(SimError::Snapshot("snapshot grid differs from the configured grid".into()));
        }
        if snap.dx != sim.units.dx {
            return Err(SimError::Snapshot("snapshot dx differs from the configured dx".into()));
        }
        let tags = sim.mask.tags.clone();
        let saved = snap.field("tags")?;
        for idx in sim.grid().interior() {
            if saved.at(idx) != tags.get(idx) as u8 as f64 {
                return Err(SimError::Snapshot("snapshot cell tags differ from the configured geometry".into()));
            }
        }
        let bounds = tags.boundaries();
        snap.fill("phi", &mut sim.phase.phi)?;
        sim.phase.phi.fill_periodic_halo(bounds);
        snap.fill("h", &mut sim.phase.h)?;
        snap.fill("U", &mut sim.u)?;
        sim.u.fill_periodic_halo(bounds);
        snap.fill("T", &mut sim.t)?;
        sim.t.fill_periodic_halo(bounds);
        if let Some(f) = &mut sim.flow {
            snap.fill("f", &mut f.f)?;
            f.update_moments(Some(&sim.phase.phi), &tags);
        }
        sim.refresh_velocity();
        sim.step = snap.step;
        sim.heat_added = snap.meta.get("heat_added").copied().unwrap_or(0.0);
        Ok(sim)
    }
}
