//! Canned runs: the Gaussian-hill convergence study, the adiabatic cell
//! against the lumped model, and reactor presets at full and desk scale.

use std::f64::consts::PI;

use crate::config::{RunConfig, ScenarioConfig, ScenarioKind, ThermalWalls, ThetaCoupling};
use crate::driver::{Sample, Simulation};
use crate::error::{Result, SimError};
use crate::geometry::{GeometryMask, ReactorGeometry, Seed, SeedShape};
use crate::grid::{Field, Grid};
use crate::material::{c_sat, MaterialParams};
use crate::metrics;
use crate::oracle::{self, CellParams, OdeState};
use crate::phase::min_tau0_steps;
use crate::scalar::{self, StabilityRule, WallPolicy};

/// Grid sizes of the convergence study on `[−1, 1]²` mm.
pub const DIFFUSION_GRIDS: [usize; 4] = [50, 80, 100, 125];
/// Reference l² errors for [`DIFFUSION_GRIDS`].
pub const DIFFUSION_REFERENCE: [f64; 4] = [5.0565, 0.1787, 0.0193, 0.0081];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionOptions {
    /// mm²/s, isotropic
    pub diffusivity: f64,
    /// s
    pub dt: f64,
    /// s
    pub t_end: f64,
    /// mm
    pub sigma0: f64,
}

impl Default for DiffusionOptions {
    /// D is the solute diffusivity of the default material. With
    /// `σ0 = 0.01 mm` the hill is narrower than every grid spacing, so the
    /// errors come almost entirely from point-sampling the initial hill and
    /// hardly depend on D.
    fn default() -> Self {
        DiffusionOptions { diffusivity: 1.2e-3, dt: 0.01, t_end: 10.0, sigma0: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCase {
    pub cells: usize,
    /// mm
    pub dx: f64,
    pub steps: u64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionReport {
    pub options: DiffusionOptions,
    pub cases: Vec<DiffusionCase>,
    /// least-squares order over the three finest grids
    pub order: f64,
}

impl DiffusionReport {
    /// Ratio of each error to its reference value.
    pub fn ratios(&self) -> Vec<f64> {
        self.cases.iter().zip(DIFFUSION_REFERENCE).map(|(c, r)| c.l2 / r).collect()
    }
}

/// Runs one periodic Gaussian hill on an `n × n` grid and returns the l²
/// error against the analytic hill at `t_end`. Node `i` sits at
/// `x = −1 + i·δx`.
pub fn gaussian_hill(n: usize, opts: &DiffusionOptions) -> Result<DiffusionCase> {
    let dx = 2.0 / n as f64;
    StabilityRule::default().check(opts.dt, dx, 2, opts.diffusivity, 0.0)?;
    let steps = (opts.t_end / opts.dt).round() as u64;
    if (steps as f64 * opts.dt - opts.t_end).abs() > 1e-9 * opts.t_end.max(1.0) {
        return Err(SimError::invalid("dt", "must divide t_end"));
    }
    let grid = Grid::new_2d(n, n)?;
    let tags = GeometryMask::periodic(grid).tags;
    let iso = [[opts.diffusivity, 0.0], [0.0, opts.diffusivity]];
    let hill = |t: f64| {
        let mut f = Field::scalar(grid, 0.0);
        for idx in grid.interior().collect::<Vec<_>>() {
            let [i, j, _] = grid.coords(idx).unwrap_or([0; 3]);
            let x = [-1.0 + i as f64 * dx, -1.0 + j as f64 * dx];
            f.set(idx, metrics::gaussian_analytic(x, t, opts.sigma0, iso));
        }
        f.fill_periodic_halo(tags.boundaries());
        f
    };
    let mut c = hill(0.0);
    let coeff = Field::scalar(grid, opts.diffusivity * opts.dt / (dx * dx));
    for _ in 0..steps {
        let rhs = scalar::central4_diffuse(&c, &coeff, &tags, WallPolicy::Neumann);
        c = scalar::euler_update(&c, &rhs, &tags, 1.0);
    }
    let exact = hill(steps as f64 * opts.dt);
    let l2 = metrics::l2_error(&metrics::grid_values(&c), &metrics::grid_values(&exact))?;
    Ok(DiffusionCase { cells: n, dx, steps, l2 })
}

pub fn validate_diffusion(opts: &DiffusionOptions) -> Result<DiffusionReport> {
    let cases = DIFFUSION_GRIDS
        .iter()
        .map(|&n| gaussian_hill(n, opts))
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = cases[1..].iter().map(|c| c.dx).collect();
    let e: Vec<f64> = cases[1..].iter().map(|c| c.l2).collect();
    let order = metrics::convergence_order(&h, &e);
    Ok(DiffusionReport { options: *opts, cases, order })
}

/// Adiabatic cube of 1 cm edge with a spherical seed of 1 mm radius.
///
/// Only the end state is compared, and it follows from the mass and heat
/// balances alone. Transport therefore runs on a compressed clock: solute
/// and heat diffuse at the same lattice rate `d_lattice`, one step is one
/// nominal second, and `λ` is large so the capillary shift of the final
/// supersaturation stays well below the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticOptions {
    /// cells per edge
    pub cells: usize,
    pub lambda: f64,
    /// cells²/step for solute and heat
    pub d_lattice: f64,
    /// steps between convergence checks
    pub chunk: u64,
    pub max_steps: u64,
    /// stop once the radius moves less than this (relative) over a chunk
    pub tol: f64,
}

impl Default for AdiabaticOptions {
    fn default() -> Self {
        AdiabaticOptions { cells: 50, lambda: 800.0, d_lattice: 0.09, chunk: 2000, max_steps: 80_000, tol: 1e-4 }
    }
}

/// Thin-interface coefficient `a2` of the phase-field model.
pub const A2: f64 = 0.6267;

/// Capillary-length coefficient `a1`: `d0 = a1·W0/λ`.
pub const A1: f64 = 0.8839;

/// Gibbs–Thomson shift `2d0/R·n_S` (mol/cm³) of the equilibrium
/// concentration at a sphere of radius `r_cm`, which the lumped model lacks.
pub fn capillary_shift(opts: &AdiabaticOptions, r_cm: f64) -> f64 {
    let cfg = adiabatic_config(opts);
    let d0_mm = A1 * cfg.material.w0 / opts.lambda;
    2.0 * d0_mm / (r_cm * 10.0) * cfg.material.solid_molar_density()
}

/// Initial supersaturation of the reference cell in solid-density units.
pub fn adiabatic_u0(m: &MaterialParams) -> f64 {
    let s0 = oracle::reference_state();
    (s0.c - c_sat(s0.t)) / m.solid_molar_density()
}

pub fn adiabatic_config(opts: &AdiabaticOptions) -> RunConfig {
    let s0 = oracle::reference_state();
    let mut cfg = RunConfig::default();
    let dx = 10.0 / opts.cells as f64;
    let dt = 1.0;
    let d = opts.d_lattice * dx * dx / dt;
    let w0 = cfg.material.w0 / dx;
    cfg.material = MaterialParams {
        diffusivity: d,
        kappa_liquid: d,
        kappa_solid: d,
        epsilon_s: 0.0,
        lambda: opts.lambda,
        // thin-interface limit: zero interface kinetic coefficient
        tau0: (A2 * opts.lambda * w0 * w0 / opts.d_lattice).max(min_tau0_steps(opts.lambda)) * dt,
        ..cfg.material
    };
    cfg.scenario = ScenarioConfig {
        kind: ScenarioKind::Adiabatic,
        dim: 3,
        cells: [opts.cells; 3],
        dx,
        dt,
        total_time: opts.max_steps as f64 * dt,
        output_every: opts.chunk as f64 * dt,
        u0: adiabatic_u0(&cfg.material),
        t_wall: s0.t,
        u_in: 0.0,
        flow: false,
        walls: ThermalWalls::Adiabatic,
        theta: ThetaCoupling::Solubility,
        ..Default::default()
    };
    cfg.seed = Seed { shape: SeedShape::Sphere, radius: s0.r * 10.0, ..Default::default() };
    cfg
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticPoint {
    pub step: u64,
    /// liquid concentration (mol/cm³), radius (cm), mean temperature (K)
    pub state: OdeState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticReport {
    pub options: AdiabaticOptions,
    pub trajectory: Vec<AdiabaticPoint>,
    pub hybrid: OdeState,
    pub oracle: OdeState,
    pub converged: bool,
    /// `|c − c_sat(T)|` of the hybrid end state, mol/cm³
    pub hybrid_gap: f64,
    /// same for the lumped model
    pub oracle_gap: f64,
    /// heat tallied from the phase source, J
    pub heat_added: f64,
    /// `|ΔH|·n_S·ΔV_s`, J
    pub heat_expected: f64,
}

impl AdiabaticReport {
    /// Relative errors of `(c, R, T)`.
    pub fn relative_errors(&self) -> [f64; 3] {
        let (h, o) = (self.hybrid, self.oracle);
        [((h.c - o.c) / o.c).abs(), ((h.r - o.r) / o.r).abs(), ((h.t - o.t) / o.t).abs()]
    }
}

/// Reads `(c, R, T)` from a 3D run with a spherical seed. The radius comes
/// from the change of solid volume added to the nominal seed volume, which
/// cancels the constant offset the diffuse interface adds to the φ-measure.
/// `solid0` is the initial solid measure in mm³, `r0_cm` the seed radius.
pub fn read_state(sim: &Simulation, solid0: f64, r0_cm: f64) -> OdeState {
    let s = sim.sample();
    let dv_cm3 = (s.solid - solid0) * 1e-3;
    let r = (r0_cm.powi(3) + 3.0 * dv_cm3 / (4.0 * PI)).cbrt();
    OdeState { c: sim.liquid_concentration(s.mean_u_liquid), r, t: s.mean_t }
}

/// Runs the adiabatic cell until the radius settles and compares the end
/// state with the lumped model. `progress` sees every chunk.
pub fn validate_adiabatic<F: FnMut(&AdiabaticPoint)>(opts: &AdiabaticOptions, mut progress: F) -> Result<AdiabaticReport> {
    let cfg = adiabatic_config(opts);
    let s0 = oracle::reference_state();
    let mut sim = Simulation::new(cfg)?;
    let solid0 = sim.sample().solid;
    let mut trajectory = vec![AdiabaticPoint { step: 0, state: read_state(&sim, solid0, s0.r) }];
    progress(&trajectory[0]);
    let mut converged = false;
    while sim.step < opts.max_steps {
        sim.run_steps(opts.chunk.min(opts.max_steps - sim.step))?;
        let p = AdiabaticPoint { step: sim.step, state: read_state(&sim, solid0, s0.r) };
        progress(&p);
        let prev = trajectory[trajectory.len() - 1].state.r;
        trajectory.push(p);
        let r = trajectory[trajectory.len() - 1].state.r;
        if ((r - prev) / r).abs() < opts.tol {
            converged = true;
            break;
        }
    }
    let hybrid = trajectory[trajectory.len() - 1].state;
    let params = CellParams::default();
    let tr = oracle::integrate(&params, s0, 1.2e7, 1.0, 1e5)?;
    let o = tr.final_state;
    Ok(AdiabaticReport {
        options: *opts,
        hybrid,
        oracle: o,
        converged,
        hybrid_gap: (hybrid.c - c_sat(hybrid.t)).abs(),
        oracle_gap: (o.c - c_sat(o.t)).abs(),
        heat_added: sim.heat_added,
        heat_expected: sim.config.material.latent_heat_volumetric() * (sim.sample().solid - solid0) * 1e-3,
        trajectory,
    })
}

/// Reactor run preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactorRun {
    /// K
    pub t_wall: f64,
    /// mm/s
    pub u_in: f64,
    pub baffle: u8,
    /// hours of growth represented
    pub hours: f64,
    /// time acceleration, see [`ScenarioConfig::acceleration`]
    pub acceleration: f64,
    /// metric samples over the run
    pub outputs: u32,
}

impl Default for ReactorRun {
    fn default() -> Self {
        ReactorRun { t_wall: 298.15, u_in: 0.0, baffle: 0, hours: 16.0, acceleration: 1.0, outputs: 16 }
    }
}

/// λ for reactor runs. The seed must outgrow its capillary critical
/// supersaturation `a1·W0·κ/λ`; λ = 30 puts that below U0/4 for the
/// default seed and U0 = 0.045.
pub const REACTOR_LAMBDA: f64 = 30.0;

fn reactor_config(run: &ReactorRun, scale: f64, cells: [usize; 3], dx: f64, dt: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    let span = run.hours * 3600.0 / run.acceleration;
    cfg.scenario = ScenarioConfig {
        cells,
        dx,
        dt,
        total_time: span,
        output_every: span / run.outputs.max(1) as f64,
        t_wall: run.t_wall,
        u_in: run.u_in,
        flow: run.u_in != 0.0,
        acceleration: run.acceleration,
        ..Default::default()
    };
    cfg.reactor = ReactorGeometry { baffle: run.baffle, ..ReactorGeometry::default().scaled(scale) };
    cfg.material.lambda = REACTOR_LAMBDA;
    cfg
}

/// The 40 mm reactor at δx = 0.1 mm.
pub fn full_reactor(run: &ReactorRun) -> RunConfig {
    reactor_config(run, 1.0, [440, 404, 1], 0.1, 4.0e-4)
}

/// Half-size outline (¼ of the area) at δx = 0.2 mm; the seed keeps its size.
pub fn desk_reactor(run: &ReactorRun) -> RunConfig {
    reactor_config(run, 0.5, [110, 104, 1], 0.2, 8.0e-4)
}

/// Runs `cfg` to the end and returns every metric sample.
pub fn run_samples(cfg: RunConfig) -> Result<Vec<Sample>> {
    let mut sim = Simulation::new(cfg)?;
    let mut out = Vec::new();
    sim.run(|_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Mean of `f` over samples after the first, trapezoid-free (equal spacing).
pub fn time_average<F: Fn(&Sample) -> f64>(samples: &[Sample], f: F) -> f64 {
    let tail = &samples[1.min(samples.len())..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().map(f).sum::<f64>() / tail.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_hill_has_zero_error() {
        let opts = DiffusionOptions { t_end: 0.0, ..Default::default() };
        let c = gaussian_hill(40, &opts).unwrap();
        assert_eq!(c.steps, 0);
        assert_eq!(c.l2, 0.0);
    }

    #[test]
    fn unstable_diffusion_step_is_rejected() {
        let opts = DiffusionOptions { dt: 100.0, t_end: 100.0, ..Default::default() };
        assert!(matches!(gaussian_hill(50, &opts), Err(SimError::Stability(_))));
    }

    #[test]
    fn capillary_shift_of_the_final_sphere() {
        // d0 = 0.8839·0.25/800 mm, R = 1.7 mm
        let v = capillary_shift(&AdiabaticOptions::default(), 0.17);
        assert!((v - 2.8648e-6).abs() < 1e-9, "{v}");
    }

    #[test]
    fn presets_validate() {
        for u_in in [0.0, 14.0] {
            let run = ReactorRun { u_in, baffle: 2, acceleration: 400.0, hours: 4.0, ..Default::default() };
            desk_reactor(&run).validate().unwrap();
            full_reactor(&run).validate().unwrap();
        }
        let cfg = adiabatic_config(&AdiabaticOptions::default());
        cfg.validate().unwrap();
        assert!((cfg.scenario.u0 - 0.01811).abs() < 1e-4, "{}", cfg.scenario.u0);
        let u = cfg.units().unwrap();
        let tau0 = cfg.material.tau0 / u.dt;
        assert!(tau0 >= min_tau0_steps(cfg.material.lambda));
    }
}
