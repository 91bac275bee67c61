//! Property checks shared by the property tests and the acceptance report.
#![allow(dead_code)]

use crystalsim_core::config::{RunConfig, ScenarioConfig, ScenarioKind, ThermalWalls};
use crystalsim_core::driver::Simulation;
use crystalsim_core::flow::equilibrium;
use crystalsim_core::geometry::{ReactorGeometry, Seed};
use crystalsim_core::lattice::LatticeSpec;
use crystalsim_core::material::blend;
use crystalsim_core::metrics;
use crystalsim_core::oracle::{self, CellParams};
use crystalsim_core::phase::{anisotropy, anisotropy_gradient_term, phase_equilibrium};
use crystalsim_core::snapshot::Snapshot;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: &'static str, value: f64, tol: f64) -> Self {
        Check { name, value, tol }
    }

    pub fn pass(&self) -> bool {
        self.value <= self.tol
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.3e} (limit {:.0e})",
            if self.pass() { "ok  " } else { "FAIL" },
            self.name,
            self.value,
            self.tol
        )
    }
}

/// Weight sums, first and second velocity moments of both lattices, and the
/// conserved moments of the flow and phase equilibria.
pub fn lattice_moments() -> Check {
    let mut worst: f64 = 0.0;
    for lat in [LatticeSpec::d2q9(), LatticeSpec::d3q7()] {
        let q = lat.q();
        worst = worst.max((lat.weights.iter().sum::<f64>() - 1.0).abs());
        for d in 0..3 {
            let m1: f64 = (0..q).map(|a| lat.weights[a] * lat.velocities[a][d] as f64).sum();
            worst = worst.max(m1.abs());
            for e in 0..lat.dim {
                if d >= lat.dim {
                    continue;
                }
                let m2: f64 = (0..q)
                    .map(|a| lat.weights[a] * (lat.velocities[a][d] * lat.velocities[a][e]) as f64)
                    .sum();
                let want = if d == e { lat.cs2 } else { 0.0 };
                worst = worst.max((m2 - want).abs());
            }
        }
    }
    let lat = LatticeSpec::d2q9();
    let mut f = [0.0; 9];
    for (rho, u) in [(1.0, [0.0, 0.0]), (1.02, [0.05, -0.03]), (0.97, [-0.08, 0.01])] {
        equilibrium(&lat, rho, &u, &mut f);
        let m0: f64 = f.iter().sum();
        worst = worst.max((m0 - rho).abs());
        for d in 0..2 {
            let m1: f64 = (0..9).map(|a| f[a] * lat.velocities[a][d] as f64).sum();
            worst = worst.max((m1 - rho * u[d]).abs());
        }
    }
    for lat in [LatticeSpec::d2q9(), LatticeSpec::d3q7()] {
        let mut h = vec![0.0; lat.q()];
        for (phi, t) in [(0.3, [0.02, -0.01, 0.0]), (-0.9, [0.0, 0.04, 0.01])] {
            phase_equilibrium(&lat, phi, t, 1.25, 8.0, &mut h);
            worst = worst.max((h.iter().sum::<f64>() - phi).abs());
        }
    }
    Check::new("lattice moment identities", worst, 1e-14)
}

fn closed_box(seed_radius: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenario = ScenarioConfig {
        kind: ScenarioKind::Custom,
        dim: 2,
        cells: [40, 40, 1],
        dx: 0.2,
        dt: 2.0e-3,
        total_time: 20.0,
        output_every: 2.0,
        flow: false,
        walls: ThermalWalls::Adiabatic,
        ..Default::default()
    };
    cfg.seed = Seed { radius: seed_radius, ..Default::default() };
    cfg.material.lambda = 10.0;
    cfg
}

/// `Σ(U + (1+φ)/2)` drift while a seed grows in a closed box, relative.
pub fn closed_box_solute(steps: u64) -> Check {
    let mut sim = Simulation::new(closed_box(1.5)).expect("closed box");
    let before = sim.solute_invariant();
    let solid0 = sim.sample().solid;
    sim.run_steps(steps).expect("run");
    assert!(sim.sample().solid > solid0, "seed did not grow");
    Check::new("closed-box solute drift", ((sim.solute_invariant() - before) / before).abs(), 1e-8)
}

/// `Σ C̃(φ)(T − T1)` drift of a warm spot with no growth, relative to the
/// initial excess; plus the same for a supersaturation spot.
pub fn closed_box_heat(steps: u64) -> (Check, Check) {
    let mut sim = Simulation::new(closed_box(0.0)).expect("closed box");
    let g = sim.grid();
    let t1 = sim.config.scenario.t_wall;
    for idx in g.interior().collect::<Vec<_>>() {
        let [i, j, _] = g.coords(idx).unwrap();
        let r2 = ((i as f64 - 14.0).powi(2) + (j as f64 - 22.0).powi(2)) / 20.0;
        sim.t.set(idx, t1 + 0.8 * (-r2).exp());
        sim.u.set(idx, 0.045 + 0.02 * (-r2 * 0.5).exp());
    }
    let m = sim.config.material;
    let (cl, cs) = (m.heat_capacity_liquid(), m.heat_capacity_solid());
    let heat = |s: &Simulation| {
        let phi = &s.phase.phi;
        g.sum(|i| blend(phi.at(i), cl, cs) * (s.t.at(i) - t1))
    };
    let h0 = heat(&sim);
    let u0 = sim.u.interior_sum(0);
    sim.run_steps(steps).expect("run");
    (
        Check::new("closed-box heat drift", ((heat(&sim) - h0) / h0).abs(), 1e-8),
        Check::new("closed-box U drift (no growth)", ((sim.u.interior_sum(0) - u0) / u0).abs(), 1e-8),
    )
}

/// Largest change of any state value over `steps` steps of an all-liquid,
/// uniform, resting closed box with the flow solver on.
pub fn fixed_point(steps: u64) -> Check {
    let mut cfg = closed_box(0.0);
    cfg.scenario.flow = true;
    let mut sim = Simulation::new(cfg).expect("box");
    let snap0 = sim.snapshot();
    sim.run_steps(steps).expect("run");
    let snap1 = sim.snapshot();
    let mut worst: f64 = 0.0;
    for ((_, a), (_, b)) in snap0.fields.iter().zip(&snap1.fields) {
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
    }
    Check::new("equilibrium fixed point", worst, 1e-12)
}

/// Closed form of `|∇φ|²∂(a_s²)/∂∇φ` against central differences of `a_s²`.
pub fn anisotropy_gradient(eps: f64) -> Check {
    let mut worst: f64 = 0.0;
    for k in 0..97 {
        let th = k as f64 * 0.0651 - 3.1;
        for mag in [1e-3, 0.1, 1.0, 7.0] {
            let g = [mag * th.cos(), mag * th.sin(), 0.0];
            let closed = anisotropy_gradient_term(g, eps);
            let h = 1e-5 * mag;
            let a2 = |v: [f64; 3]| anisotropy(v, eps).powi(2);
            let g2 = mag * mag;
            let mut fd = [0.0; 2];
            for d in 0..2 {
                let (mut p, mut m) = (g, g);
                p[d] += h;
                m[d] -= h;
                fd[d] = g2 * (a2(p) - a2(m)) / (2.0 * h);
            }
            let scale = 12.0 * eps * (1.0 + eps) * mag;
            let err = ((closed[0] - fd[0]).powi(2) + (closed[1] - fd[1]).powi(2)).sqrt() / scale;
            worst = worst.max(err);
        }
    }
    Check::new("anisotropy gradient vs finite differences", worst, 1e-6)
}

/// Mass and energy closure of the lumped model over the reference run.
pub fn oracle_closures() -> (Check, Check) {
    let p = CellParams::default();
    let s0 = oracle::reference_state();
    let tr = oracle::integrate(&p, s0, 1.2e7, 1.0, 1e5).expect("oracle");
    (
        Check::new("oracle mass closure", tr.max_mass_defect, 1e-6),
        Check::new("oracle energy closure", tr.energy_defect(&p, s0), 1e-6),
    )
}

/// Small reactor with flow, used by determinism and restart checks.
pub fn small_reactor() -> RunConfig {
    let mut c = RunConfig::default();
    c.scenario = ScenarioConfig {
        cells: [60, 50, 1],
        dx: 0.2,
        dt: 2.0e-3,
        total_time: 0.2,
        output_every: 0.1,
        u_in: 2.0,
        ..Default::default()
    };
    c.reactor = ReactorGeometry::default().scaled(0.25);
    c.seed = Seed { radius: 1.2, ..Default::default() };
    c.material.lambda = 10.0;
    c
}

fn snapshot_bytes(threads: usize, steps: u64) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
    pool.install(|| {
        let mut sim = Simulation::new(small_reactor()).expect("reactor");
        sim.run_steps(steps).expect("run");
        let mut buf = Vec::new();
        sim.snapshot().write_to(&mut buf).expect("write");
        buf
    })
}

/// 1 if snapshots after `steps` differ between 1 and 3 worker threads.
pub fn thread_determinism(steps: u64) -> Check {
    let a = snapshot_bytes(1, steps);
    let b = snapshot_bytes(3, steps);
    Check::new("bitwise determinism across thread counts", if a == b { 0.0 } else { 1.0 }, 0.0)
}

/// 1 if a written snapshot does not read back bit for bit.
pub fn snapshot_round_trip() -> Check {
    let mut sim = Simulation::new(small_reactor()).expect("reactor");
    sim.run_steps(5).expect("run");
    let snap = sim.snapshot();
    let mut buf = Vec::new();
    snap.write_to(&mut buf).expect("write");
    let back = Snapshot::read_from(buf.as_slice()).expect("read");
    let same = back.fields.len() == snap.fields.len()
        && back
            .fields
            .iter()
            .zip(&snap.fields)
            .all(|((n1, a), (n2, b))| n1 == n2 && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    Check::new("snapshot bitwise round trip", if same && back == snap { 0.0 } else { 1.0 }, 0.0)
}

/// Largest relative side spread of a quiescent hexagon in a closed box.
pub fn quiescent_symmetry(steps: u64) -> Check {
    let mut cfg = closed_box(1.5);
    cfg.scenario.cells = [60, 60, 1];
    cfg.scenario.walls = ThermalWalls::Isothermal;
    let mut sim = Simulation::new(cfg).expect("box");
    let mut worst: f64 = 0.0;
    let every = steps / 5;
    for _ in 0..5 {
        sim.run_steps(every).expect("run");
        let shape = sim.shape().expect("hexagon");
        worst = worst.max(metrics::side_spread(&shape));
    }
    Check::new("quiescent hexagon side spread", worst, 0.03)
}
