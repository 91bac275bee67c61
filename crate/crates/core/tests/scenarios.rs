use crystalsim_core::campaigns::{desk_reactor, ReactorRun};
use crystalsim_core::driver::Simulation;
use crystalsim_core::grid::CellTag;

fn short_run(lambda: f64) -> (f64, f64) {
    let mut cfg = desk_reactor(&ReactorRun { hours: 0.5, acceleration: 400.0, outputs: 1, ..Default::default() });
    cfg.material.lambda = lambda;
    let mut sim = Simulation::new(cfg).unwrap();
    let before = sim.sample().solid;
    let steps = (sim.config.scenario.total_time / sim.config.scenario.dt).round() as u64;
    sim.run_steps(steps).unwrap();
    (before, sim.sample().solid)
}

#[test]
fn seed_dissolves_at_lambda_three() {
    // capillary critical supersaturation a1·W0/(λR) ≈ 0.098 exceeds U0 = 0.045
    let (before, after) = short_run(3.0);
    assert!(before > 1.0);
    assert!(after < 0.05 * before, "solid {before:.3} -> {after:.3} mm²");
}

#[test]
fn seed_grows_at_reactor_lambda() {
    let (before, after) = short_run(30.0);
    assert!(after > 1.1 * before, "solid {before:.3} -> {after:.3} mm²");
}

#[test]
fn baffled_reactor_passes_the_inlet_flux_to_the_outlet() {
    for baffle in [0, 2] {
        let cfg = desk_reactor(&ReactorRun { u_in: 14.0, baffle, acceleration: 400.0, ..Default::default() });
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run_steps(5000).unwrap();
        let nx = sim.grid().extents()[0];
        let f = sim.flow.as_ref().unwrap();
        let q_in = f.column_flux(sim.tags(), 1);
        let q_out = f.column_flux(sim.tags(), nx - 2);
        let err = ((q_out - q_in) / q_in).abs();
        let n_in = sim.tags().count(CellTag::Inlet) as f64;
        let u_lat = 14.0 * sim.units.dt / sim.units.dx;
        // each edge row loses the diagonal link that meets the wall, 1/6 of a row
        let delivered = (q_in / ((n_in - 1.0 / 3.0) * u_lat) - 1.0).abs();
        assert!(delivered < 0.01, "inlet carries {q_in:.4e} for {n_in} cells at {u_lat:.4}");
        assert!(err < 0.01, "baffle {baffle}: inlet {q_in:.5e} outlet {q_out:.5e} ({err:.3e})");
    }
}
