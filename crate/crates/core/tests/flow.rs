use crystalsim_core::flow::{viscosity_from_relaxation, FlowSolver, Friction};
use crystalsim_core::grid::{Boundary, Field, Grid, TagMap};

fn channel(nx: usize, ny: usize) -> (Grid, TagMap) {
    let g = Grid::new_2d(nx, ny).unwrap();
    (g, TagMap::new(g, [Boundary::Periodic, Boundary::Closed, Boundary::Periodic]))
}

#[test]
fn body_force_channel_matches_poiseuille() {
    let (g, tags) = channel(4, 32);
    let tau = 1.0;
    let nu = viscosity_from_relaxation(tau, 1.0 / 3.0, 1.0);
    let force = 1e-6;
    let mut f = FlowSolver::new(g, tau).unwrap();
    f.body_force = [force, 0.0];
    for _ in 0..30_000 {
        f.step(None, &tags).unwrap();
    }
    let h = 32.0;
    let umax = force * h * h / (8.0 * nu);
    let mut worst: f64 = 0.0;
    for j in 0..32 {
        let y = j as f64 + 0.5;
        let exact = force / (2.0 * nu) * y * (h - y);
        let u = f.velocity(g.index(2, j, 0));
        worst = worst.max((u[0] - exact).abs() / umax);
        assert!(u[1].abs() < 1e-12 * umax.max(1.0));
    }
    assert!(worst < 0.01, "Poiseuille profile off by {worst:.3e} of u_max");
}

#[test]
fn closed_box_flow_conserves_mass() {
    let g = Grid::new_2d(40, 30).unwrap();
    let tags = TagMap::new(g, [Boundary::Closed; 3]);
    let mut f = FlowSolver::new(g, 0.8).unwrap();
    for idx in g.interior().collect::<Vec<_>>() {
        let [i, j, _] = g.coords(idx).unwrap();
        let (x, y) = (i as f64 / 40.0, j as f64 / 30.0);
        let u = [
            0.02 * (std::f64::consts::PI * y).sin(),
            -0.02 * (std::f64::consts::PI * x).sin(),
        ];
        f.set_equilibrium(idx, 1.0 + 0.01 * (6.0 * x).cos(), u);
    }
    f.update_moments(None, &tags);
    let m0 = f.total_mass(&tags);
    for _ in 0..10_000 {
        f.step(None, &tags).unwrap();
    }
    let drift = ((f.total_mass(&tags) - m0) / m0).abs();
    assert!(drift < 1e-12, "mass drift {drift:.3e}");
}

#[test]
fn friction_stops_flow_inside_solid() {
    let (g, tags) = channel(4, 60);
    let tau = 1.0;
    let nu = viscosity_from_relaxation(tau, 1.0 / 3.0, 1.0);
    let w0 = 2.0;
    let mut phi = Field::scalar(g, -1.0);
    for idx in g.interior().collect::<Vec<_>>() {
        let [_, j, _] = g.coords(idx).unwrap();
        let d = 10.0 - (j as f64 + 0.5 - 30.0).abs();
        phi.set(idx, (d / (2f64.sqrt() * w0)).tanh());
    }
    phi.fill_periodic_halo(tags.boundaries());
    let mut f = FlowSolver::new(g, tau).unwrap();
    f.body_force = [1e-6, 0.0];
    f.friction = Some(Friction { eta_f: nu, w0 });
    for _ in 0..20_000 {
        f.step(Some(&phi), &tags).unwrap();
    }
    let mut fluid: f64 = 0.0;
    let mut solid: f64 = 0.0;
    for idx in g.interior().collect::<Vec<_>>() {
        let u = f.velocity(idx)[0].abs();
        let p = phi.at(idx);
        if p < -0.99 {
            fluid = fluid.max(u);
        } else if p > 0.99 {
            solid = solid.max(u);
        }
    }
    assert!(fluid > 0.0);
    assert!(solid < 1e-2 * fluid, "solid velocity {solid:.3e} vs fluid {fluid:.3e}");
    for idx in g.interior().filter(|&i| phi.at(i) > 0.99).collect::<Vec<_>>() {
        assert!(f.masked_velocity(idx)[0].abs() < 1e-4 * fluid);
    }
}
