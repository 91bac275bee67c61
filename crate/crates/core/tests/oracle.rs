use crystalsim_core::material::c_sat;
use crystalsim_core::oracle::{equilibrium_state, integrate, reference_state, CellParams};

const T_END: f64 = 1.2e7;

#[test]
fn reference_trajectory_closes_mass_and_energy() {
    let p = CellParams::default();
    let s0 = reference_state();
    let tr = integrate(&p, s0, T_END, 1.0, 1e4).unwrap();
    let f = tr.final_state;
    println!("final c = {:.6e}, R = {:.6}, T = {:.6}", f.c, f.r, f.t);
    println!("mass defect {:.3e}, energy defect {:.3e}", tr.max_mass_defect, tr.energy_defect(&p, s0));
    assert!(tr.converged, "gap {:.3e}", tr.equilibrium_gap);
    assert!((f.c - c_sat(f.t)).abs() <= 1e-9);
    assert!(tr.max_mass_defect <= 1e-6);
    assert!(tr.energy_defect(&p, s0) <= 1e-6);
    assert!(((tr.heat_released - tr.enthalpy_rise) / tr.enthalpy_rise).abs() <= 1e-6);
    // monotone approach
    for w in tr.samples.windows(2) {
        assert!(w[1].state.c <= w[0].state.c);
        assert!(w[1].state.r >= w[0].state.r);
        assert!(w[1].state.t >= w[0].state.t);
    }
    let eq = equilibrium_state(&p, s0);
    assert!(((eq.r - f.r) / f.r).abs() < 1e-5);
    assert!((eq.t - f.t).abs() < 1e-4);
}

#[test]
fn halving_the_step_leaves_the_end_state() {
    let p = CellParams::default();
    let s0 = reference_state();
    let a = integrate(&p, s0, 4.0e6, 2.0, 1e6).unwrap().final_state;
    let b = integrate(&p, s0, 4.0e6, 1.0, 1e6).unwrap().final_state;
    assert!(((a.c - b.c) / b.c).abs() < 1e-8);
    assert!(((a.r - b.r) / b.r).abs() < 1e-8);
    assert!(((a.t - b.t) / b.t).abs() < 1e-8);
}

#[test]
fn initial_instant_has_reference_concentration() {
    let p = CellParams::default();
    let tr = integrate(&p, reference_state(), 10.0, 1.0, 1.0).unwrap();
    assert_eq!(tr.samples[0].state.c, 8.87e-4);
    assert!(tr.samples[0].heat_rate > 0.0);
}
