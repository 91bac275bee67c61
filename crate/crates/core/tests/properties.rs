mod common;

use common::Check;

fn assert_check(c: Check) {
    println!("{}", c.line());
    assert!(c.pass(), "{}", c.line());
}

#[test]
fn lattice_moments_hold_to_round_off() {
    assert_check(common::lattice_moments());
}

#[test]
fn closed_box_conserves_solute_while_growing() {
    assert_check(common::closed_box_solute(10_000));
}

#[test]
fn closed_box_conserves_heat_and_solute_without_growth() {
    let (heat, u) = common::closed_box_heat(10_000);
    assert_check(heat);
    assert_check(u);
}

#[test]
fn uniform_resting_state_is_a_fixed_point() {
    assert_check(common::fixed_point(500));
}

#[test]
fn anisotropy_term_matches_finite_differences() {
    assert_check(common::anisotropy_gradient(0.05));
    assert_check(common::anisotropy_gradient(0.2));
}

#[test]
fn oracle_closes_mass_and_energy() {
    let (m, e) = common::oracle_closures();
    assert_check(m);
    assert_check(e);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    assert_check(common::thread_determinism(40));
}

#[test]
fn snapshots_round_trip() {
    assert_check(common::snapshot_round_trip());
}

#[test]
fn quiescent_hexagon_keeps_six_equal_sides() {
    assert_check(common::quiescent_symmetry(5_000));
}
