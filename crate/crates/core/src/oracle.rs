//! Lumped model of a spherical crystal growing in a closed, adiabatic cell.
//!
//! State is `(c, R, T)`: liquid concentration (mol/cm³), crystal radius (cm)
//! and cell temperature (K). Solute leaves the liquid through the crystal
//! surface at rate `k(T)·4πR²·(c − c_sat(T))`; the solid takes it up at its
//! molar density and the released enthalpy heats liquid and solid.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Result, SimError};
use crate::material::{MaterialParams, C_SAT_BAND};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    /// mol/cm³
    pub c: f64,
    /// cm
    pub r: f64,
    /// K
    pub t: f64,
}

impl OdeState {
    fn axpy(self, h: f64, d: [f64; 3]) -> Self {
        OdeState {
            c: self.c + h * d[0],
            r: self.r + h * d[1],
            t: self.t + h * d[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub material: MaterialParams,
    /// cm³
    pub liquid_volume: f64,
    /// cm, edge of the cubic cell
    pub box_edge: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            material: MaterialParams::default(),
            liquid_volume: 1.0,
            box_edge: 1.0,
        }
    }
}

/// Initial condition of the reference case.
pub fn reference_state() -> OdeState {
    OdeState { c: 8.87e-4, r: 0.1, t: 298.15 }
}

impl CellParams {
    /// Liquid heat capacity of the cell, J/K.
    pub fn liquid_heat_capacity(&self) -> f64 {
        self.liquid_volume * self.material.heat_capacity_liquid()
    }

    /// Total heat capacity at radius `r`, J/K.
    pub fn heat_capacity(&self, r: f64) -> f64 {
        self.liquid_heat_capacity() + 4.0 / 3.0 * PI * r.powi(3) * self.material.heat_capacity_solid()
    }

    /// Solute flux into the crystal, mol/s.
    pub fn molar_growth_rate(&self, s: OdeState) -> f64 {
        let m = &self.material;
        m.k_growth(s.t) * 4.0 * PI * s.r * s.r * (s.c - m.c_sat(s.t))
    }

    /// Heat release rate, W.
    pub fn heat_release_rate(&self, s: OdeState) -> f64 {
        -self.material.delta_h * 1e3 * self.molar_growth_rate(s)
    }

    /// `(dc/dt, dR/dt, dT/dt)`
    pub fn rhs(&self, s: OdeState) -> [f64; 3] {
        let m = &self.material;
        let flux = self.molar_growth_rate(s);
        let area = 4.0 * PI * s.r * s.r;
        [
            -flux / self.liquid_volume,
            flux / (area * m.solid_molar_density()),
            self.heat_release_rate(s) / self.heat_capacity(s.r),
        ]
    }

    pub fn rk4_step(&self, s: OdeState, dt: f64) -> OdeState {
        let k1 = self.rhs(s);
        let k2 = self.rhs(s.axpy(0.5 * dt, k1));
        let k3 = self.rhs(s.axpy(0.5 * dt, k2));
        let k4 = self.rhs(s.axpy(dt, k3));
        let mut d = [0.0; 3];
        for i in 0..3 {
            d[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        s.axpy(dt, d)
    }

    /// Moles of solute moved from liquid to solid, from each side's balance.
    pub fn transferred_moles(&self, s0: OdeState, s: OdeState) -> (f64, f64) {
        let liquid = self.liquid_volume * (s0.c - s.c);
        let solid = self.material.solid_molar_density() * 4.0 / 3.0 * PI * (s.r.powi(3) - s0.r.powi(3));
        (liquid, solid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// s
    pub time: f64,
    pub state: OdeState,
    /// W
    pub heat_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: OdeState,
    /// `|c − c_sat(T)|` at the end, mol/cm³
    pub equilibrium_gap: f64,
    pub converged: bool,
    /// `∫ C(R) dT`, J
    pub enthalpy_rise: f64,
    /// `∫ heat rate dt`, J
    pub heat_released: f64,
    /// Largest relative mass-closure defect along the path.
    pub max_mass_defect: f64,
}

impl Trajectory {
    /// Relative mismatch between the enthalpy rise of the cell and the
    /// crystallization heat of the moles solidified.
    pub fn energy_defect(&self, params: &CellParams, s0: OdeState) -> f64 {
        let (_, solid) = params.transferred_moles(s0, self.final_state);
        let expect = -params.material.delta_h * 1e3 * solid;
        ((self.enthalpy_rise - expect) / expect).abs()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,c_mol_cm3,r_cm,t_k,heat_rate_w")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.6e},{:.12e},{:.12e},{:.12e},{:.12e}",
                s.time, s.state.c, s.state.r, s.state.t, s.heat_rate
            )?;
        }
        Ok(())
    }

    /// Linear interpolation of the sampled path at `time`.
    pub fn at(&self, time: f64) -> OdeState {
        let s = &self.samples;
        if time <= s[0].time {
            return s[0].state;
        }
        for w in s.windows(2) {
            if time <= w[1].time {
                let f = (time - w[0].time) / (w[1].time - w[0].time);
                let a = w[0].state;
                let b = w[1].state;
                return OdeState {
                    c: a.c + f * (b.c - a.c),
                    r: a.r + f * (b.r - a.r),
                    t: a.t + f * (b.t - a.t),
                };
            }
        }
        self.final_state
    }
}

/// Equilibrium tolerance used to flag convergence, mol/cm³.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// RK4 integration to `t_end` with step `dt`, sampling every `sample_every`
/// seconds (plus the end point).
pub fn integrate(params: &CellParams, s0: OdeState, t_end: f64, dt: f64, sample_every: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(SimError::invalid("dt", "time step and end time must be positive"));
    }
    if !(s0.c >= 0.0 && s0.r > 0.0) {
        return Err(SimError::invalid("state", "need c >= 0 and R > 0"));
    }
    if !(C_SAT_BAND.0..=C_SAT_BAND.1).contains(&s0.t) {
        log::warn!("T = {} K is outside the solubility correlation band", s0.t);
    }
    let steps = (t_end / dt).round() as u64;
    let every = ((sample_every / dt).round() as u64).max(1);
    let sample = |time: f64, s: OdeState| Sample { time, state: s, heat_rate: params.heat_release_rate(s) };
    let mut samples = vec![sample(0.0, s0)];
    let mut s = s0;
    let mut enthalpy = 0.0;
    let mut released = 0.0;
    let mut max_defect: f64 = 0.0;
    let mut q_prev = params.heat_release_rate(s0);
    for n in 1..=steps {
        let next = params.rk4_step(s, dt);
        enthalpy += 0.5 * (params.heat_capacity(s.r) + params.heat_capacity(next.r)) * (next.t - s.t);
        let q = params.heat_release_rate(next);
        released += 0.5 * (q_prev + q) * dt;
        q_prev = q;
        s = next;
        if 2.0 * s.r > params.box_edge {
            return Err(SimError::invalid("radius", format!("crystal of radius {} cm no longer fits the cell", s.r)));
        }
        let (liq, sol) = params.transferred_moles(s0, s);
        if sol.abs() > 0.0 {
            max_defect = max_defect.max(((liq - sol) / sol).abs());
        }
        if n % every == 0 || n == steps {
            samples.push(sample(n as f64 * dt, s));
        }
    }
    let gap = (s.c - params.material.c_sat(s.t)).abs();
    if gap > EQUILIBRIUM_TOL {
        log::warn!("adiabatic cell not at equilibrium after {t_end} s (gap {gap:.3e} mol/cm3)");
    }
    Ok(Trajectory {
        samples,
        final_state: s,
        equilibrium_gap: gap,
        converged: gap <= EQUILIBRIUM_TOL,
        enthalpy_rise: enthalpy,
        heat_released: released,
        max_mass_defect: max_defect,
    })
}

/// Closed-form equilibrium `(c, R, T)` reachable from `s0`: the state where
/// `c = c_sat(T)` with solute and energy balances satisfied. Solved by
/// bisection on the transferred moles; used as an integrator-free check.
pub fn equilibrium_state(params: &CellParams, s0: OdeState) -> OdeState {
    let m = &params.material;
    let n_s = m.solid_molar_density();
    let state_for = |moles: f64| -> OdeState {
        let c = s0.c - moles / params.liquid_volume;
        let r = (s0.r.powi(3) + moles / (n_s * 4.0 / 3.0 * PI)).cbrt();
        // ∫C(R)dT is approximated by the mean capacity; the bisection only
        // seeds the check, the integrator is the reference
        let cap = 0.5 * (params.heat_capacity(s0.r) + params.heat_capacity(r));
        let t = s0.t - m.delta_h * 1e3 * moles / cap;
        OdeState { c, r, t }
    };
    let gap = |moles: f64| {
        let s = state_for(moles);
        s.c - m.c_sat(s.t)
    };
    let (mut lo, mut hi) = (0.0, s0.c * params.liquid_volume);
    if gap(lo) <= 0.0 {
        return s0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    state_for(0.5 * (lo + hi))
}
