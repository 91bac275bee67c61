//! D2Q9 BGK flow solver with interface friction and velocity masking.

use crate::error::{Result, SimError};
use crate::grid::{Boundary, CellTag, Field, Grid, TagMap};
use crate::lattice::{make_lattice, Family, LatticeSpec};
use crate::material::FRICTION_H;

/// Components of the macroscopic field: ρ, u, u*.
pub const MACRO_COMPS: usize = 5;
pub const RHO: usize = 0;
pub const UX: usize = 1;
pub const USX: usize = 3;

/// Second-order Hermite equilibrium.
pub fn equilibrium(lattice: &LatticeSpec, rho: f64, u: &[f64], out: &mut [f64]) {
    let cs2 = lattice.cs2;
    let uu: f64 = u.iter().take(lattice.dim).map(|v| v * v).sum();
    for (a, o) in out.iter_mut().enumerate().take(lattice.q()) {
        let cu = lattice.dot(a, u);
        *o = rho * lattice.weights[a] * (1.0 + cu / cs2 + (cu * cu - cs2 * uu) / (2.0 * cs2 * cs2));
    }
}

/// `τ = ν/c_s² + δt/2`
pub fn relaxation_from_viscosity(nu: f64, cs2: f64, dt: f64) -> f64 {
    nu / cs2 + 0.5 * dt
}

pub fn viscosity_from_relaxation(tau: f64, cs2: f64, dt: f64) -> f64 {
    (tau - 0.5 * dt) * cs2
}

/// Interface drag coefficient γ such that `F = −γ u`.
#[inline]
pub fn friction_coefficient(phi: f64, eta_f: f64, w0: f64) -> f64 {
    FRICTION_H * eta_f * (1.0 + phi) * (1.0 + phi) * (1.0 - phi) / (4.0 * w0 * w0)
}

pub fn friction_force(phi: f64, u: [f64; 2], eta_f: f64, w0: f64) -> [f64; 2] {
    let g = friction_coefficient(phi, eta_f, w0);
    [-g * u[0], -g * u[1]]
}

/// `u* = (1−φ)/2 · u`
#[inline]
pub fn mask_factor(phi: f64) -> f64 {
    0.5 * (1.0 - phi)
}

pub fn mask_velocity(u: &Field, phi: &Field) -> Field {
    let g = u.grid();
    let mut out = Field::new(g, u.comps(), 0.0);
    g.par_map_interior(out.data_mut(), u.comps(), |idx, cell| {
        let m = mask_factor(phi.at(idx));
        for (c, v) in cell.iter_mut().enumerate() {
            *v = m * u.comp(idx, c);
        }
    });
    out
}

/// Collision operator. BGK is the only implementation; the trait is the
/// seam for multiple-relaxation-time variants.
pub trait Collision: Send + Sync {
    /// Writes post-collision populations. `source` holds the raw forcing
    /// moments `w_α[(c−u)/c_s² + (c·u)c/c_s⁴]·F`; the operator applies its
    /// own prefactor.
    fn collide(&self, f: &[f64], feq: &[f64], source: &[f64], out: &mut [f64]);
    fn tau(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Bgk {
    pub tau: f64,
}

impl Collision for Bgk {
    #[inline]
    fn collide(&self, f: &[f64], feq: &[f64], source: &[f64], out: &mut [f64]) {
        let omega = 1.0 / self.tau;
        let pre = 1.0 - 0.5 * omega;
        for a in 0..f.len() {
            out[a] = f[a] - omega * (f[a] - feq[a]) + pre * source[a];
        }
    }

    fn tau(&self) -> f64 {
        self.tau
    }
}

/// Drag coupling to the order parameter, lattice units.
#[derive(Debug, Clone, Copy)]
pub struct Friction {
    /// dynamic viscosity ρ_L ν
    pub eta_f: f64,
    pub w0: f64,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    rho: f64,
    u: [f64; 2],
    u_star: [f64; 2],
    force: [f64; 2],
}

pub struct FlowSolver {
    lattice: LatticeSpec,
    grid: Grid,
    collision: Box<dyn Collision>,
    pub f: Field,
    post: Field,
    /// ρ, u, u* after the last moment update.
    pub macros: Field,
    pub body_force: [f64; 2],
    pub friction: Option<Friction>,
    pub inlet_velocity: [f64; 2],
    pub inlet_density: f64,
}

impl FlowSolver {
    /// At rest with unit density.
    pub fn new(grid: Grid, tau: f64) -> Result<Self> {
        let lattice = make_lattice(grid.dim(), Family::Flow)?;
        if !(tau > 0.5) {
            return Err(SimError::Stability(format!("relaxation time {tau} must exceed 1/2")));
        }
        let q = lattice.q();
        let mut f = Field::new(grid, q, 0.0);
        let mut feq = vec![0.0; q];
        equilibrium(&lattice, 1.0, &[0.0, 0.0], &mut feq);
        for idx in 0..grid.len() {
            f.cell_mut(idx).copy_from_slice(&feq);
        }
        let mut macros = Field::new(grid, MACRO_COMPS, 0.0);
        for idx in 0..grid.len() {
            macros.cell_mut(idx)[RHO] = 1.0;
        }
        Ok(FlowSolver {
            lattice,
            grid,
            collision: Box::new(Bgk { tau }),
            post: f.clone(),
            f,
            macros,
            body_force: [0.0; 2],
            friction: None,
            inlet_velocity: [0.0; 2],
            inlet_density: 1.0,
        })
    }

    pub fn with_collision(mut self, collision: Box<dyn Collision>) -> Self {
        self.collision = collision;
        self
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn tau(&self) -> f64 {
        self.collision.tau()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Resets one cell to equilibrium at `(ρ, u)`.
    pub fn set_equilibrium(&mut self, idx: usize, rho: f64, u: [f64; 2]) {
        let lattice = &self.lattice;
        equilibrium(lattice, rho, &u, self.f.cell_mut(idx));
        let m = self.macros.cell_mut(idx);
        m[RHO] = rho;
        m[UX] = u[0];
        m[UX + 1] = u[1];
        m[USX] = u[0];
        m[USX + 1] = u[1];
    }

    #[inline]
    pub fn rho(&self, idx: usize) -> f64 {
        self.macros.comp(idx, RHO)
    }

    #[inline]
    pub fn velocity(&self, idx: usize) -> [f64; 2] {
        [self.macros.comp(idx, UX), self.macros.comp(idx, UX + 1)]
    }

    #[inline]
    pub fn masked_velocity(&self, idx: usize) -> [f64; 2] {
        [self.macros.comp(idx, USX), self.macros.comp(idx, USX + 1)]
    }

    /// Masked velocity as a two-component field.
    pub fn masked_velocity_field(&self) -> Field {
        let mut out = Field::new(self.grid, 2, 0.0);
        let m = &self.macros;
        self.grid.par_map_interior(out.data_mut(), 2, |idx, cell| {
            cell[0] = m.comp(idx, USX);
            cell[1] = m.comp(idx, USX + 1);
        });
        out
    }

    fn moments(&self, f: &[f64], phi: Option<f64>) -> Moments {
        let lat = &self.lattice;
        let mut rho = 0.0;
        let mut m = [0.0; 2];
        for (a, fa) in f.iter().enumerate() {
            rho += fa;
            m[0] += lat.velocities[a][0] as f64 * fa;
            m[1] += lat.velocities[a][1] as f64 * fa;
        }
        // F = g_body − γu with u = (m + F/2)/ρ, solved implicitly in u
        let gamma = match (self.friction, phi) {
            (Some(fr), Some(p)) => friction_coefficient(p, fr.eta_f, fr.w0),
            _ => 0.0,
        };
        let g = self.body_force;
        let den = rho + 0.5 * gamma;
        let u = [(m[0] + 0.5 * g[0]) / den, (m[1] + 0.5 * g[1]) / den];
        let mask = phi.map_or(1.0, mask_factor);
        Moments {
            rho,
            u,
            u_star: [mask * u[0], mask * u[1]],
            force: [g[0] - gamma * u[0], g[1] - gamma * u[1]],
        }
    }

    /// Recomputes ρ, u and u* from the populations.
    pub fn update_moments(&mut self, phi: Option<&Field>, tags: &TagMap) {
        let f = &self.f;
        let mut macros = std::mem::replace(&mut self.macros, Field::new(self.grid, 0, 0.0));
        let this = &*self;
        self.grid.par_map_interior(macros.data_mut(), MACRO_COMPS, |idx, out| {
            if !tags.get(idx).is_domain() {
                out.fill(0.0);
                out[RHO] = 1.0;
                return;
            }
            let mo = this.moments(f.cell(idx), phi.map(|p| p.at(idx)));
            out[RHO] = mo.rho;
            out[UX] = mo.u[0];
            out[UX + 1] = mo.u[1];
            out[USX] = mo.u_star[0];
            out[USX + 1] = mo.u_star[1];
        });
        self.macros = macros;
    }

    /// One collide-and-stream step. `phi` enables friction and masking.
    pub fn step(&mut self, phi: Option<&Field>, tags: &TagMap) -> Result<()> {
        let mut post = std::mem::replace(&mut self.post, Field::new(self.grid, 0, 0.0));
        let q = self.lattice.q();
        let lat = &self.lattice;
        let this = &*self;
        let f = &self.f;
        this.grid.par_map_interior(post.data_mut(), q, |idx, out| {
            if !tags.get(idx).is_domain() {
                out.copy_from_slice(f.cell(idx));
                return;
            }
            let fc = f.cell(idx);
            let mo = this.moments(fc, phi.map(|p| p.at(idx)));
            let mut feq = [0.0; 9];
            equilibrium(lat, mo.rho, &mo.u_star, &mut feq);
            let mut src = [0.0; 9];
            let cs2 = lat.cs2;
            let us = mo.u_star;
            for (a, s) in src.iter_mut().enumerate().take(q) {
                let c = lat.velocities[a];
                let cu = c[0] as f64 * us[0] + c[1] as f64 * us[1];
                let mut acc = 0.0;
                for d in 0..2 {
                    let cd = c[d] as f64;
                    acc += ((cd - us[d]) / cs2 + cu * cd / (cs2 * cs2)) * mo.force[d];
                }
                *s = lat.weights[a] * acc;
            }
            this.collision.collide(fc, &feq[..q], &src[..q], out);
        });
        let bounds = tags.boundaries();
        post.fill_periodic_halo(bounds);

        let mut next = std::mem::replace(&mut self.f, Field::new(self.grid, 0, 0.0));
        let offsets: Vec<isize> = lat.velocities.iter().map(|c| self.grid.offset(*c)).collect();
        let opposite = &lat.opposite;
        let mut inlet_eq = [0.0; 9];
        equilibrium(lat, self.inlet_density, &self.inlet_velocity, &mut inlet_eq);
        // moving-wall bounce-back: each inlet link carries ρ_in w_α 2c_α·u_in/c_s²,
        // so the inlet face passes exactly ρ_in u_in per row
        let mut inlet_bb = [0.0; 9];
        for (a, b) in inlet_bb.iter_mut().enumerate().take(q) {
            *b = 2.0 * lat.weights[a] * self.inlet_density * lat.dot(a, &self.inlet_velocity) / lat.cs2;
        }
        let post_ref = &post;
        let macros = &self.macros;
        let outlet_density = self.inlet_density;
        self.grid.par_map_interior(next.data_mut(), q, |idx, out| {
            match tags.get(idx) {
                CellTag::Fluid | CellTag::Outlet => {}
                CellTag::Inlet => {
                    out.copy_from_slice(&inlet_eq[..q]);
                    return;
                }
                _ => {
                    out.copy_from_slice(post_ref.cell(idx));
                    return;
                }
            }
            // pressure outlet: the ghost copies this cell with ρ reset to the
            // outlet density, f_α + (ρ_out − ρ) f_eq_α(1, u*)
            let mut open_eq = [0.0; 9];
            let mut open_shift = 0.0;
            if tags.get(idx) == CellTag::Outlet {
                let us = [macros.comp(idx, USX), macros.comp(idx, USX + 1)];
                equilibrium(lat, 1.0, &us, &mut open_eq);
                open_shift = outlet_density - macros.comp(idx, RHO);
            }
            for a in 0..q {
                let src = (idx as isize - offsets[a]) as usize;
                out[a] = match tags.get(src) {
                    CellTag::Fluid | CellTag::Outlet => post_ref.comp(src, a),
                    CellTag::Inlet => post_ref.comp(idx, opposite[a]) + inlet_bb[a],
                    CellTag::Wall => post_ref.comp(idx, opposite[a]),
                    CellTag::Open => post_ref.comp(idx, a) + open_shift * open_eq[a],
                };
            }
        });
        self.f = next;
        self.post = post;
        if let Some((_, [i, j, k])) = self.f.find_non_finite() {
            return Err(SimError::NonFinite { field: "populations", i, j, k });
        }
        self.update_moments(phi, tags);
        Ok(())
    }

    /// Σρ over domain cells.
    pub fn total_mass(&self, tags: &TagMap) -> f64 {
        let f = &self.f;
        self.grid.sum(|idx| {
            if tags.get(idx).is_domain() {
                f.cell(idx).iter().sum()
            } else {
                0.0
            }
        })
    }

    /// Net x-momentum flux through column `i` (ρu_x summed over domain cells).
    pub fn column_flux(&self, tags: &TagMap, i: usize) -> f64 {
        let [_, ny, _] = self.grid.extents();
        (0..ny)
            .map(|j| self.grid.index(i, j, 0))
            .filter(|&idx| tags.get(idx).is_domain())
            .map(|idx| self.rho(idx) * self.velocity(idx)[0])
            .sum()
    }
}

/// Periodic box helper.
pub fn periodic_tags(grid: Grid) -> TagMap {
    TagMap::new(grid, [Boundary::Periodic; 3])
}
