//! Modified lattice-Boltzmann scheme for the anisotropic phase field.
//!
//! All quantities are in lattice units (δx = δt = 1): `w0` in cells, `tau0`
//! in steps. The update at a destination cell `y` for velocity `α`, with
//! source `x = y − c_α`, is
//!
//! ```text
//! a²(y) h_α(y, t+1) = P_α(x) − (1 − a²(y)) h_α(y, t)
//! P_α(x) = h_α(x) − (h_α(x) − h_eq_α(x)) / η(x) + w_α Q(x) / τ0
//! ```
//!
//! Walls reflect the post-collision value (`P_α(x) := P_ᾱ(y)`), which makes
//! the wall flux vanish.

use crate::error::{Result, SimError};
use crate::grid::{CellTag, Field, Grid, TagMap};
use crate::lattice::{make_lattice, Family, LatticeSpec};

/// Gradient magnitude below which a cell is treated as bulk.
pub const GRADIENT_FLOOR: f64 = 1e-8;
/// Hard abort threshold on |φ|.
pub const PHI_ABORT: f64 = 1.2;

/// `a_s = 1 + ε cos 6ϑ`, ϑ the in-plane angle of the normal.
pub fn anisotropy_angle(angle: f64, eps: f64) -> f64 {
    1.0 + eps * (6.0 * angle).cos()
}

/// `(cos 6ϑ, sin 6ϑ)` of the in-plane direction of `grad`, from the sixth
/// power of the unit complex number; `None` below the gradient floor.
#[inline]
fn six_fold(grad: [f64; 3]) -> Option<(f64, f64)> {
    let r = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
    if r < GRADIENT_FLOOR {
        return None;
    }
    let (x, y) = (grad[0] / r, grad[1] / r);
    let (x2, y2) = (x * x, y * y);
    let c = x2 * x2 * x2 - 15.0 * x2 * x2 * y2 + 15.0 * x2 * y2 * y2 - y2 * y2 * y2;
    let s = x * y * (6.0 * x2 * x2 - 20.0 * x2 * y2 + 6.0 * y2 * y2);
    Some((c, s))
}

/// a_s from a gradient (or normal) vector; 1 below the gradient floor.
pub fn anisotropy(grad: [f64; 3], eps: f64) -> f64 {
    if eps == 0.0 {
        return 1.0;
    }
    six_fold(grad).map_or(1.0, |(c, _)| 1.0 + eps * c)
}

/// `|∇φ|² ∂(a_s²)/∂∇φ` in closed form; zero below the gradient floor.
pub fn anisotropy_gradient_term(grad: [f64; 3], eps: f64) -> [f64; 3] {
    if eps == 0.0 {
        return [0.0; 3];
    }
    match six_fold(grad) {
        None => [0.0; 3],
        Some((c, sn)) => {
            let s = -12.0 * eps * (1.0 + eps * c) * sn;
            [-s * grad[1], s * grad[0], 0.0]
        }
    }
}

/// `(φ − φ³) + λ(U + θ)(1 − φ²)²`
#[inline]
pub fn phase_source(phi: f64, u: f64, theta: f64, lambda: f64) -> f64 {
    let w = 1.0 - phi * phi;
    phi - phi * phi * phi + lambda * (u + theta) * w * w
}

/// Smallest `τ0` (steps) for which the explicit source update cannot
/// oscillate. Linearising `φ ← φ + Q(φ)/τ0` needs `∂Q/∂φ ≥ −2τ0`; with
/// `|U + θ| ≤ 1`, `min ∂Q/∂φ = −2 − λ·max|4φ(1−φ²)| = −2 − (8/3^{3/2})λ`.
pub fn min_tau0_steps(lambda: f64) -> f64 {
    1.0 + 4.0 / 27f64.sqrt() * lambda.abs()
}

/// `η_φ = a² W0²/(c_s² τ0) + 1/2`
#[inline]
pub fn phase_relaxation(a: f64, w0: f64, tau0: f64, cs2: f64) -> f64 {
    a * a * w0 * w0 / (cs2 * tau0) + 0.5
}

/// `h_eq_α = w_α (φ − c_α·(W0²/τ0) A / c_s²)` with `A` the anisotropy term.
pub fn phase_equilibrium(
    lattice: &LatticeSpec,
    phi: f64,
    aniso_term: [f64; 3],
    w0: f64,
    tau0: f64,
    out: &mut [f64],
) {
    let scale = w0 * w0 / (tau0 * lattice.cs2);
    for (a, o) in out.iter_mut().enumerate().take(lattice.q()) {
        let c = lattice.velocities[a];
        let ca = c[0] as f64 * aniso_term[0] + c[1] as f64 * aniso_term[1] + c[2] as f64 * aniso_term[2];
        *o = lattice.weights[a] * (phi - scale * ca);
    }
}

/// Where the a_s² premultiplier of the streamed population is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PremultiplierAt {
    Destination,
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// cells
    pub w0: f64,
    /// steps
    pub tau0: f64,
    pub eps: f64,
    pub lambda: f64,
    pub premultiplier: PremultiplierAt,
}

/// Per-cell geometric layout of [`PhaseSolver::geometry`].
pub const GEO_A: usize = 0;
pub const GEO_TERM: usize = 1;
pub const GEO_NORMAL: usize = 4;
pub const GEO_COMPS: usize = 7;

pub struct PhaseSolver {
    lattice: LatticeSpec,
    grid: Grid,
    pub params: PhaseParams,
    pub h: Field,
    h_next: Field,
    post: Field,
    pub phi: Field,
    /// φ change over the last step (per step, lattice units).
    pub dphi: Field,
    /// a_s, anisotropy term (3), unit normal (3; zero where undefined).
    pub geometry: Field,
}

/// Value of `field` at `nb`, falling back to `center` across walls and open
/// boundaries (zero normal gradient).
#[inline]
fn neighbour(field: &Field, tags: &TagMap, center: usize, nb: usize) -> f64 {
    if tags.get(nb).is_domain() {
        field.at(nb)
    } else {
        field.at(center)
    }
}

/// Second-order central gradient with mirrored walls.
pub fn central_gradient(field: &Field, tags: &TagMap, idx: usize) -> [f64; 3] {
    let g = field.grid();
    let mut out = [0.0; 3];
    for (axis, o) in out.iter_mut().enumerate().take(g.dim()) {
        let s = g.stride(axis);
        let p = neighbour(field, tags, idx, idx + s);
        let m = neighbour(field, tags, idx, idx - s);
        *o = 0.5 * (p - m);
    }
    out
}

impl PhaseSolver {
    pub fn new(grid: Grid, params: PhaseParams) -> Result<Self> {
        let lattice = make_lattice(grid.dim(), Family::Phase)?;
        if !(params.w0 > 0.0 && params.tau0 > 0.0) {
            return Err(SimError::invalid("phase", "w0 and tau0 must be positive"));
        }
        let min_tau = min_tau0_steps(params.lambda);
        if params.tau0 < min_tau {
            return Err(SimError::Stability(format!(
                "tau0 = {:.3} steps is below {min_tau:.3} steps needed by the source term at lambda = {}",
                params.tau0, params.lambda
            )));
        }
        let q = lattice.q();
        let h = Field::new(grid, q, 0.0);
        Ok(PhaseSolver {
            lattice,
            grid,
            params,
            h_next: h.clone(),
            post: h.clone(),
            h,
            phi: Field::scalar(grid, -1.0),
            dphi: Field::scalar(grid, 0.0),
            geometry: Field::new(grid, GEO_COMPS, 0.0),
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Installs φ and sets the populations to their equilibrium.
    pub fn initialize(&mut self, phi: Field, tags: &TagMap) {
        self.phi = phi;
        self.phi.fill_periodic_halo(tags.boundaries());
        self.update_geometry(tags);
        let lat = &self.lattice;
        let p = self.params;
        let phi = &self.phi;
        let geo = &self.geometry;
        let q = lat.q();
        self.grid.par_map_interior(self.h.data_mut(), q, |idx, out| {
            let t = geo.cell(idx);
            phase_equilibrium(lat, phi.at(idx), [t[1], t[2], t[3]], p.w0, p.tau0, out);
        });
        self.dphi = Field::scalar(self.grid, 0.0);
    }

    /// Recomputes a_s, the anisotropy term and the normal from φ.
    pub fn update_geometry(&mut self, tags: &TagMap) {
        let eps = self.params.eps;
        let phi = &self.phi;
        self.grid.par_map_interior(self.geometry.data_mut(), GEO_COMPS, |idx, out| {
            out.fill(0.0);
            out[GEO_A] = 1.0;
            if !tags.get(idx).is_domain() {
                return;
            }
            let grad = central_gradient(phi, tags, idx);
            let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
            out[GEO_A] = anisotropy(grad, eps);
            let t = anisotropy_gradient_term(grad, eps);
            out[GEO_TERM..GEO_TERM + 3].copy_from_slice(&t);
            if norm > GRADIENT_FLOOR {
                for d in 0..3 {
                    out[GEO_NORMAL + d] = -grad[d] / norm;
                }
            }
        });
    }

    /// Advances φ one step with supersaturation `u` and normalized
    /// temperature `theta`.
    pub fn step(&mut self, u: &Field, theta: &Field, tags: &TagMap) -> Result<()> {
        let bounds = tags.boundaries();
        self.phi.fill_periodic_halo(bounds);
        self.update_geometry(tags);
        let q = self.lattice.q();
        let p = self.params;

        let mut post = std::mem::replace(&mut self.post, Field::new(self.grid, 0, 0.0));
        {
            let lat = &self.lattice;
            let h = &self.h;
            let phi = &self.phi;
            let geo = &self.geometry;
            self.grid.par_map_interior(post.data_mut(), q, |idx, out| {
                if !tags.get(idx).is_domain() {
                    out.fill(0.0);
                    return;
                }
                let g = geo.cell(idx);
                let ph = phi.at(idx);
                let mut heq = [0.0; 9];
                phase_equilibrium(lat, ph, [g[1], g[2], g[3]], p.w0, p.tau0, &mut heq);
                let eta = phase_relaxation(g[GEO_A], p.w0, p.tau0, lat.cs2);
                let src = phase_source(ph, u.at(idx), theta.at(idx), p.lambda) / p.tau0;
                let hc = h.cell(idx);
                for a in 0..q {
                    out[a] = hc[a] - (hc[a] - heq[a]) / eta + lat.weights[a] * src;
                }
            });
        }
        post.fill_periodic_halo(bounds);

        let mut next = std::mem::replace(&mut self.h_next, Field::new(self.grid, 0, 0.0));
        {
            let lat = &self.lattice;
            let offsets: Vec<isize> = lat.velocities.iter().map(|c| self.grid.offset(*c)).collect();
            let opposite = &lat.opposite;
            let h = &self.h;
            let geo = &self.geometry;
            let post = &post;
            self.grid.par_map_interior(next.data_mut(), q, |y, out| {
                if !tags.get(y).is_domain() {
                    out.copy_from_slice(h.cell(y));
                    return;
                }
                let a2_dest = geo.comp(y, GEO_A).powi(2);
                for a in 0..q {
                    let x = (y as isize - offsets[a]) as usize;
                    let (px, a2) = match tags.get(x) {
                        CellTag::Fluid | CellTag::Outlet | CellTag::Inlet => {
                            let a2 = match p.premultiplier {
                                PremultiplierAt::Destination => a2_dest,
                                PremultiplierAt::Source => geo.comp(x, GEO_A).powi(2),
                            };
                            (post.comp(x, a), a2)
                        }
                        CellTag::Open => (post.comp(y, a), a2_dest),
                        CellTag::Wall => (post.comp(y, opposite[a]), a2_dest),
                    };
                    out[a] = (px - (1.0 - a2) * h.comp(y, a)) / a2;
                }
            });
        }
        self.h_next = std::mem::replace(&mut self.h, next);
        self.post = post;

        let h = &self.h;
        let mut phi_new = Field::scalar(self.grid, -1.0);
        self.grid.par_map_interior(phi_new.data_mut(), 1, |idx, out| {
            out[0] = if tags.get(idx).is_domain() { h.cell(idx).iter().sum() } else { -1.0 };
        });
        let phi_old = &self.phi;
        let pn = &phi_new;
        self.grid.par_map_interior(self.dphi.data_mut(), 1, |idx, out| {
            out[0] = pn.at(idx) - phi_old.at(idx);
        });
        self.phi = phi_new;
        self.phi.fill_periodic_halo(bounds);
        self.check(tags)
    }

    fn check(&self, tags: &TagMap) -> Result<()> {
        for idx in self.grid.interior() {
            if !tags.get(idx).is_domain() {
                continue;
            }
            let v = self.phi.at(idx);
            if !v.is_finite() || v.abs() > PHI_ABORT {
                let [i, j, k] = self.grid.coords(idx).unwrap_or([0; 3]);
                if !v.is_finite() {
                    return Err(SimError::NonFinite { field: "phi", i, j, k });
                }
                return Err(SimError::PhaseOutOfBounds { value: v, i, j, k });
            }
        }
        Ok(())
    }

    /// Largest |φ| over domain cells.
    pub fn max_abs_phi(&self, tags: &TagMap) -> f64 {
        self.grid
            .interior()
            .filter(|&i| tags.get(i).is_domain())
            .map(|i| self.phi.at(i).abs())
            .fold(0.0, f64::max)
    }

    /// Largest |Σh − φ| over domain cells.
    pub fn moment_defect(&self, tags: &TagMap) -> f64 {
        self.grid
            .interior()
            .filter(|&i| tags.get(i).is_domain())
            .map(|i| (self.h.cell(i).iter().sum::<f64>() - self.phi.at(i)).abs())
            .fold(0.0, f64::max)
    }
}
