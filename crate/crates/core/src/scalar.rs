//! Finite-difference transport of supersaturation and temperature.
//!
//! Everything here works in lattice units: velocities in cells/step,
//! diffusivities in cells²/step, right-hand sides per step. Advection uses an
//! upwind WENO3 derivative per axis; diffusion is a conservative face-flux
//! form of the fourth-order central Laplacian. Time stepping is forward
//! Euler.

use crate::error::{Result, SimError};
use crate::grid::{CellTag, Field, Grid, TagMap};
use crate::material::blend;

/// How wall cells enter the diffusion stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallPolicy {
    /// Mirror ghost values, zero flux through walls.
    Neumann,
    /// Wall cells keep their stored value and take part in the stencil.
    Dirichlet,
}

impl WallPolicy {
    #[inline]
    fn participates(self, tag: CellTag) -> bool {
        tag.is_domain() || (self == WallPolicy::Dirichlet && tag == CellTag::Wall)
    }
}

/// Cells advanced by [`explicit_step`].
#[inline]
pub fn is_updated(tag: CellTag) -> bool {
    tag.is_active()
}

/// Left-biased WENO3 (Z-type weights) value at `i+½` from `s_{i−1}, s_i, s_{i+1}`.
#[inline]
pub fn weno3_reconstruct(sm: f64, s0: f64, sp: f64, eps: f64) -> f64 {
    let p0 = -0.5 * sm + 1.5 * s0;
    let p1 = 0.5 * s0 + 0.5 * sp;
    let b0 = (s0 - sm) * (s0 - sm);
    let b1 = (sp - s0) * (sp - s0);
    let tau = (b1 - b0).abs();
    let a0 = (1.0 / 3.0) * (1.0 + tau / (b0 + eps));
    let a1 = (2.0 / 3.0) * (1.0 + tau / (b1 + eps));
    (a0 * p0 + a1 * p1) / (a0 + a1)
}

/// Upwind WENO3 approximation of `∂s/∂x` for advection speed sign `u`.
/// `v` holds `s_{i−2} .. s_{i+2}`.
#[inline]
pub fn weno3_derivative(v: [f64; 5], u: f64, eps: f64) -> f64 {
    if u >= 0.0 {
        let right = weno3_reconstruct(v[1], v[2], v[3], eps);
        let left = weno3_reconstruct(v[0], v[1], v[2], eps);
        right - left
    } else {
        let right = weno3_reconstruct(v[4], v[3], v[2], eps);
        let left = weno3_reconstruct(v[3], v[2], v[1], eps);
        right - left
    }
}

/// Five-point line through `idx` along `axis`, mirrored across anything that
/// is not a domain cell.
#[inline]
fn line(s: &Field, tags: &TagMap, idx: usize, stride: usize) -> [f64; 5] {
    let c = s.at(idx);
    let ok = |i: usize| tags.get(i).is_domain();
    let (p1, p2) = if ok(idx + stride) {
        let p1 = s.at(idx + stride);
        (p1, if ok(idx + 2 * stride) { s.at(idx + 2 * stride) } else { p1 })
    } else {
        let m1 = if ok(idx - stride) { s.at(idx - stride) } else { c };
        (c, m1)
    };
    let (m1, m2) = if ok(idx - stride) {
        let m1 = s.at(idx - stride);
        (m1, if ok(idx - 2 * stride) { s.at(idx - 2 * stride) } else { m1 })
    } else {
        let p1 = if ok(idx + stride) { s.at(idx + stride) } else { c };
        (c, p1)
    };
    [m2, m1, c, p1, p2]
}

/// `u·∇s` at one cell.
#[inline]
pub fn advective_derivative(s: &Field, vel: &Field, tags: &TagMap, idx: usize, eps: f64) -> f64 {
    let g = s.grid();
    let mut acc = 0.0;
    for axis in 0..g.dim() {
        let u = vel.comp(idx, axis);
        if u == 0.0 {
            continue;
        }
        let v = line(s, tags, idx, g.stride(axis));
        acc += u * weno3_derivative(v, u, eps);
    }
    acc
}

/// `−u·∇s` over the interior.
pub fn weno3_advect(s: &Field, vel: &Field, tags: &TagMap, eps: f64) -> Field {
    let g = s.grid();
    let mut out = Field::scalar(g, 0.0);
    g.par_map_interior(out.data_mut(), 1, |idx, o| {
        o[0] = if tags.get(idx).is_domain() {
            -advective_derivative(s, vel, tags, idx, eps)
        } else {
            0.0
        };
    });
    out
}

/// Flux `k ∂s/∂x` through the face between `lo` and `lo + stride`.
/// Depends only on the face, so neighbouring cells see the same value.
#[inline]
fn face_flux(s: &Field, k: &Field, tags: &TagMap, policy: WallPolicy, lo: usize, stride: usize) -> f64 {
    let hi = lo + stride;
    let part = |i: usize| policy.participates(tags.get(i));
    if !part(lo) || !part(hi) {
        return 0.0;
    }
    let s0 = s.at(lo);
    let s1 = s.at(hi);
    let sm = if part(lo - stride) { s.at(lo - stride) } else { s0 };
    let sp = if part(hi + stride) { s.at(hi + stride) } else { s1 };
    let kf = 0.5 * (k.at(lo) + k.at(hi));
    kf * (-sp + 15.0 * s1 - 15.0 * s0 + sm) / 12.0
}

/// `∇·(k ∇s)` at one cell.
#[inline]
pub fn divergence_at(s: &Field, k: &Field, tags: &TagMap, policy: WallPolicy, idx: usize) -> f64 {
    let g = s.grid();
    let mut acc = 0.0;
    for axis in 0..g.dim() {
        let st = g.stride(axis);
        acc += face_flux(s, k, tags, policy, idx, st) - face_flux(s, k, tags, policy, idx - st, st);
    }
    acc
}

/// `∇·(coeff ∇s)` over the interior.
pub fn central4_diffuse(s: &Field, coeff: &Field, tags: &TagMap, policy: WallPolicy) -> Field {
    let g = s.grid();
    let mut out = Field::scalar(g, 0.0);
    g.par_map_interior(out.data_mut(), 1, |idx, o| {
        o[0] = if tags.get(idx).is_domain() {
            divergence_at(s, coeff, tags, policy, idx)
        } else {
            0.0
        };
    });
    out
}

/// Fills a coefficient field from φ everywhere, halo included.
pub fn coefficient_field<F: Fn(f64) -> f64 + Sync>(phi: &Field, f: F) -> Field {
    let mut out = Field::scalar(phi.grid(), 0.0);
    for (o, p) in out.data_mut().iter_mut().zip(phi.data()) {
        *o = f(*p);
    }
    out
}

/// `((1−φ)κ_L + (1+φ)κ_S)/2`
pub fn mixture_diffusivity(phi: f64, kappa_l: f64, kappa_s: f64) -> f64 {
    blend(phi, kappa_l, kappa_s)
}

/// One-sided solute mobility `q(φ) = (1−φ)/2`.
#[inline]
pub fn solute_mobility(phi: f64) -> f64 {
    (0.5 * (1.0 - phi)).max(0.0)
}

/// Lattice-unit transport coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// solute diffusivity, cells²/step
    pub d: f64,
    pub kappa_l: f64,
    pub kappa_s: f64,
    /// volumetric heat capacities (any consistent unit)
    pub cap_l: f64,
    pub cap_s: f64,
    /// temperature rise per unit change of φ at unit heat capacity:
    /// `½·|ΔH|·n_S` in the units of `cap_*` times K
    pub latent: f64,
    pub weno_eps: f64,
}

/// Right-hand side of the supersaturation equation, per step.
pub fn supersaturation_rhs(
    u: &Field,
    phi: &Field,
    dphi: &Field,
    vel: &Field,
    tags: &TagMap,
    p: &TransportParams,
) -> Field {
    let g = u.grid();
    let coeff = coefficient_field(phi, |ph| p.d * solute_mobility(ph));
    let mut out = Field::scalar(g, 0.0);
    g.par_map_interior(out.data_mut(), 1, |idx, o| {
        if !tags.get(idx).is_domain() {
            o[0] = 0.0;
            return;
        }
        o[0] = -advective_derivative(u, vel, tags, idx, p.weno_eps)
            + divergence_at(u, &coeff, tags, WallPolicy::Neumann, idx)
            - 0.5 * dphi.at(idx);
    });
    out
}

/// Right-hand side of the temperature equation, per step.
pub fn temperature_rhs(
    t: &Field,
    phi: &Field,
    dphi: &Field,
    vel: &Field,
    tags: &TagMap,
    policy: WallPolicy,
    p: &TransportParams,
) -> Field {
    let g = t.grid();
    let cap = coefficient_field(phi, |ph| blend(ph, p.cap_l, p.cap_s));
    let ck = coefficient_field(phi, |ph| blend(ph, p.cap_l, p.cap_s) * blend(ph, p.kappa_l, p.kappa_s));
    let mut out = Field::scalar(g, 0.0);
    g.par_map_interior(out.data_mut(), 1, |idx, o| {
        if !tags.get(idx).is_domain() {
            o[0] = 0.0;
            return;
        }
        let c = cap.at(idx);
        o[0] = -advective_derivative(t, vel, tags, idx, p.weno_eps)
            + divergence_at(t, &ck, tags, policy, idx) / c
            + heat_source_rate(dphi.at(idx), c, p.latent);
    });
    out
}

/// Temperature rate from a φ rate: growth (`dφ > 0`) heats.
#[inline]
pub fn heat_source_rate(dphi: f64, cap: f64, latent: f64) -> f64 {
    latent * dphi / cap
}

/// Forward Euler on updated cells; refreshes periodic halos.
pub fn explicit_step(s: &mut Field, rhs: &Field, tags: &TagMap, dt: f64) {
    let g = s.grid();
    for idx in g.interior().collect::<Vec<_>>() {
        if is_updated(tags.get(idx)) {
            let v = s.at(idx) + dt * rhs.at(idx);
            s.set(idx, v);
        }
    }
    s.fill_periodic_halo(tags.boundaries());
}

/// Parallel forward Euler into a fresh buffer.
pub fn euler_update(s: &Field, rhs: &Field, tags: &TagMap, dt: f64) -> Field {
    let g = s.grid();
    let mut out = s.clone();
    g.par_map_interior(out.data_mut(), 1, |idx, o| {
        o[0] = if is_updated(tags.get(idx)) {
            s.at(idx) + dt * rhs.at(idx)
        } else {
            s.at(idx)
        };
    });
    out.fill_periodic_halo(tags.boundaries());
    out
}

/// Rejects supersaturation below complete depletion.
pub fn check_depletion(u: &Field, tags: &TagMap) -> Result<()> {
    let g = u.grid();
    for idx in g.interior() {
        if !tags.get(idx).is_domain() {
            continue;
        }
        let v = u.at(idx);
        if v.is_finite() && v >= -1.0 {
            continue;
        }
        let [i, j, k] = g.coords(idx).unwrap_or([0; 3]);
        if !v.is_finite() {
            return Err(SimError::NonFinite { field: "U", i, j, k });
        }
        return Err(SimError::Depletion { value: v, i, j, k });
    }
    Ok(())
}

/// Forward-Euler stability limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRule {
    pub safety: f64,
    pub cfl: f64,
}

impl Default for StabilityRule {
    fn default() -> Self {
        StabilityRule { safety: 0.8, cfl: 0.4 }
    }
}

impl StabilityRule {
    /// Largest admissible step for diffusivity `kappa_max` and speed
    /// `speed_max` (any consistent units). The fourth-order Laplacian has
    /// spectral radius `16d/(3δx²)`, so forward Euler needs
    /// `δt ≤ 3δx²/(8dκ)`.
    pub fn max_dt(&self, dx: f64, dim: usize, kappa_max: f64, speed_max: f64) -> f64 {
        let diff = if kappa_max > 0.0 {
            3.0 * dx * dx / (8.0 * dim as f64 * kappa_max)
        } else {
            f64::INFINITY
        };
        let adv = if speed_max > 0.0 {
            self.cfl * dx / speed_max
        } else {
            f64::INFINITY
        };
        self.safety * diff.min(adv)
    }

    pub fn check(&self, dt: f64, dx: f64, dim: usize, kappa_max: f64, speed_max: f64) -> Result<()> {
        let limit = self.max_dt(dx, dim, kappa_max, speed_max);
        if dt <= limit {
            Ok(())
        } else {
            Err(SimError::Stability(format!(
                "dt = {dt:.4e} s exceeds the explicit limit {limit:.4e} s (dx = {dx} mm, kappa_max = {kappa_max} mm²/s, |u|max = {speed_max} mm/s)"
            )))
        }
    }
}

/// Sum of `weight(idx)·s(idx)` over domain cells in fixed order.
pub fn weighted_total<F: Fn(usize) -> f64 + Sync + Send>(g: Grid, tags: &TagMap, f: F) -> f64 {
    g.sum(|idx| if tags.get(idx).is_domain() { f(idx) } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use proptest::prelude::*;

    fn periodic(n: usize) -> (Grid, TagMap) {
        let g = Grid::new_2d(n, n).unwrap();
        (g, TagMap::new(g, [Boundary::Periodic; 3]))
    }

    #[test]
    fn mixture_values() {
        assert_eq!(mixture_diffusivity(-1.0, 0.146, 1.1), 0.146);
        assert_eq!(mixture_diffusivity(1.0, 0.146, 1.1), 1.1);
        assert!((mixture_diffusivity(0.0, 0.146, 1.1) - 0.623).abs() < 1e-15);
        assert_eq!(solute_mobility(1.0), 0.0);
        assert_eq!(solute_mobility(-1.0), 1.0);
    }

    #[test]
    fn uniform_field_has_no_rhs() {
        let (g, tags) = periodic(12);
        let s = Field::scalar(g, 0.7);
        let mut vel = Field::new(g, 2, 0.0);
        for (n, idx) in g.interior().collect::<Vec<_>>().into_iter().enumerate() {
            vel.cell_mut(idx).copy_from_slice(&[0.1 * (n as f64).sin(), -0.05]);
        }
        let k = Field::scalar(g, 0.3);
        let a = weno3_advect(&s, &vel, &tags, 1e-6);
        let d = central4_diffuse(&s, &k, &tags, WallPolicy::Neumann);
        for idx in g.interior() {
            assert_eq!(a.at(idx), 0.0);
            assert_eq!(d.at(idx), 0.0);
        }
    }

    #[test]
    fn linear_profile_gradient_is_exact() {
        let g = Grid::new_2d(16, 8).unwrap();
        let tags = TagMap::new(g, [Boundary::Periodic; 3]);
        let mut s = Field::scalar(g, 0.0);
        for idx in 0..g.len() {
            let p = g.padded_coords(idx);
            s.set(idx, 0.3 * p[0] as f64 - 0.2 * p[1] as f64);
        }
        let mut vel = Field::new(g, 2, 0.0);
        for idx in 0..g.len() {
            vel.cell_mut(idx).copy_from_slice(&[0.25, -0.5]);
        }
        for idx in g.interior().filter(|&i| {
            let [i0, j0, _] = g.coords(i).unwrap();
            (2..14).contains(&i0) && (2..6).contains(&j0)
        }) {
            let r = -advective_derivative(&s, &vel, &tags, idx, 1e-6);
            assert!((r - -(0.25 * 0.3 + 0.5 * 0.2)).abs() < 1e-13, "{r}");
        }
    }

    #[test]
    fn quadratic_laplacian_is_exact() {
        let g = Grid::new_2d(12, 10).unwrap();
        let tags = TagMap::new(g, [Boundary::Periodic; 3]);
        let mut s = Field::scalar(g, 0.0);
        for idx in 0..g.len() {
            let p = g.padded_coords(idx);
            s.set(idx, (p[0] as f64).powi(2));
        }
        let k = Field::scalar(g, 1.0);
        for idx in g.interior() {
            let [i, _, _] = g.coords(idx).unwrap();
            if (2..10).contains(&i) {
                assert!((divergence_at(&s, &k, &tags, WallPolicy::Neumann, idx) - 2.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn constant_coefficient_matches_five_point_stencil() {
        let (g, tags) = periodic(10);
        let mut s = Field::scalar(g, 0.0);
        for (n, idx) in g.interior().collect::<Vec<_>>().into_iter().enumerate() {
            s.set(idx, ((n * 37) % 11) as f64 * 0.1);
        }
        s.fill_periodic_halo(tags.boundaries());
        let k = Field::scalar(g, 1.0);
        let idx = g.index(5, 5, 0);
        let c = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        let mut expect = 0.0;
        for axis in 0..2 {
            let st = g.stride(axis) as isize;
            for (m, w) in c.iter().enumerate() {
                expect += w * s.at((idx as isize + (m as isize - 2) * st) as usize);
            }
        }
        assert!((divergence_at(&s, &k, &tags, WallPolicy::Neumann, idx) - expect).abs() < 1e-13);
    }

    #[test]
    fn solid_interior_blocks_solute_diffusion() {
        let (g, tags) = periodic(10);
        let phi = Field::scalar(g, 1.0);
        let dphi = Field::scalar(g, 0.0);
        let vel = Field::new(g, 2, 0.0);
        let mut u = Field::scalar(g, 0.0);
        for (n, idx) in g.interior().collect::<Vec<_>>().into_iter().enumerate() {
            u.set(idx, (n as f64 * 0.37).sin());
        }
        let p = TransportParams {
            d: 0.1,
            kappa_l: 0.1,
            kappa_s: 0.2,
            cap_l: 1.0,
            cap_s: 1.0,
            latent: 1.0,
            weno_eps: 1e-12,
        };
        let r = supersaturation_rhs(&u, &phi, &dphi, &vel, &tags, &p);
        for idx in g.interior() {
            assert_eq!(r.at(idx), 0.0);
        }
        let mut dphi = Field::scalar(g, 0.0);
        let c = g.index(4, 4, 0);
        dphi.set(c, 0.2);
        let r = supersaturation_rhs(&u, &phi, &dphi, &vel, &tags, &p);
        assert!((r.at(c) + 0.1).abs() < 1e-15);
        let t = Field::scalar(g, 1.0);
        let rt = temperature_rhs(&t, &phi, &dphi, &vel, &tags, WallPolicy::Neumann, &p);
        assert!(rt.at(c) > 0.0);
    }

    #[test]
    fn stability_limit() {
        let r = StabilityRule::default();
        let dt = r.max_dt(0.1, 2, 1.1, 0.0);
        assert!((dt - 0.8 * 3.0 * 0.01 / (16.0 * 1.1)).abs() < 1e-15);
        assert!(r.check(dt, 0.1, 2, 1.1, 0.0).is_ok());
        assert!(r.check(2.0 * dt, 0.1, 2, 1.1, 0.0).is_err());
        let dt_adv = r.max_dt(0.1, 2, 1e-9, 10.0);
        assert!((dt_adv - 0.8 * 0.4 * 0.1 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn euler_with_zero_rhs_is_identity() {
        let (g, tags) = periodic(6);
        let mut s = Field::scalar(g, 0.25);
        let before = s.clone();
        explicit_step(&mut s, &Field::scalar(g, 0.0), &tags, 1.0);
        assert_eq!(s, before);
    }

    #[test]
    fn depletion_guard() {
        let (g, tags) = periodic(6);
        let mut u = Field::scalar(g, 0.0);
        assert!(check_depletion(&u, &tags).is_ok());
        u.set(g.index(2, 3, 0), -1.5);
        assert!(matches!(check_depletion(&u, &tags), Err(SimError::Depletion { .. })));
    }

    proptest! {
        #[test]
        fn reconstruction_is_convex_combination(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
            let r = weno3_reconstruct(a, b, c, 1e-12);
            let p0 = -0.5 * a + 1.5 * b;
            let p1 = 0.5 * b + 0.5 * c;
            prop_assert!(r >= p0.min(p1) - 1e-12 && r <= p0.max(p1) + 1e-12);
        }
    }
}
