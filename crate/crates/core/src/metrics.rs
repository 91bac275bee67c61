//! Derived quantities: error norms, the Gaussian-hill solution, crystal side
//! lengths, growth rate, quality ratio, heat generation and probes.

use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::grid::{Field, Grid, TagMap};
use crate::material::{blend, MaterialParams};

/// Spreading Gaussian hill with unit peak at `t = 0`.
/// `d` is the (symmetric) diffusion tensor, mm²/s.
pub fn gaussian_analytic(x: [f64; 2], t: f64, sigma0: f64, d: [[f64; 2]; 2]) -> f64 {
    let psi0 = 2.0 * PI * sigma0 * sigma0;
    let s = [
        [sigma0 * sigma0 + 2.0 * t * d[0][0], 2.0 * t * d[0][1]],
        [2.0 * t * d[1][0], sigma0 * sigma0 + 2.0 * t * d[1][1]],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
    let q = inv[0][0] * x[0] * x[0] + (inv[0][1] + inv[1][0]) * x[0] * x[1] + inv[1][1] * x[1] * x[1];
    psi0 / (2.0 * PI * det.sqrt()) * (-0.5 * q).exp()
}

/// Relative l² error `sqrt(Σ(C − C_an)² / ΣC_an²)`.
pub fn l2_error(c: &[f64], c_an: &[f64]) -> Result<f64> {
    if c.len() != c_an.len() {
        return Err(SimError::Metrics("fields are not congruent".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in c.iter().zip(c_an) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return Err(SimError::Metrics("reference field is identically zero".into()));
    }
    Ok((num / den).sqrt())
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn convergence_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Facet distances of a hexagonal crystal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalShape {
    /// mm, L_1..L_6 along `orientation + k·60°`
    pub sides: [f64; 6],
    /// mm
    pub centroid: [f64; 2],
}

/// Cells with φ > 0 connected (4-neighbour) to each other; errors when
/// there is no solid or more than one piece.
fn solid_region(phi: &Field, tags: &TagMap) -> Result<Vec<[usize; 2]>> {
    let g = phi.grid();
    let [nx, ny, _] = g.extents();
    let solid = |i: usize, j: usize| {
        let idx = g.index(i, j, 0);
        tags.get(idx).is_domain() && phi.at(idx) > 0.0
    };
    let mut seen = vec![false; nx * ny];
    let mut pieces: Vec<Vec<[usize; 2]>> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if seen[j * nx + i] || !solid(i, j) {
                continue;
            }
            let mut piece = Vec::new();
            let mut stack = vec![[i, j]];
            seen[j * nx + i] = true;
            while let Some([a, b]) = stack.pop() {
                piece.push([a, b]);
                let mut push = |x: usize, y: usize| {
                    if !seen[y * nx + x] && solid(x, y) {
                        seen[y * nx + x] = true;
                        stack.push([x, y]);
                    }
                };
                if a > 0 {
                    push(a - 1, b);
                }
                if a + 1 < nx {
                    push(a + 1, b);
                }
                if b > 0 {
                    push(a, b - 1);
                }
                if b + 1 < ny {
                    push(a, b + 1);
                }
            }
            pieces.push(piece);
        }
    }
    match pieces.len() {
        0 => Err(SimError::Metrics("no solid region".into())),
        1 => Ok(pieces.pop().unwrap_or_default()),
        n => Err(SimError::Metrics(format!("{n} disconnected solid regions"))),
    }
}

/// Bilinear φ at cell-centred coordinates `(x, y)` relative to cell
/// `(i0, j0)`; outside the grid the nearest edge value is used.
fn sample(phi: &Field, i0: usize, j0: usize, x: f64, y: f64) -> f64 {
    let g = phi.grid();
    let [nx, ny, _] = g.extents();
    let fx = x.floor();
    let fy = y.floor();
    let tx = x - fx;
    let ty = y - fy;
    let at = |di: f64, dj: f64| {
        let i = (i0 as f64 + fx + di).clamp(0.0, (nx - 1) as f64) as usize;
        let j = (j0 as f64 + fy + dj).clamp(0.0, (ny - 1) as f64) as usize;
        phi.at(g.index(i, j, 0))
    };
    (1.0 - tx) * (1.0 - ty) * at(0.0, 0.0)
        + tx * (1.0 - ty) * at(1.0, 0.0)
        + (1.0 - tx) * ty * at(0.0, 1.0)
        + tx * ty * at(1.0, 1.0)
}

/// Side distances along `orientation + k·60°` from the φ-weighted centroid
/// of the solid, to the φ = 0 crossing.
pub fn extract_sides(phi: &Field, tags: &TagMap, dx: f64, orientation: f64) -> Result<CrystalShape> {
    if phi.grid().dim() != 2 {
        return Err(SimError::Metrics("side extraction needs a 2D field".into()));
    }
    let g = phi.grid();
    let region = solid_region(phi, tags)?;
    // work relative to the region's lower corner so whole-cell translations
    // give bitwise-identical results
    let i0 = region.iter().map(|c| c[0]).min().unwrap_or(0);
    let j0 = region.iter().map(|c| c[1]).min().unwrap_or(0);
    let mut w_sum = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut sorted = region.clone();
    sorted.sort_by_key(|c| (c[1], c[0]));
    for [i, j] in &sorted {
        let w = phi.at(g.index(*i, *j, 0));
        w_sum += w;
        cx += w * (i - i0) as f64;
        cy += w * (j - j0) as f64;
    }
    cx /= w_sum;
    cy /= w_sum;
    let extent = g.extents()[0].max(g.extents()[1]) as f64;
    let step = 0.05;
    let mut sides = [0.0; 6];
    for (k, side) in sides.iter_mut().enumerate() {
        let ang = orientation + k as f64 * PI / 3.0;
        let (dy, dx_) = ang.sin_cos();
        let mut prev = sample(phi, i0, j0, cx, cy);
        if prev <= 0.0 {
            return Err(SimError::Metrics("centroid is not inside the solid".into()));
        }
        let mut s = 0.0;
        let mut found = None;
        while s < extent {
            let s_next = s + step;
            let v = sample(phi, i0, j0, cx + s_next * dx_, cy + s_next * dy);
            if v <= 0.0 {
                found = Some(s + step * prev / (prev - v));
                break;
            }
            prev = v;
            s = s_next;
        }
        *side = found.ok_or_else(|| SimError::Metrics("no interface crossing along ray".into()))? * dx;
    }
    let centroid = [(cx + i0 as f64 + 0.5) * dx, (cy + j0 as f64 + 0.5) * dx];
    Ok(CrystalShape { sides, centroid })
}

/// Growth rates, mm/h: displacement form `Σ(L_i(t) − L_i(0))/(6t)` and the
/// side-length form `ΣL_i(t)/(6t)`.
pub fn growth_rate(shape_t: &CrystalShape, shape_0: &CrystalShape, hours: f64) -> Result<(f64, f64)> {
    if !(hours > 0.0) {
        return Err(SimError::Metrics("growth time must be positive".into()));
    }
    let total: f64 = shape_t.sides.iter().sum();
    let disp: f64 = shape_t.sides.iter().zip(&shape_0.sides).map(|(a, b)| a - b).sum();
    Ok((disp / (6.0 * hours), total / (6.0 * hours)))
}

/// `max(L_i)/min(L_i)`
pub fn quality(shape: &CrystalShape) -> Result<f64> {
    let max = shape.sides.iter().cloned().fold(f64::MIN, f64::max);
    let min = shape.sides.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) {
        return Err(SimError::Metrics("side lengths must be positive".into()));
    }
    Ok(max / min)
}

/// Relative spread `(max − min)/mean` of the side lengths.
pub fn side_spread(shape: &CrystalShape) -> f64 {
    let max = shape.sides.iter().cloned().fold(f64::MIN, f64::max);
    let min = shape.sides.iter().cloned().fold(f64::MAX, f64::min);
    let mean = shape.sides.iter().sum::<f64>() / 6.0;
    (max - min) / mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatUnit {
    /// K/s
    TemperatureRate,
    /// W/cm³
    Volumetric,
}

/// Latent heat source per cell from a φ rate (1/s).
pub fn heat_generation(dphi_dt: &Field, phi: &Field, m: &MaterialParams, unit: HeatUnit) -> Field {
    let g = dphi_dt.grid();
    let latent = m.latent_heat_volumetric();
    let (cl, cs) = (m.heat_capacity_liquid(), m.heat_capacity_solid());
    let mut out = Field::scalar(g, 0.0);
    g.par_map_interior(out.data_mut(), 1, |idx, o| {
        let q = 0.5 * latent * dphi_dt.at(idx);
        o[0] = match unit {
            HeatUnit::Volumetric => q,
            HeatUnit::TemperatureRate => q / blend(phi.at(idx), cl, cs),
        };
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub peak: f64,
    /// cell indices
    pub peak_cell: [usize; 3],
    /// values along the horizontal centre line `j = ny/2` (z mid-plane in 3D)
    pub centerline: Vec<f64>,
}

pub fn probes(t: &Field, tags: &TagMap) -> Probe {
    let g = t.grid();
    let mut peak = f64::MIN;
    let mut peak_cell = [0; 3];
    for idx in g.interior() {
        if !tags.get(idx).is_domain() {
            continue;
        }
        let v = t.at(idx);
        if v > peak {
            peak = v;
            peak_cell = g.coords(idx).unwrap_or([0; 3]);
        }
    }
    let [nx, ny, nz] = g.extents();
    let centerline = (0..nx).map(|i| t.at(g.index(i, ny / 2, nz / 2))).collect();
    Probe { peak, peak_cell, centerline }
}

/// Solid area (2D, mm²) or volume (3D, mm³): `Σ(1+φ)/2·δx^d`.
pub fn solid_measure(phi: &Field, tags: &TagMap, dx: f64) -> f64 {
    let g = phi.grid();
    let cell = dx.powi(g.dim() as i32);
    g.sum(|idx| if tags.get(idx).is_domain() { 0.5 * (1.0 + phi.at(idx)) } else { 0.0 }) * cell
}

/// Distance (cells) from cell `c` to the nearest interface cell (φ sign change
/// between 4-neighbours).
pub fn distance_to_interface(phi: &Field, tags: &TagMap, c: [usize; 3]) -> Option<f64> {
    let g = phi.grid();
    let mut best: Option<f64> = None;
    for idx in g.interior() {
        if !tags.get(idx).is_domain() {
            continue;
        }
        let p = phi.at(idx);
        let interface = (0..g.dim()).any(|a| {
            let nb = idx + g.stride(a);
            tags.get(nb).is_domain() && (phi.at(nb) > 0.0) != (p > 0.0)
        });
        if interface {
            let q = g.coords(idx).unwrap_or([0; 3]);
            let d = ((q[0] as f64 - c[0] as f64).powi(2)
                + (q[1] as f64 - c[1] as f64).powi(2)
                + (q[2] as f64 - c[2] as f64).powi(2))
            .sqrt();
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

/// Interior values of a field on a 2D grid as rows (for reports).
pub fn grid_values(f: &Field) -> Vec<f64> {
    f.interior_values(0)
}

/// Builds a φ field from a signed distance function (positive inside).
pub fn phi_from_distance<F: Fn(f64, f64, f64) -> f64>(g: Grid, w0_cells: f64, sdf: F) -> Field {
    let mut phi = Field::scalar(g, -1.0);
    for idx in g.interior().collect::<Vec<_>>() {
        let [i, j, k] = g.coords(idx).unwrap_or([0; 3]);
        let d = sdf(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
        phi.set(idx, (d / (2f64.sqrt() * w0_cells)).tanh());
    }
    phi
}

/// Signed distance to a regular hexagon with apothem `a` (positive inside)
/// whose facet normals sit at `orientation + k·60°`.
pub fn hexagon_sdf(x: f64, y: f64, cx: f64, cy: f64, a: f64, orientation: f64) -> f64 {
    let (dx, dy) = (x - cx, y - cy);
    let mut d = f64::MAX;
    for k in 0..6 {
        let ang = orientation + k as f64 * PI / 3.0;
        let proj = dx * ang.cos() + dy * ang.sin();
        d = d.min(a - proj);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use proptest::prelude::*;

    const ISO: [[f64; 2]; 2] = [[1.2e-3, 0.0], [0.0, 1.2e-3]];

    #[test]
    fn gaussian_reference_values() {
        assert!((gaussian_analytic([0.0, 0.0], 0.0, 0.01, ISO) - 1.0).abs() < 1e-14);
        // unit mass: integrate on a fine grid
        let t = 10.0;
        let h = 0.002;
        let mut m = 0.0;
        for i in -500..500 {
            for j in -500..500 {
                m += gaussian_analytic([i as f64 * h, j as f64 * h], t, 0.01, ISO) * h * h;
            }
        }
        assert!((m - 2.0 * PI * 1e-4).abs() / (2.0 * PI * 1e-4) < 1e-6, "{m}");
        // variance σ0² + 2Dt
        let v = 1e-4 + 2.0 * 1.2e-3 * t;
        let ratio = gaussian_analytic([v.sqrt(), 0.0], t, 0.01, ISO) / gaussian_analytic([0.0, 0.0], t, 0.01, ISO);
        assert!((ratio - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn l2_values() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        let b = [2.0, 4.0, 6.0];
        assert!((l2_error(&b, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(l2_error(&a, &[0.0; 3]).is_err());
        assert!(l2_error(&a, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn l2_is_homogeneous(v in proptest::collection::vec(-1.0f64..1.0, 5), s in 0.1f64..10.0) {
            let r = [1.0, -0.5, 0.3, 0.7, 2.0];
            let c1: Vec<f64> = r.iter().zip(&v).map(|(a, b)| a + b).collect();
            let c2: Vec<f64> = r.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            let e1 = l2_error(&c1, &r).unwrap();
            let e2 = l2_error(&c2, &r).unwrap();
            prop_assert!(e1 >= 0.0);
            prop_assert!((e2 - s * e1).abs() <= 1e-12 * (1.0 + e2));
        }

        #[test]
        fn quality_is_scale_invariant(l in proptest::collection::vec(0.1f64..5.0, 6), s in 0.01f64..100.0) {
            let mut sides = [0.0; 6];
            sides.copy_from_slice(&l);
            let a = CrystalShape { sides, centroid: [0.0; 2] };
            let b = CrystalShape { sides: sides.map(|v| v * s), centroid: [0.0; 2] };
            let (qa, qb) = (quality(&a).unwrap(), quality(&b).unwrap());
            prop_assert!(qa >= 1.0);
            prop_assert!((qa - qb).abs() <= 1e-12 * qa);
        }
    }

    #[test]
    fn quality_values() {
        let hex = CrystalShape { sides: [1.0; 6], centroid: [0.0; 2] };
        assert_eq!(quality(&hex).unwrap(), 1.0);
        let s = CrystalShape { sides: [2.0, 1.0, 1.0, 1.0, 1.0, 1.0], centroid: [0.0; 2] };
        assert_eq!(quality(&s).unwrap(), 2.0);
    }

    #[test]
    fn growth_rate_forms() {
        let s0 = CrystalShape { sides: [1.0; 6], centroid: [0.0; 2] };
        assert_eq!(growth_rate(&s0, &s0, 3.0).unwrap().0, 0.0);
        let s1 = CrystalShape { sides: [1.5; 6], centroid: [0.0; 2] };
        let (disp, length) = growth_rate(&s1, &s0, 2.0).unwrap();
        assert!((disp - 0.25).abs() < 1e-15);
        assert!((length - 0.75).abs() < 1e-15);
        assert!(growth_rate(&s1, &s0, 0.0).is_err());
    }

    fn hex_field(n: usize, ci: f64, cj: f64, apothem: f64, orientation: f64) -> (Field, TagMap) {
        let g = Grid::new_2d(n, n).unwrap();
        let tags = TagMap::new(g, [Boundary::Closed; 3]);
        let phi = phi_from_distance(g, 2.5, |x, y, _| hexagon_sdf(x, y, ci, cj, apothem, orientation));
        (phi, tags)
    }

    #[test]
    fn hexagon_sides_match_apothem() {
        let (phi, tags) = hex_field(80, 40.0, 40.0, 15.0, 0.0);
        let s = extract_sides(&phi, &tags, 1.0, 0.0).unwrap();
        for l in s.sides {
            assert!((l - 15.0).abs() < 0.5, "{:?}", s.sides);
        }
        let (phi, tags) = hex_field(80, 40.0, 40.0, 15.0, 0.3);
        let s = extract_sides(&phi, &tags, 1.0, 0.3).unwrap();
        for l in s.sides {
            assert!((l - 15.0).abs() < 0.5, "{:?}", s.sides);
        }
    }

    #[test]
    fn whole_cell_translation_is_exact() {
        let (a, tags) = hex_field(80, 37.3, 38.1, 12.0, 0.1);
        let (b, _) = hex_field(80, 44.3, 35.1, 12.0, 0.1);
        let sa = extract_sides(&a, &tags, 0.1, 0.1).unwrap();
        let sb = extract_sides(&b, &tags, 0.1, 0.1).unwrap();
        for k in 0..6 {
            assert!((sa.sides[k] - sb.sides[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn extraction_errors() {
        let g = Grid::new_2d(20, 20).unwrap();
        let tags = TagMap::new(g, [Boundary::Closed; 3]);
        let liquid = Field::scalar(g, -1.0);
        assert!(extract_sides(&liquid, &tags, 1.0, 0.0).is_err());
        let two = phi_from_distance(g, 1.0, |x, y, _| {
            let d1 = 3.0 - ((x - 5.0).powi(2) + (y - 5.0).powi(2)).sqrt();
            let d2 = 3.0 - ((x - 15.0).powi(2) + (y - 15.0).powi(2)).sqrt();
            d1.max(d2)
        });
        assert!(extract_sides(&two, &tags, 1.0, 0.0).is_err());
    }

    #[test]
    fn heat_generation_vanishes_without_growth() {
        let g = Grid::new_2d(8, 8).unwrap();
        let z = Field::scalar(g, 0.0);
        let phi = Field::scalar(g, -1.0);
        let m = MaterialParams::default();
        let h = heat_generation(&z, &phi, &m, HeatUnit::TemperatureRate);
        assert!(h.data().iter().all(|v| *v == 0.0));
        let mut d = Field::scalar(g, 0.0);
        d.set(g.index(3, 3, 0), 1.0);
        let k = heat_generation(&d, &phi, &m, HeatUnit::TemperatureRate).at(g.index(3, 3, 0));
        let w = heat_generation(&d, &phi, &m, HeatUnit::Volumetric).at(g.index(3, 3, 0));
        assert!((w / k - m.heat_capacity_liquid()).abs() < 1e-12);
        assert!(k > 0.0);
    }

    #[test]
    fn uniform_probe() {
        let g = Grid::new_2d(10, 6).unwrap();
        let tags = TagMap::new(g, [Boundary::Closed; 3]);
        let t = Field::scalar(g, 298.15);
        let p = probes(&t, &tags);
        assert_eq!(p.peak, 298.15);
        assert_eq!(p.centerline.len(), 10);
        assert!(p.centerline.iter().all(|v| *v == 298.15));
    }

    #[test]
    fn order_fit() {
        let h = [0.04, 0.02, 0.01];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        assert!((convergence_order(&h, &e) - 4.0).abs() < 1e-12);
    }
}
