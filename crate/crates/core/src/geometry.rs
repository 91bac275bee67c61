//! Reactor outline, baffles and seed crystals.
//!
//! Positions are in mm with cell `(i, j, k)` centred at `((i+½)δx, (j+½)δx,
//! (k+½)δx)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{Boundary, CellTag, Field, Grid, TagMap};
use crate::metrics::hexagon_sdf;

/// Circular growth cell with an inlet channel on the left and an outlet
/// channel on the right, both at mid-height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactorGeometry {
    /// mm
    pub diameter: f64,
    /// mm
    pub channel_width: f64,
    /// 0 = none, 1..=3 select `baffle_fractions`
    pub baffle: u8,
    /// Baffle x position as a fraction of the distance from the cell mouth
    /// to the seed centre.
    pub baffle_fractions: [f64; 3],
    /// mm, vertical extent of the plate
    pub baffle_height: f64,
    /// mm
    pub baffle_thickness: f64,
}

impl Default for ReactorGeometry {
    fn default() -> Self {
        ReactorGeometry {
            diameter: 40.0,
            channel_width: 4.0,
            baffle: 0,
            baffle_fractions: [0.2, 0.45, 0.7],
            baffle_height: 6.0,
            baffle_thickness: 0.4,
        }
    }
}

impl ReactorGeometry {
    /// Same outline scaled by `s` in every length.
    pub fn scaled(&self, s: f64) -> Self {
        ReactorGeometry {
            diameter: self.diameter * s,
            channel_width: self.channel_width * s,
            baffle_height: self.baffle_height * s,
            baffle_thickness: self.baffle_thickness * s,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter > 0.0 && self.channel_width > 0.0 && self.channel_width < self.diameter) {
            return Err(SimError::Geometry("need 0 < channel_width < diameter".into()));
        }
        if self.baffle > 3 {
            return Err(SimError::Geometry(format!("baffle position {} is not in 0..=3", self.baffle)));
        }
        if self.baffle_fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return Err(SimError::Geometry("baffle fractions must lie in [0, 1)".into()));
        }
        if !(self.baffle_height > 0.0 && self.baffle_thickness > 0.0) {
            return Err(SimError::Geometry("baffle extents must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedShape {
    Hexagon,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seed {
    pub shape: SeedShape,
    /// mm; negative entries mean "domain centre" along that axis
    pub center: [f64; 3],
    /// circumradius for hexagons, radius for spheres; mm. Zero disables the seed.
    pub radius: f64,
    /// rad, angle of the first facet normal
    pub orientation: f64,
}

impl Default for Seed {
    fn default() -> Self {
        Seed {
            shape: SeedShape::Hexagon,
            center: [-1.0; 3],
            radius: 0.75,
            orientation: 0.0,
        }
    }
}

impl Seed {
    /// Centre in mm, resolving defaults against the grid.
    pub fn center_in(&self, grid: Grid, dx: f64) -> [f64; 3] {
        let n = grid.extents();
        let mut c = [0.0; 3];
        for a in 0..3 {
            let mid = if a < grid.dim() { 0.5 * n[a] as f64 * dx } else { 0.5 * dx };
            c[a] = if self.center[a] < 0.0 { mid } else { self.center[a] };
        }
        c
    }

    /// Signed distance (mm, positive inside) at `p`.
    pub fn sdf(&self, p: [f64; 3], c: [f64; 3], dim: usize) -> f64 {
        match self.shape {
            SeedShape::Hexagon => {
                let apothem = self.radius * (PI / 6.0).cos();
                hexagon_sdf(p[0], p[1], c[0], c[1], apothem, self.orientation)
            }
            SeedShape::Sphere => {
                let mut r2 = 0.0;
                for a in 0..dim {
                    r2 += (p[a] - c[a]) * (p[a] - c[a]);
                }
                self.radius - r2.sqrt()
            }
        }
    }
}

/// Baffle rectangle in mm: `[x_min, x_max, y_min, y_max]`.
pub type Rect = [f64; 4];

/// Per-cell tags plus the geometric description they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMask {
    pub tags: TagMap,
    pub reactor: Option<ReactorGeometry>,
    pub baffle: Option<Rect>,
    pub seed: Option<Seed>,
}

#[inline]
fn centre_of(grid: Grid, dx: f64, idx: usize) -> [f64; 3] {
    let [i, j, k] = grid.coords(idx).unwrap_or([0; 3]);
    [(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx, (k as f64 + 0.5) * dx]
}

impl GeometryMask {
    /// Closed box with walls on every face.
    pub fn closed_box(grid: Grid) -> Self {
        GeometryMask {
            tags: TagMap::new(grid, [Boundary::Closed; 3]),
            reactor: None,
            baffle: None,
            seed: None,
        }
    }

    /// Fully periodic box.
    pub fn periodic(grid: Grid) -> Self {
        GeometryMask {
            tags: TagMap::new(grid, [Boundary::Periodic; 3]),
            reactor: None,
            baffle: None,
            seed: None,
        }
    }

    /// Circular cell centred in a 2D grid. The seed (if any) fixes where a
    /// baffle goes.
    pub fn reactor(grid: Grid, dx: f64, geo: &ReactorGeometry, seed: Option<&Seed>) -> Result<Self> {
        geo.validate()?;
        if grid.dim() != 2 {
            return Err(SimError::Geometry("the reactor outline is two-dimensional".into()));
        }
        let [nx, ny, _] = grid.extents();
        let (lx, ly) = (nx as f64 * dx, ny as f64 * dx);
        if geo.diameter > lx + 1e-9 || geo.diameter > ly + 1e-9 {
            return Err(SimError::Geometry(format!(
                "a {} mm cell does not fit a {lx} x {ly} mm grid",
                geo.diameter
            )));
        }
        let (cx, cy) = (0.5 * lx, 0.5 * ly);
        let rc = 0.5 * geo.diameter;
        let half_w = 0.5 * geo.channel_width;
        let baffle = if geo.baffle > 0 {
            let xs = seed.map_or(cx, |s| s.center_in(grid, dx)[0]);
            let mouth = cx - rc;
            let xb = mouth + geo.baffle_fractions[geo.baffle as usize - 1] * (xs - mouth);
            let (ht, hh) = (0.5 * geo.baffle_thickness.max(dx), 0.5 * geo.baffle_height);
            Some([xb - ht, xb + ht, cy - hh, cy + hh])
        } else {
            None
        };
        let mut tags = TagMap::new(grid, [Boundary::Closed; 3]);
        for j in 0..ny {
            for i in 0..nx {
                let x = (i as f64 + 0.5) * dx;
                let y = (j as f64 + 0.5) * dx;
                let in_channel = (y - cy).abs() <= half_w;
                let in_cell = (x - cx).powi(2) + (y - cy).powi(2) <= rc * rc;
                let in_baffle = baffle.is_some_and(|b| x >= b[0] && x <= b[1] && y >= b[2] && y <= b[3]);
                let tag = if in_baffle || !(in_cell || in_channel) {
                    CellTag::Wall
                } else if i == 0 && in_channel {
                    CellTag::Inlet
                } else if i == nx - 1 && in_channel {
                    CellTag::Outlet
                } else {
                    CellTag::Fluid
                };
                tags.set(i, j, 0, tag);
            }
        }
        tags.refresh_halo();
        if tags.count(CellTag::Inlet) == 0 || tags.count(CellTag::Outlet) == 0 {
            return Err(SimError::Geometry("channel width below one cell".into()));
        }
        Ok(GeometryMask {
            tags,
            reactor: Some(*geo),
            baffle,
            seed: None,
        })
    }

    /// φ for `seed` with a tanh profile of width `w0` (mm); errors when the
    /// seed covers inlet, outlet or wall cells.
    pub fn place_seed(&mut self, seed: &Seed, dx: f64, w0: f64) -> Result<Field> {
        let grid = self.tags.grid();
        let mut phi = Field::scalar(grid, -1.0);
        if seed.radius <= 0.0 {
            self.seed = None;
            return Ok(phi);
        }
        if seed.shape == SeedShape::Hexagon && grid.dim() != 2 {
            return Err(SimError::Geometry("hexagonal seeds need a 2D grid".into()));
        }
        let c = seed.center_in(grid, dx);
        for idx in grid.interior().collect::<Vec<_>>() {
            let d = seed.sdf(centre_of(grid, dx, idx), c, grid.dim());
            let tag = self.tags.get(idx);
            if d > 0.0 && tag != CellTag::Fluid {
                let [i, j, k] = grid.coords(idx).unwrap_or([0; 3]);
                return Err(SimError::Geometry(format!(
                    "seed overlaps a {tag:?} cell at ({i}, {j}, {k})"
                )));
            }
            if tag.is_domain() {
                phi.set(idx, (d / (2f64.sqrt() * w0)).tanh());
            }
        }
        self.seed = Some(*seed);
        Ok(phi)
    }
}
