//! Structured-grid containers.
//!
//! Every field lives on a padded box: `halo` ghost layers surround the
//! interior along each active axis (the z axis is inactive in 2D). Cells are
//! addressed by a flat row-major index into the padded storage, so stencil
//! neighbours are plain offsets (`idx ± stride[axis]`).
//!
//! Sweeps follow a two-buffer discipline: they read `current` and write
//! `next`; [`DoubleBuffer::swap`] publishes the result.

use rayon::prelude::*;

use crate::error::{Result, SimError};

/// Ghost layers around the interior. Two are needed by the fourth-order
/// diffusion stencil and the WENO3 reconstruction.
pub const HALO: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    padded: [usize; 3],
    stride: [usize; 3],
    len: usize,
}

impl Grid {
    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        Self::build(2, [nx, ny, 1])
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        Self::build(3, [nx, ny, nz])
    }

    pub fn new(dim: usize, n: [usize; 3]) -> Result<Self> {
        match dim {
            2 => Self::new_2d(n[0], n[1]),
            3 => Self::new_3d(n[0], n[1], n[2]),
            _ => Err(SimError::invalid("dimension", format!("{dim} is not 2 or 3"))),
        }
    }

    fn build(dim: usize, n: [usize; 3]) -> Result<Self> {
        for (axis, &len) in n.iter().enumerate().take(dim) {
            if len < 3 {
                return Err(SimError::invalid(
                    "extents",
                    format!("axis {axis} has {len} cells, need at least 3"),
                ));
            }
        }
        let mut padded = [1; 3];
        for a in 0..dim {
            padded[a] = n[a] + 2 * HALO;
        }
        let stride = [1, padded[0], padded[0] * padded[1]];
        Ok(Grid {
            dim,
            n,
            padded,
            stride,
            len: padded[0] * padded[1] * padded[2],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior extents; `nz == 1` in 2D.
    pub fn extents(&self) -> [usize; 3] {
        self.n
    }

    pub fn padded(&self) -> [usize; 3] {
        self.padded
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.stride[axis]
    }

    /// Length of the padded storage (cells, not components).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn interior_len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    fn halo(&self, axis: usize) -> usize {
        if axis < self.dim {
            HALO
        } else {
            0
        }
    }

    /// Flat index of interior cell `(i, j, k)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i + HALO) + (j + HALO) * self.stride[1] + (k + self.halo(2)) * self.stride[2]
    }

    /// Flat index of a padded coordinate; negative and overflowing interior
    /// coordinates address the halo.
    #[inline]
    pub fn index_signed(&self, i: isize, j: isize, k: isize) -> usize {
        let h = HALO as isize;
        let hz = self.halo(2) as isize;
        ((i + h) + (j + h) * self.stride[1] as isize + (k + hz) * self.stride[2] as isize) as usize
    }

    /// Padded coordinates of a flat index.
    #[inline]
    pub fn padded_coords(&self, idx: usize) -> [usize; 3] {
        let k = idx / self.stride[2];
        let rem = idx % self.stride[2];
        [rem % self.stride[1], rem / self.stride[1], k]
    }

    /// Interior coordinates of a flat index, or `None` for halo cells.
    pub fn coords(&self, idx: usize) -> Option<[usize; 3]> {
        let p = self.padded_coords(idx);
        let mut out = [0; 3];
        for a in 0..3 {
            let h = self.halo(a);
            if p[a] < h || p[a] >= h + self.n[a] {
                return None;
            }
            out[a] = p[a] - h;
        }
        Some(out)
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.coords(idx).is_some()
    }

    /// Signed flat offset of a lattice displacement.
    #[inline]
    pub fn offset(&self, d: [i32; 3]) -> isize {
        d[0] as isize + d[1] as isize * self.stride[1] as isize + d[2] as isize * self.stride[2] as isize
    }

    /// Number of padded rows (along x).
    fn rows(&self) -> usize {
        self.padded[1] * self.padded[2]
    }

    /// Whether padded row `r` crosses the interior.
    #[inline]
    fn row_is_interior(&self, r: usize) -> bool {
        let jp = r % self.padded[1];
        let kp = r / self.padded[1];
        let hz = self.halo(2);
        jp >= HALO && jp < HALO + self.n[1] && kp >= hz && kp < hz + self.n[2]
    }

    /// Interior cell indices in row-major order.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows())
            .filter(move |&r| self.row_is_interior(r))
            .flat_map(move |r| {
                let start = r * self.padded[0] + HALO;
                start..start + self.n[0]
            })
    }

    /// Runs `f(idx, out_cell)` for every interior cell, where `out_cell` is the
    /// `comps`-wide slot of `out` belonging to that cell. Rows are processed in
    /// parallel; each cell is written exactly once so the result does not depend
    /// on the worker count.
    pub fn par_map_interior<F>(&self, out: &mut [f64], comps: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        debug_assert_eq!(out.len(), self.len * comps);
        let row_len = self.padded[0];
        out.par_chunks_mut(row_len * comps)
            .enumerate()
            .for_each(|(r, row)| {
                if !self.row_is_interior(r) {
                    return;
                }
                let base = r * row_len;
                for i in HALO..HALO + self.n[0] {
                    f(base + i, &mut row[i * comps..(i + 1) * comps]);
                }
            });
    }

    /// Deterministic sum of `f(idx)` over the interior: per-row partial sums
    /// combined by pairwise reduction in a fixed order.
    pub fn sum<F>(&self, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let row_len = self.padded[0];
        let partials: Vec<f64> = (0..self.rows())
            .into_par_iter()
            .map(|r| {
                if !self.row_is_interior(r) {
                    return 0.0;
                }
                let base = r * row_len;
                let mut acc = 0.0;
                for i in HALO..HALO + self.n[0] {
                    acc += f(base + i);
                }
                acc
            })
            .collect();
        pairwise_sum(&partials)
    }
}

/// Pairwise summation with a fixed split; the result is a function of the
/// input order only.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Treatment of the box faces along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Closed,
}

/// Per-cell classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellTag {
    Fluid = 0,
    Wall = 1,
    Inlet = 2,
    Outlet = 3,
    /// Ghost cell beyond an outlet: zero-gradient continuation.
    Open = 4,
}

impl CellTag {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => CellTag::Fluid,
            1 => CellTag::Wall,
            2 => CellTag::Inlet,
            3 => CellTag::Outlet,
            4 => CellTag::Open,
            _ => return None,
        })
    }

    /// Cells whose state is advanced by the solvers.
    #[inline]
    pub fn is_active(self) -> bool {
        matches!(self, CellTag::Fluid | CellTag::Outlet)
    }

    /// Cells that carry flow and scalars (as opposed to walls and ghosts).
    #[inline]
    pub fn is_domain(self) -> bool {
        matches!(self, CellTag::Fluid | CellTag::Outlet | CellTag::Inlet)
    }
}

/// Tag map over the padded grid, including halo classification.
#[derive(Debug, Clone, PartialEq)]
pub struct TagMap {
    grid: Grid,
    boundaries: [Boundary; 3],
    tags: Vec<CellTag>,
}

impl TagMap {
    /// All interior cells fluid; halo tags follow `boundaries`.
    pub fn new(grid: Grid, boundaries: [Boundary; 3]) -> Self {
        let mut map = TagMap {
            grid,
            boundaries,
            tags: vec![CellTag::Fluid; grid.len()],
        };
        map.refresh_halo();
        map
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn boundaries(&self) -> [Boundary; 3] {
        self.boundaries
    }

    #[inline]
    pub fn get(&self, idx: usize) -> CellTag {
        self.tags[idx]
    }

    pub fn as_slice(&self) -> &[CellTag] {
        &self.tags
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, tag: CellTag) {
        let idx = self.grid.index(i, j, k);
        self.tags[idx] = tag;
    }

    pub fn count(&self, tag: CellTag) -> usize {
        self.grid.interior().filter(|&c| self.tags[c] == tag).count()
    }

    /// Recomputes halo tags: periodic axes copy the opposite interior layer,
    /// closed axes are walls except next to outlet cells, which open up.
    pub fn refresh_halo(&mut self) {
        let g = self.grid;
        for axis in 0..g.dim() {
            let n = g.extents()[axis];
            let s = g.stride(axis) as isize;
            for idx in 0..g.len() {
                let p = g.padded_coords(idx);
                // only process cells that are in the halo along this axis and
                // inside (or in already-processed halos of) the others
                let pa = p[axis];
                let in_low = pa < HALO;
                let in_high = pa >= HALO + n;
                if !in_low && !in_high {
                    continue;
                }
                let tag = match self.boundaries[axis] {
                    Boundary::Periodic => {
                        let shift = if in_low { n as isize } else { -(n as isize) };
                        self.tags[(idx as isize + shift * s) as usize]
                    }
                    Boundary::Closed => {
                        let edge = if in_low { HALO } else { HALO + n - 1 };
                        let edge_idx = (idx as isize + (edge as isize - pa as isize) * s) as usize;
                        match self.tags[edge_idx] {
                            CellTag::Outlet | CellTag::Open => CellTag::Open,
                            _ => CellTag::Wall,
                        }
                    }
                };
                self.tags[idx] = tag;
            }
        }
    }
}

/// Dense multi-component field over the padded grid, stored cell-major
/// (all components of one cell are contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    comps: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, comps: usize, value: f64) -> Self {
        Field {
            grid,
            comps,
            data: vec![value; grid.len() * comps],
        }
    }

    pub fn scalar(grid: Grid, value: f64) -> Self {
        Self::new(grid, 1, value)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.data[idx * self.comps]
    }

    #[inline]
    pub fn comp(&self, idx: usize, c: usize) -> f64 {
        self.data[idx * self.comps + c]
    }

    #[inline]
    pub fn cell(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.comps..(idx + 1) * self.comps]
    }

    #[inline]
    pub fn cell_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.data[idx * self.comps..(idx + 1) * self.comps]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, value: f64) {
        self.data[idx * self.comps] = value;
    }

    /// Sum of component `c` over the interior (deterministic order).
    pub fn interior_sum(&self, c: usize) -> f64 {
        let comps = self.comps;
        let data = &self.data;
        self.grid.sum(|idx| data[idx * comps + c])
    }

    /// Interior values of component `c` in row-major order.
    pub fn interior_values(&self, c: usize) -> Vec<f64> {
        self.grid.interior().map(|idx| self.comp(idx, c)).collect()
    }

    /// Copies periodic images into the halo along every periodic axis.
    pub fn fill_periodic_halo(&mut self, boundaries: [Boundary; 3]) {
        let g = self.grid;
        let comps = self.comps;
        for axis in 0..g.dim() {
            if boundaries[axis] != Boundary::Periodic {
                continue;
            }
            let n = g.extents()[axis] as isize;
            let s = g.stride(axis) as isize;
            for idx in 0..g.len() {
                let pa = g.padded_coords(idx)[axis];
                let shift = if pa < HALO {
                    n
                } else if pa >= HALO + n as usize {
                    -n
                } else {
                    continue;
                };
                let src = (idx as isize + shift * s) as usize;
                for c in 0..comps {
                    self.data[idx * comps + c] = self.data[src * comps + c];
                }
            }
        }
    }

    /// First non-finite interior value, if any.
    pub fn find_non_finite(&self) -> Option<(usize, [usize; 3])> {
        self.grid.interior().find_map(|idx| {
            self.cell(idx)
                .iter()
                .any(|v| !v.is_finite())
                .then(|| (idx, self.grid.coords(idx).unwrap_or([0; 3])))
        })
    }

    pub fn check_finite(&self, name: &'static str) -> Result<()> {
        match self.find_non_finite() {
            Some((_, [i, j, k])) => Err(SimError::NonFinite { field: name, i, j, k }),
            None => Ok(()),
        }
    }
}

/// Current/next pair for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleBuffer {
    pub current: Field,
    pub next: Field,
}

impl DoubleBuffer {
    pub fn new(field: Field) -> Self {
        DoubleBuffer {
            next: field.clone(),
            current: field,
        }
    }

    pub fn swap(&mut self) {
        std::mem::swap(&mut self.current, &mut self.next);
    }

    /// Runs a sweep `f(current, next)` and swaps.
    pub fn sweep<F: FnOnce(&Field, &mut Field)>(&mut self, f: F) {
        f(&self.current, &mut self.next);
        self.swap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checksum(f: &Field) -> u64 {
        f.data()
            .iter()
            .fold(0u64, |acc, v| acc.rotate_left(7) ^ v.to_bits())
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new_3d(5, 4, 3).unwrap();
        for k in 0..3 {
            for j in 0..4 {
                for i in 0..5 {
                    assert_eq!(g.coords(g.index(i, j, k)), Some([i, j, k]));
                }
            }
        }
        assert_eq!(g.interior().count(), 60);
        let g2 = Grid::new_2d(6, 7).unwrap();
        assert_eq!(g2.interior().count(), 42);
        assert_eq!(g2.coords(g2.index(5, 6, 0)), Some([5, 6, 0]));
        assert!(!g2.is_interior(0));
    }

    #[test]
    fn rejects_degenerate_extents() {
        assert!(Grid::new_2d(2, 10).is_err());
        assert!(Grid::new(4, [5, 5, 5]).is_err());
    }

    #[test]
    fn sweep_leaves_current_untouched() {
        let g = Grid::new_2d(16, 12).unwrap();
        let mut f = Field::scalar(g, 0.0);
        for (n, idx) in g.interior().collect::<Vec<_>>().into_iter().enumerate() {
            f.set(idx, (n as f64).sin());
        }
        let mut buf = DoubleBuffer::new(f);
        let before = checksum(&buf.current);
        let cur = buf.current.clone();
        g.par_map_interior(buf.next.data_mut(), 1, |idx, out| {
            out[0] = 2.0 * cur.at(idx);
        });
        assert_eq!(checksum(&buf.current), before);
        buf.swap();
        let idx = g.index(3, 4, 0);
        assert_eq!(buf.current.at(idx), 2.0 * cur.at(idx));
    }

    #[test]
    fn periodic_halo_wraps() {
        let g = Grid::new_2d(4, 3).unwrap();
        let mut f = Field::scalar(g, 0.0);
        for idx in g.interior().collect::<Vec<_>>() {
            let [i, j, _] = g.coords(idx).unwrap();
            f.set(idx, (10 * j + i) as f64);
        }
        f.fill_periodic_halo([Boundary::Periodic; 3]);
        assert_eq!(f.at(g.index_signed(-1, 0, 0)), 3.0);
        assert_eq!(f.at(g.index_signed(-2, 1, 0)), 12.0);
        assert_eq!(f.at(g.index_signed(4, 2, 0)), 20.0);
        assert_eq!(f.at(g.index_signed(0, -1, 0)), 20.0);
        assert_eq!(f.at(g.index_signed(-1, -1, 0)), 23.0);
    }

    #[test]
    fn closed_halo_opens_next_to_outlet() {
        let g = Grid::new_2d(5, 5).unwrap();
        let mut tags = TagMap::new(g, [Boundary::Closed; 3]);
        tags.set(4, 2, 0, CellTag::Outlet);
        tags.refresh_halo();
        assert_eq!(tags.get(g.index_signed(5, 2, 0)), CellTag::Open);
        assert_eq!(tags.get(g.index_signed(6, 2, 0)), CellTag::Open);
        assert_eq!(tags.get(g.index_signed(5, 1, 0)), CellTag::Wall);
        assert_eq!(tags.get(g.index_signed(-1, 2, 0)), CellTag::Wall);
    }

    #[test]
    fn sum_is_order_fixed() {
        let g = Grid::new_2d(33, 17).unwrap();
        let mut f = Field::scalar(g, 0.0);
        for (n, idx) in g.interior().collect::<Vec<_>>().into_iter().enumerate() {
            f.set(idx, 1.0 / (1.0 + n as f64));
        }
        let a = f.interior_sum(0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| f.interior_sum(0));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
