//! Discrete velocity sets.

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Flow,
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub name: &'static str,
    pub dim: usize,
    pub velocities: Vec<[i32; 3]>,
    pub weights: Vec<f64>,
    pub cs2: f64,
    /// Index of the opposite velocity.
    pub opposite: Vec<usize>,
}

impl LatticeSpec {
    pub fn q(&self) -> usize {
        self.velocities.len()
    }

    pub fn d2q9() -> Self {
        let velocities = vec![
            [0, 0, 0],
            [1, 0, 0],
            [0, 1, 0],
            [-1, 0, 0],
            [0, -1, 0],
            [1, 1, 0],
            [-1, 1, 0],
            [-1, -1, 0],
            [1, -1, 0],
        ];
        let mut weights = vec![4.0 / 9.0];
        weights.extend([1.0 / 9.0; 4]);
        weights.extend([1.0 / 36.0; 4]);
        Self::finish("D2Q9", 2, velocities, weights, 1.0 / 3.0)
    }

    pub fn d3q7() -> Self {
        let velocities = vec![
            [0, 0, 0],
            [1, 0, 0],
            [-1, 0, 0],
            [0, 1, 0],
            [0, -1, 0],
            [0, 0, 1],
            [0, 0, -1],
        ];
        let mut weights = vec![0.25];
        weights.extend([0.125; 6]);
        Self::finish("D3Q7", 3, velocities, weights, 0.25)
    }

    fn finish(
        name: &'static str,
        dim: usize,
        velocities: Vec<[i32; 3]>,
        weights: Vec<f64>,
        cs2: f64,
    ) -> Self {
        let opposite = velocities
            .iter()
            .map(|c| {
                velocities
                    .iter()
                    .position(|d| d[0] == -c[0] && d[1] == -c[1] && d[2] == -c[2])
                    .expect("velocity set is symmetric")
            })
            .collect();
        LatticeSpec {
            name,
            dim,
            velocities,
            weights,
            cs2,
            opposite,
        }
    }

    /// `c_α · v` for a real vector.
    #[inline]
    pub fn dot(&self, a: usize, v: &[f64]) -> f64 {
        let c = self.velocities[a];
        let mut s = 0.0;
        for (d, vd) in v.iter().enumerate().take(self.dim) {
            s += c[d] as f64 * vd;
        }
        s
    }
}

pub fn make_lattice(dim: usize, family: Family) -> Result<LatticeSpec> {
    match (dim, family) {
        (2, _) => Ok(LatticeSpec::d2q9()),
        (3, Family::Phase) => Ok(LatticeSpec::d3q7()),
        (3, Family::Flow) => Err(SimError::UnsupportedLattice("3D flow unsupported".into())),
        (d, _) => Err(SimError::UnsupportedLattice(format!("dimension {d}"))),
    }
}
