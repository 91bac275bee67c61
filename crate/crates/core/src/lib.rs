//! Hybrid lattice-Boltzmann / finite-difference simulator for single-crystal
//! growth from solution: flow, anisotropic phase field, solute and heat
//! transport with latent-heat release.

pub mod campaigns;
pub mod config;
pub mod driver;
pub mod error;
pub mod geometry;
pub mod flow;
pub mod grid;
pub mod lattice;
pub mod material;
pub mod metrics;
pub mod oracle;
pub mod phase;
pub mod scalar;
pub mod snapshot;
pub mod units;

pub use error::{Result, SimError};
