use thiserror::Error;

/// Errors raised by the solvers, the scenario driver and the IO layer.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("unsupported lattice: {0}")]
    UnsupportedLattice(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("non-finite value in `{field}` at cell ({i}, {j}, {k})")]
    NonFinite {
        field: &'static str,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("order parameter out of bounds ({value:.4}) at cell ({i}, {j}, {k})")]
    PhaseOutOfBounds {
        value: f64,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("supersaturation undershoot ({value:.4} < -1) at cell ({i}, {j}, {k})")]
    Depletion {
        value: f64,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("unstable time step: {0}")]
    Stability(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: u64) -> Self {
        match self {
            e @ SimError::AtStep { .. } => e,
            other => SimError::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
