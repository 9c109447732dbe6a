use thiserror::Error;

/// Errors produced by the modeling, training and evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input to {0}")]
    Domain(&'static str),

    #[error("no contraction-velocity root in [{lo:.3e}, {hi:.3e}] m/s (residuals {r_lo:.3e}, {r_hi:.3e} N)")]
    NoRoot {
        lo: f64,
        hi: f64,
        r_lo: f64,
        r_hi: f64,
    },

    #[error("joint position {q:.4} rad outside [{min:.4}, {max:.4}]")]
    OutOfRange { q: f64, min: f64, max: f64 },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("parameter {name} = {value} outside [{lower}, {upper}]")]
    Bounds {
        name: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("no passive equilibrium: {0}")]
    Initialization(String),

    #[error("plant fault at t = {t:.3} s: {reason}")]
    PlantFault { t: f64, reason: String },

    #[error("calibration failed: channel {0} is all zero")]
    Calibration(usize),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("training diverged after epoch {last_finite_epoch}")]
    Divergence { last_finite_epoch: usize },

    #[error("input underrun at t = {t:.3} s")]
    Underrun { t: f64 },

    #[error("telemetry integrity: {0}")]
    Integrity(String),

    #[error("tick {tick}: {source}")]
    AtTick {
        tick: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_tick(self, tick: u64) -> Self {
        Error::AtTick {
            tick,
            source: Box::new(self),
        }
    }
}
