//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration problems, reported exhaustively before any compute.
    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// A diagnostic asked for the null frame inside the axis exclusion
    /// radius, where the decomposition is singular.
    #[error("axis exclusion violated at (t={t}, x1={x1}, x2={x2}): r={r} <= r_min={r_min}")]
    AxisExclusion { t: f64, x1: f64, x2: f64, r: f64, r_min: f64 },

    #[error("blow-up detected at t={t}: {what} at cell ({i}, {j})")]
    BlowUp { t: f64, what: String, i: usize, j: usize },

    #[error("wave reached the grid boundary at t={t} (max deviation {dev:.3e}); enlarge the box")]
    BoundaryTouch { t: f64, dev: f64 },

    #[error(
        "constraint repair {repair:.3e} exceeded {limit:.3e} in one step at t={t}; \
         the projection is no longer a small correction"
    )]
    ConstraintRepair { t: f64, repair: f64, limit: f64 },

    #[error("cone node outside the stored history: {0}")]
    ConeOutOfDomain(String),

    #[error("stored history too sparse for {need}: slice spacing {have:.3e} exceeds {limit:.3e}")]
    ResolutionInsufficient { need: String, have: f64, limit: f64 },

    #[error("unknown identity id: {0}")]
    UnknownIdentity(String),

    #[error("scaling fit needs at least {need} usable points, got {got}")]
    FitUnderdetermined { need: usize, got: usize },

    #[error("sobolev precondition violated: {0}")]
    SobolevPrecondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
