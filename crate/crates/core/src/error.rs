use thiserror::Error;

/// Errors surfaced by construction and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("facet set does not span the ambient space (rank {rank} < dim {dim})")]
    NonSpanningFacets { rank: usize, dim: usize },

    #[error("{0}")]
    InvalidNorm(String),

    #[error("operation undefined at the origin")]
    ZeroVector,

    #[error("cone membership undefined: point equals the apex")]
    PointAtApex,

    #[error("gradient undefined at pin {pin}: {reason}")]
    GradientUndefined { pin: usize, reason: String },

    #[error("invalid block schedule: {0}")]
    InvalidSchedule(String),

    #[error("level {level} outside [1, {depth}]")]
    LevelOutOfRange { level: u64, depth: u64 },

    #[error("enumeration would produce {points} points, above the cap {cap}; lower the depth or sample instead")]
    EnumerationCap { points: String, cap: u64 },

    #[error("{pairs} pairs exceed the cap {cap}; request sampling")]
    PairCap { pairs: String, cap: u64 },

    #[error("facet denominator {denom} is not a divisor of any {q}^t, t <= {max_t}")]
    DenominatorMismatch { denom: String, q: u32, max_t: u32 },

    #[error("value {value} does not have a base-{q} power denominator at depth {depth}")]
    NonQPowerValue { value: String, q: u32, depth: u64 },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("invalid coordinate indices: {0}")]
    BadIndices(String),

    #[error("profile has fewer than 2 usable entries in the window")]
    InsufficientProfile,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
