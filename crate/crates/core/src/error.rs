//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure condition the library reports.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An eigenvalue modulus fell inside the tolerance band around 1, so the
    /// expansiveness verdict cannot be trusted either way.
    #[error("expansiveness indeterminate: eigenvalue modulus {modulus} within {margin:e} of 1")]
    Indeterminate { modulus: f64, margin: f64 },

    /// Two digits share a residue class, so the digit set is not simple.
    #[error("not a simple digit set: digits {first:?} and {second:?} share a residue class")]
    NotSimpleDigitSet { first: Vec<i64>, second: Vec<i64> },

    /// An enumeration would exceed the configured element budget.
    #[error("budget exceeded: {needed} elements requested, cap is {cap}")]
    BudgetExceeded { needed: u128, cap: u128 },

    /// Two frequency-set elements collided, violating the residue-distinctness
    /// requirement of the staged construction.
    #[error("collision detected: stage elements {first:?} and {second:?} coincide after assembly")]
    CollisionDetected { first: Vec<i64>, second: Vec<i64> },

    /// The operation only handles a restricted input shape.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A stage level is too small for the requested contraction target.
    #[error("stage {stage} too shallow: level {level} leaves tail norm {tail:e} >= {required:e}")]
    StageTooShallow { stage: usize, level: u32, tail: f64, required: f64 },

    /// A pair of frequencies is not mutually orthogonal for the measure.
    #[error("not orthogonal: |transform({first:?} - {second:?})| = {value:e} exceeds {tol:e}")]
    NotOrthogonal { first: Vec<i64>, second: Vec<i64>, value: f64, tol: f64 },

    /// A sample point admits no integer translate with transform modulus above
    /// the threshold; all translates in the search window vanish or nearly so.
    #[error("obstruction found at {point}: best translate modulus {best:e} below threshold {threshold:e}")]
    ObstructionFound { point: String, best: f64, threshold: f64 },

    /// The dilation matrix has an eigenvalue of modulus <= 1.
    #[error("matrix is not expansive")]
    NonExpansive,

    /// The operation is defined only in one dimension.
    #[error("operation requires dimension 1, got {0}")]
    DimensionNot1(usize),

    /// Digit and frequency sets must have equal cardinality.
    #[error("size mismatch: digit set has {b} elements, frequency set has {l}")]
    SizeMismatch { b: usize, l: usize },

    /// The matrix is not a valid real Hadamard matrix.
    #[error("not a real Hadamard matrix: {0}")]
    NotRealHadamard(String),

    /// The requested refinement level exceeds the depth the frequency set was
    /// built for.
    #[error("level {level} too deep: frequency set only covers depth {available}")]
    LevelTooDeep { level: u32, available: u32 },
}
