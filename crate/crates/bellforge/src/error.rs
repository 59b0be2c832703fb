//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. The CLI maps
//! error classes onto process exit codes: malformed or inconsistent input
//! exits 2, resource guards (exhaustive enumeration or symmetry-group size
//! limits) exit 3, and method preconditions (an extension matrix that fails
//! admissibility) exit 4.

use thiserror::Error;

/// Errors produced by `bellforge` operations.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// An inequality violates a structural invariant (coefficient length,
    /// nonpositive bound, all-zero coefficients, ...).
    #[error("invalid inequality: {0}")]
    InvalidInequality(String),

    /// A transformation template violates a structural invariant
    /// (row count, index ranges, signs, pair ordering, ...).
    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    /// Some other input (state vector, symmetry element, rational literal,
    /// CLI argument) is malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects that must agree in shape do not (vertex vs. scenario,
    /// observables vs. scenario, template vs. target party, ...).
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The scenario is too large for exhaustive vertex enumeration.
    #[error(
        "scenario too large: {sum} total settings exceeds the exhaustive \
         enumeration limit of {limit}"
    )]
    ScenarioTooLarge { sum: usize, limit: usize },

    /// The local symmetry group is too large for brute-force
    /// canonicalization.
    #[error(
        "symmetry group too large: {size} elements exceeds the \
         canonicalization limit of {limit}"
    )]
    GroupTooLarge { size: u128, limit: u128 },

    /// Template enumeration was requested beyond the combinatorial guard.
    #[error(
        "template space too large: n={n}, k_new={k_new} exceeds the \
         enumeration guard n,k_new <= {limit}"
    )]
    TemplateSpaceTooLarge { n: usize, k_new: usize, limit: usize },

    /// Too many parties for the dense quantum machinery.
    #[error("too many parties for quantum evaluation: {parties} > {limit}")]
    TooManyParties { parties: usize, limit: usize },

    /// A transformation matrix maps some admissible vector outside the
    /// admissible set: `(U(c) b)` has a component other than +-1. Carries a
    /// concrete witness.
    #[error(
        "matrix violates admissibility: component {row} of U(c)b equals \
         {entry} for c={c:?}, b={b:?}"
    )]
    NotAdmissible {
        c: Vec<i8>,
        b: Vec<i8>,
        row: usize,
        entry: String,
    },

    /// JSON (de)serialization failure; the message carries the position
    /// diagnostic from the parser.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Filesystem failure while reading or writing inputs/outputs.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
