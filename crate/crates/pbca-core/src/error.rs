//! Crate-wide error type.

/// Result type for all fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the ring, simulator, Markov and flux engines.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("alphabet mismatch: operation requires a {expected} ring")]
    AlphabetMismatch { expected: &'static str },

    #[error("ring too short: need L >= {min}, got {got}")]
    RingTooShort { min: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("probability {name} = {value} must lie strictly inside (0,1)")]
    EndpointParameter { name: &'static str, value: f64 },

    #[error("pattern tally undefined: ring has empty sites but no particle to own them")]
    UndefinedTally,

    #[error("configuration space too large: {size} states exceeds capacity {cap}")]
    Capacity { size: usize, cap: usize },

    #[error("{movers} movable particles exceed the subset-enumeration capacity of 62")]
    TooManyMovers { movers: usize },

    #[error("successor {config} escapes the configuration space (space not closed)")]
    Closure { config: String },

    #[error(
        "chain is not ergodic: {recurrent} recurrent classes among {scc_count} \
         strongly connected components"
    )]
    Ergodicity { recurrent: usize, scc_count: usize },

    #[error(
        "rotation lumping violated in class {class}: row masses to class {target} \
         differ by {deviation:e} across members"
    )]
    Lumpability {
        class: usize,
        target: usize,
        deviation: f64,
    },

    #[error("linear solve failed: singular system")]
    SingularSystem,

    #[error("power iteration did not converge: residual {residual:e}")]
    NoConvergence { residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}
