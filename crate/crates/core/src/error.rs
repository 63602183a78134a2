use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("balancing functions are defined on positive arguments, got {0}")]
    NonPositiveRatio(f64),

    #[error("all candidate log weights are -inf; no state can be selected")]
    DegenerateSelection,

    #[error("initial state has zero posterior probability")]
    ZeroProbabilityStart,

    #[error("model does not support neighborhood enumeration, required by {0}")]
    EnumerationUnsupported(&'static str),

    #[error("fewer than 2 distinct values; no two-cluster partition exists")]
    DegeneratePartition,

    #[error("submatrix is numerically rank deficient")]
    RankDeficient,

    #[error("state space too large to enumerate: {size} > {limit}")]
    SpaceTooLarge { size: usize, limit: usize },

    #[error("exact tuple enumeration infeasible (N={num_trials}, max |N(x)|={max_nbrs}); use the Monte Carlo estimator")]
    TupleGuard { num_trials: usize, max_nbrs: usize },

    #[error("transition matrix is reducible")]
    Reducible,

    #[error("target distribution is multimodal; local modes at state indices {0:?}")]
    Multimodal(Vec<usize>),

    #[error("path traverses edge ({0}, {1}) with zero capacity; congestion is infinite")]
    ZeroCapacityEdge(usize, usize),

    #[error("effective sample size undefined for a constant series")]
    ConstantSeries,

    #[error("trace too short: length {len} with burn-in {burn_in}")]
    TraceTooShort { len: usize, burn_in: usize },

    #[error("could not build an initial state at the requested distance {0}")]
    InitialDistanceUnsatisfiable(usize),

    #[error("block label {label} out of range for K={k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed dataset file: {0}")]
    MalformedFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
