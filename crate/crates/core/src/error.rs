use crate::persuasion::lp::Pivot;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Farkas multipliers, one per constraint in the order they were added.
    #[error("linear program is infeasible")]
    Infeasible { certificate: Vec<f64> },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex made no progress after {iterations} pivots")]
    Stalled { iterations: usize, trace: Vec<Pivot> },
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error("could not parse decision: {0}")]
    Parse(String),
    #[error("expected {expected} decision entries, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("decision entry {index} is {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol violation: {reason}")]
    Protocol { agent: Option<usize>, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("statistics error: {0}")]
    Stats(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
