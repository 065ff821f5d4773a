use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("source-destination overlap: node {0} is both a source and a destination")]
    SourceDestinationOverlap(String),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),

    #[error("unknown node {0:?}")]
    UnknownNode(String),

    #[error("destination count {0} outside 1..={max}", max = crate::commodity::MAX_DESTINATIONS)]
    DestinationCount(usize),

    #[error("invalid duplication choice: {0}")]
    InvalidChoice(String),

    #[error("{0}")]
    Clustering(String),

    #[error("malformed slot decision: {0}")]
    Decision(String),

    #[error("policy configuration: {0}")]
    Policy(String),

    #[error("arrival rate sum is zero; delay estimator undefined")]
    ZeroArrivalRate,

    #[error("load is outside the stability region (infeasible flow LP)")]
    Infeasible,

    #[error("linear program: {0}")]
    Lp(String),

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
