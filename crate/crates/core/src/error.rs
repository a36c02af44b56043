use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid occupancy vector: {0}")]
    InvalidOccupancy(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid GUMDP: {0}")]
    InvalidGumdp(String),

    #[error("occupancy state already at horizon (t = {t}, H = {horizon})")]
    AtHorizon { t: usize, horizon: usize },

    #[error("terminal cost requested at t = {t}, but the horizon is {horizon}")]
    NotTerminal { t: usize, horizon: usize },

    #[error("enumeration budget of {limit} trajectories exceeded")]
    BudgetExceeded { limit: u64 },

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error("policy `{0}` cannot be evaluated by enumeration")]
    NotEnumerable(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input")]
    EmptyInput,

    #[error("results do not contain sweep key `{0}`")]
    MissingSweepKey(&'static str),

    #[error("linear solve failed: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
