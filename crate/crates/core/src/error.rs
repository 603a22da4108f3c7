use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("unknown event {0:?}")]
    UnknownEvent(String),
    #[error("{0} events exceed the supported maximum of 64")]
    TooManyEvents(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelayError {
    #[error("event overdue: elapsed {elapsed} is not below the upper bound {upper}")]
    Overdue { elapsed: f64, upper: f64 },
    #[error("residual laws are only defined for variable-delay events")]
    FixedLaw,
    #[error("negative elapsed time {0}")]
    NegativeElapsed(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unspecified successor for state {state} on events {{{events}}}")]
    UnspecifiedSuccessor { state: String, events: String },
    #[error("no event can occur in state {0}")]
    Deadlock(String),
    #[error("event {0} is not scheduled")]
    Unscheduled(String),
    #[error(transparent)]
    Delay(#[from] DelayError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("successor rows missing for reachable occurrences: {}", .0.join("; "))]
    MissingSuccessors(Vec<String>),
    #[error("region graph exceeded {cap} vertices")]
    TooManyRegions { cap: u128 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("grid estimation refused: the model is not single-ticking, an invariant measure may not exist")]
    NotSingleTicking,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("grid exceeded {0} cells")]
    TooManyCells(usize),
    #[error("unknown BSCC {0}")]
    UnknownBscc(usize),
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("bound {0:?} is neither a decimal integer nor \"inf\"")]
    Bound(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid model:\n{0}")]
    Invalid(crate::model::ValidationReport),
}
