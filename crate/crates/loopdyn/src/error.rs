use thiserror::Error;

/// Engine-level failures. Solver errors carry enough context to identify
/// the offending row or body; scene errors name the field or reference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dynamic body '{0}' has non-positive mass")]
    ZeroMassBody(String),

    #[error("non-finite state after integration of body '{0}'")]
    NonFiniteState(String),

    #[error("joint '{joint}' references unknown body '{body}'")]
    UnknownBody { joint: String, body: String },

    #[error("joint '{joint}': motors are not supported on {kind} joints")]
    MotorOnUnsupportedJoint { joint: String, kind: String },

    #[error("solver produced a non-finite multiplier at row {row}")]
    NonFiniteLambda { row: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("scene schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("dangling reference: {0}")]
    DanglingReference(String),

    #[error("chained scene: predecessor '{predecessor}' of '{body}' is not defined earlier in the chain")]
    ChainOrder { predecessor: String, body: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An [`Error`] tagged with the simulation step at which it occurred.
#[derive(Debug, Error)]
#[error("step {step}: {source}")]
pub struct StepError {
    pub step: u64,
    #[source]
    pub source: Error,
}

impl StepError {
    pub fn new(step: u64, source: Error) -> Self {
        Self { step, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
