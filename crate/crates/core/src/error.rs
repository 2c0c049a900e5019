use thiserror::Error;

/// Errors produced by the optimisation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error("invalid bounds for variable `{name}`: {reason}")]
    InvalidBounds { name: String, reason: String },
    #[error("unknown variable kind `{0}`")]
    UnknownKind(String),
    #[error("top fidelity lies outside the fidelity space")]
    ZHfOutOfSpace,
    #[error("expression error: {0}")]
    Expression(String),
    #[error("arity mismatch: expected {expected} coordinates, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("coordinate {index} has the wrong kind")]
    KindMismatch { index: usize },
    #[error("rejection sampling gave up after {attempts} consecutive rejections")]
    InfeasibleSampling { attempts: usize },
    #[error("gram matrix is singular even after jitter escalation")]
    SingularGram,
    #[error("posterior covariance is singular even after jitter escalation")]
    SingularCovariance,
    #[error("kernel is not additive")]
    NotAdditive,
    #[error("group index {0} out of range")]
    BadGroupIndex(usize),
    #[error("no observations")]
    EmptyData,
    #[error("ordering is not a permutation of 1..=d")]
    NotAPermutation,
    #[error("unknown acquisition `{0}`")]
    UnknownAcquisition(String),
    #[error("acquisition `{0}` is not enabled")]
    UnknownLabel(String),
    #[error("acquisition `{0}` needs an optimisation context")]
    NeedsContext(String),
    #[error("fidelity point lies outside the fidelity space")]
    OutOfSpace,
    #[error("fidelity grid does not contain the top fidelity")]
    GridMissingZhf,
    #[error("candidate set is empty")]
    EmptySet,
    #[error("model kernel is not a fidelity-domain product")]
    NotProductKernel,
    #[error("result for a query that is not pending")]
    UnknownQuery,
    #[error("worker failure: {0}")]
    WorkerFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
