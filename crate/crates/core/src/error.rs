use thiserror::Error;

/// Errors shared across the toolkit. Domain violations carry enough context
/// to produce the machine-readable error records the CLI emits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected} variables, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("ring context mismatch: {0}")]
    ContextMismatch(String),

    #[error("zero input rejected: {0}")]
    ZeroInput(&'static str),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("the infinite place is rejected here: {0}")]
    InfinitePlace(&'static str),

    #[error("ideal generator has nonzero constant term; the base point 0 must lie on the variety")]
    BasePointMissing,

    #[error("constant term is not a certified unit (normal form is not a nonzero rational)")]
    NonUnit,

    #[error("composition rejected: condition ({0}) fails, {1}")]
    CompositionGate(&'static str, String),

    #[error("singular minor: {0}")]
    SingularMinor(String),

    #[error("inconsistent constant terms: C_{index}(0) != B_{index}(e)")]
    InconsistentConstants { index: usize },

    #[error("linear system unsolvable over the quotient ring: {0}")]
    Unsolvable(String),

    #[error("matrix is not nilpotent")]
    NotNilpotent,

    #[error("nilpotency order {order} too large for weight window [0, {max}]")]
    OrderTooLarge { order: usize, max: usize },

    #[error("vector is not in the kernel of the residue")]
    NotInKernel,

    #[error("connection has a pole of order > 1 at s = 0 (entry {row},{col})")]
    HigherOrderPole { row: usize, col: usize },

    #[error("denominator of entry ({row},{col}) is not invertible as a power series at 0")]
    DenominatorNotInvertible { row: usize, col: usize },

    #[error("point does not lie on the variety (generator {index} evaluates to a nonzero value)")]
    PointNotOnVariety { index: usize },

    #[error("lifting data does not express the identities on M: {0}")]
    LiftingInvalid(String),

    #[error("place {0} is not relevant here")]
    IrrelevantPlace(String),

    #[error("polynomial is not homogeneous")]
    NotHomogeneous,

    #[error("not adelic at order {order}: {reason}")]
    NotAdelic { order: usize, reason: String },

    #[error("search budget exceeded: {0}")]
    Budget(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
