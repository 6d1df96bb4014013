use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("the zero element has empty support")]
    EmptySupport,
    #[error("windows must be nonempty")]
    EmptyWindow,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lattice dimension must be at least 1")]
    ZeroDimension,
    #[error("duplicate lattice point {0:?}")]
    DuplicatePoint(Vec<i64>),
    #[error("torus moduli must all be >= 1, found {0}")]
    InvalidModulus(i64),
    #[error("negative coefficient {coef} at {point:?}")]
    NegativeCoefficient { point: Vec<i64>, coef: f64 },
    #[error("coefficient {coef} at {point:?} is not a nonnegative integer")]
    NonIntegerCoefficient { point: Vec<i64>, coef: f64 },
    #[error("support point {0:?} lies outside the alphabet")]
    SupportOutsideAlphabet(Vec<i64>),
    #[error("matrix has more rows ({rows}) than columns ({cols})")]
    TooManyRows { rows: usize, cols: usize },
    #[error("invalid target set: {0}")]
    InvalidTargetSet(String),
    #[error("pattern image does not match the target set")]
    ImageMismatch,
    #[error("expected l1 norm 1, found {0}")]
    NotNormalized(f64),
    #[error("torus injectivity violated: displacements {a:?} and {b:?} coincide modulo {moduli:?}")]
    TorusCollision {
        a: Vec<i64>,
        b: Vec<i64>,
        moduli: Vec<usize>,
    },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity(_))
    }
}
