use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("no prime in [{lo}, {hi}]")]
    NoPrimeInRange { lo: u64, hi: u64 },
    #[error("invalid argument `{argument}`: {message}")]
    InvalidArgument { argument: String, message: String },
    #[error("frequency set contains no non-zero residue")]
    DegenerateFrequencySet,
    #[error("enumeration of {size} items exceeds cap {cap}")]
    EnumerationCapExceeded { size: u64, cap: u64 },
    #[error("exact summation over {terms} terms exceeds cap {cap}")]
    SupportTooLarge { terms: u64, cap: u64 },
    #[error("objects live in different groups (p = {left} vs p = {right})")]
    GroupMismatch { left: u64, right: u64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("measured U2 energy {measured} is below eta = {eta}")]
    InsufficientU2 { measured: f64, eta: f64 },
    #[error("measured U3 energy {measured} is below eta = {eta}")]
    InsufficientU3 { measured: f64, eta: f64 },
    #[error("radius separation violated: {0}")]
    RadiusSeparationViolated(String),
    #[error("almost-linearity fails at h = {h}, k = {k}: {lhs} > {rhs}")]
    AlmostLinearityViolated { h: u64, k: u64, lhs: f64, rhs: f64 },
    #[error("exponential sum {measured} is below delta = {delta}")]
    ExponentialSumTooSmall { measured: f64, delta: f64 },
    #[error("no multiple k <= {kmax} meets the threshold")]
    NoSmallMultiple { kmax: u64 },
    #[error("dual frequency is zero")]
    ZeroFrequency,
    #[error("dual frequency is a proper multiple (gcd {gcd})")]
    ReducibleFrequency { gcd: i64 },
    #[error("generator matrix is rank deficient")]
    RankDeficient,
    #[error("dimension {d} exceeds cap {cap}")]
    DimensionCapExceeded { d: usize, cap: usize },
    #[error("no admissible base point for the second difference")]
    NoAdmissibleBasePoint,
    #[error("precondition not met: {0}")]
    PreconditionNotMet(String),
    #[error("no quadratic correlation found: best {best}, achieved decrement {achieved}")]
    NoCorrelationFound { best: f64, achieved: f64 },
    #[error("dimension-decrement step demanded but not implemented")]
    UnimplementedStep,
    #[error("step budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(argument: &str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            argument: argument.to_string(),
            message: message.into(),
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotPrime(_) => "NotPrime",
            Error::NoPrimeInRange { .. } => "NoPrimeInRange",
            Error::InvalidArgument { .. } => "InvalidArgument",
            Error::DegenerateFrequencySet => "DegenerateFrequencySet",
            Error::EnumerationCapExceeded { .. } => "EnumerationCapExceeded",
            Error::SupportTooLarge { .. } => "SupportTooLarge",
            Error::GroupMismatch { .. } => "GroupMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InsufficientU2 { .. } => "InsufficientU2",
            Error::InsufficientU3 { .. } => "InsufficientU3",
            Error::RadiusSeparationViolated(_) => "RadiusSeparationViolated",
            Error::AlmostLinearityViolated { .. } => "AlmostLinearityViolated",
            Error::ExponentialSumTooSmall { .. } => "ExponentialSumTooSmall",
            Error::NoSmallMultiple { .. } => "NoSmallMultiple",
            Error::ZeroFrequency => "ZeroFrequency",
            Error::ReducibleFrequency { .. } => "ReducibleFrequency",
            Error::RankDeficient => "RankDeficient",
            Error::DimensionCapExceeded { .. } => "DimensionCapExceeded",
            Error::NoAdmissibleBasePoint => "NoAdmissibleBasePoint",
            Error::PreconditionNotMet(_) => "PreconditionNotMet",
            Error::NoCorrelationFound { .. } => "NoCorrelationFound",
            Error::UnimplementedStep => "UnimplementedStep",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::Parse(_) => "Parse",
        }
    }
}
