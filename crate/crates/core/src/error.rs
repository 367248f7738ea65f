use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("beta coefficients must be non-negative, got {0}")]
    NegativeBeta(f64),
    #[error("jacobi head sequences must be non-empty")]
    EmptyHead,
    #[error("jacobi head sequences must have equal length (alpha {alpha}, beta {beta})")]
    HeadLengthMismatch { alpha: usize, beta: usize },
    #[error("continued-fraction depth must be at least 1")]
    ZeroDepth,
    #[error("real evaluation point {x} lies inside the estimated support radius {bound}")]
    RealPointInSupport { x: f64, bound: f64 },
    #[error("density formula requires standardized parameters a1 = 0, b1 = 1 (got a1 = {a1}, b1 = {b1})")]
    NotStandardized { a1: f64, b1: f64 },
    #[error("density denominator vanishes near x = {x}; the law has an atom-adjacent degeneracy")]
    DensityPole { x: f64 },
    #[error("beta2 must be strictly positive for this route")]
    BetaTwoMustBePositive,
    #[error("enumeration of partitions of [{m}] exceeds the budget (max m = {max})")]
    EnumerationBudget { m: usize, max: usize },
    #[error("operator word of length {len} exceeds the exactness bound {max} of the truncated model")]
    WordTooLong { len: usize, max: usize },
    #[error("label {label} out of range for a model with {labels} labels")]
    UnknownLabel { label: usize, labels: usize },
    #[error("truncated basis of size {size} exceeds the budget {max}")]
    BasisBudget { size: usize, max: usize },
    #[error("moment route requires beta1 > 0 and beta2 > 0 (got {beta1}, {beta2}); use a degenerate-beta route")]
    PositiveBetasRequired { beta1: f64, beta2: f64 },
    #[error("this route requires beta2 = 0, got {beta2}")]
    ExpectedBetaTwoZero { beta2: f64 },
    #[error("polynomial degree {degree} exceeds the supported maximum {max}")]
    DegreeBudget { degree: usize, max: usize },
    #[error("adjacent labels at positions {position} and {} must differ", position + 1)]
    AdjacentLabelsEqual { position: usize },
    #[error("imaginary residue {residue:e} of a partial trace exceeds tolerance {tolerance:e}; the evaluated word is not Hermitian")]
    ImaginaryResidue { residue: f64, tolerance: f64 },
    #[error("block sizes must satisfy 1 <= n1 < n, got n1 = {n1}, n = {n}")]
    BlockSizes { n1: usize, n: usize },
    #[error("block exponent rho must lie in (0, 1), got {0}")]
    BlockExponent(f64),
    #[error("Monte Carlo moment order {m_max} exceeds the variance budget (max {max})")]
    MomentBudget { m_max: usize, max: usize },
    #[error("n list must be non-empty and strictly increasing")]
    BadSizeList,
    #[error("variance matrix entries must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("unrecognized operator token {token:?} at position {position}")]
    ParseWord { position: usize, token: String },
    #[error("empty label set; a model needs at least one label")]
    NoLabels,
    #[error("word and degree lists must have equal non-zero length")]
    BadWordShape,
    #[error("{0}")]
    InvalidParameter(String),
}
