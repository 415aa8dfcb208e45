use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CssError {
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("point lies on the singular set (distance {0:e})")]
    SingularPoint(f64),
    #[error("not a unit vector (norm {0})")]
    NotUnitVector(f64),
    #[error("alpha = {alpha} is not below the critical value {critical}")]
    SupercriticalAlpha { alpha: f64, critical: f64 },
    #[error("dimension {n} too small for block size {k}")]
    DimensionTooSmall { n: usize, k: usize },
    #[error("eigen-iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("operator is not bounded below by the spectral floor (mu1 = {mu1}, floor = {floor})")]
    IndefiniteOperator { mu1: f64, floor: f64 },
    #[error("sector sweep cannot certify the first {0} eigenvalues")]
    TruncationInsufficient(usize),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("mu = {mu} below the spectral floor {floor}")]
    BelowSpectralFloor { mu: f64, floor: f64 },
    #[error("step control underflow at r = {0:e}")]
    StiffFailure(f64),
    #[error("solution drifts to the irregular branch (local exponent {0})")]
    IrregularBranch(f64),
    #[error("divergent integrand: {0}")]
    DivergentIntegrand(String),
    #[error("finite-difference stencil straddles the singular set")]
    NearSingularGradient,
    #[error("boundary norm vanishes at r = {0:e}")]
    ZeroBoundaryNorm(f64),
    #[error("frequency shows no convergence: {0}")]
    NoConvergenceDetected(String),
    #[error("no admissible radius: {0}")]
    NoAdmissibleRadius(String),
    #[error("eigenspace unresolved: {0}")]
    EigenspaceUnresolved(String),
    #[error("degenerate denominator 2*gamma+N-2 = {0:e}")]
    DegenerateDenominator(f64),
    #[error("north pole has no stereographic image")]
    NorthPole,
    #[error("k = N: the angular coefficient is constant")]
    KEqualsN,
    #[error("sphere sampling too sparse near the south pole")]
    InterpolationGap,
    #[error("requested depth {depth} exceeds N - k = {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("field is not a solution (PDE residual {0:e})")]
    NotASolution(f64),
    #[error("constant {0} has not been estimated")]
    UnknownConstant(String),
    #[error("quadratic form is indefinite (Lambda = {0})")]
    IndefiniteForm(f64),
    #[error("sampled condition violated: {0}")]
    ConditionViolated(String),
}

pub type Result<T> = std::result::Result<T, CssError>;
