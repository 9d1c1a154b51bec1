use thiserror::Error;

/// Errors raised by model construction and the numerical checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("dense matrix of {rows} rows exceeds the cap of {cap} rows")]
    DenseCapExceeded { rows: usize, cap: usize },

    #[error("unbounded regime: constants diverge (alpha = {alpha} <= d = {dimension})")]
    UnboundedRegime { alpha: f64, dimension: usize },

    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not antisymmetric (residual {0:e})")]
    NotAntisymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("envelope undefined below t_c (t = {t}, t_c = {t_c})")]
    BelowCriticalTime { t: f64, t_c: f64 },

    #[error("resolvent singular: z = {re}{im:+}i is within {distance:e} of the spectrum")]
    ResolventSingular { re: f64, im: f64, distance: f64 },

    #[error("Fermi level inside band (smallest |eigenvalue| = {0:e})")]
    Gapless(f64),

    #[error("contour passes within {0:e} of an eigenvalue")]
    ContourCrossesSpectrum(f64),

    #[error("singular momentum: all sin(k) vanish")]
    SingularMomentum,

    #[error("no bound state: every eigenvalue lies inside the clean spectrum")]
    NoBoundState,

    #[error("decay fit needs at least {needed} points in the window, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
