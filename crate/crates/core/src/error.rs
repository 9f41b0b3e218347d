use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error("precheck failed: {0}")]
    PrecheckFailed(String),

    #[error("generator property violated for component {component}: residual {residual:.3e}")]
    GeneratorMismatch { component: String, residual: f64 },

    #[error("system `{0}` is not declared separable")]
    NotSeparable(String),

    #[error("implicit solve did not converge at step {step} (last correction {correction:.3e})")]
    NoConvergence { step: usize, correction: f64 },

    #[error("frequencies must be strictly positive, got {0}")]
    BadFrequency(f64),

    #[error("massless lattice field has a zero-frequency mode")]
    ZeroModeUnsupported,

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("cutoff {cutoff} too small for monomial degree {degree}")]
    CutoffTooSmall { cutoff: usize, degree: usize },

    #[error("force must be nonzero for energy eigenstates")]
    ZeroForce,

    #[error("momentum {momentum} lies outside the grid [{p_min}, {p_max})")]
    OffGrid { momentum: f64, p_min: f64, p_max: f64 },

    #[error("wave states live on different grids or times: {0}")]
    GridMismatch(String),

    #[error("momentum shift {shift} is not an integer multiple of the grid spacing {dp}")]
    IncommensurateShift { shift: f64, dp: f64 },

    #[error("state is not normalizable on the grid: {0}")]
    NotNormalizable(String),
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
