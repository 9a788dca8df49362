use thiserror::Error;

/// Errors shared by every module of the laboratory.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite sample")]
    NonFiniteSample,

    #[error("empty open set")]
    EmptyOpenSet,

    #[error("grid too small")]
    GridTooSmall,

    #[error("potential must be non-negative")]
    NegativePotential,

    #[error("negative input")]
    NegativeInput,

    #[error("symbol non-finite at eigenvalue {0}")]
    NonFiniteSymbol(f64),

    #[error("symbol non-finite at spectral pair ({0}, {1})")]
    NonFiniteJointSymbol(f64, f64),

    #[error("Gaussian bound violated: worst sample t={t}, x={x}, y={y}")]
    GaussianBoundViolated { t: f64, x: usize, y: usize },

    #[error("singular operator")]
    SingularOperator,

    #[error("power iteration did not converge within {0} steps")]
    PowerIterationStalled(usize),

    #[error("undersampled symbol")]
    UndersampledSymbol,

    #[error("calderon calibration")]
    CalderonCalibration,

    #[error("rectangle not contained in open set")]
    RectangleOutsideSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}
