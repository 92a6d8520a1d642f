use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("calibration pixel {index} is not strictly positive")]
    NonPositiveCalibration { index: usize },
    #[error("bin size {bin} does not divide frame dimensions {rows}x{cols}")]
    BinSize {
        bin: usize,
        rows: usize,
        cols: usize,
    },
    #[error("need at least {min} values, got {len}")]
    TooFew { len: usize, min: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("weight {index} is not strictly positive and finite")]
    NonPositiveWeight { index: usize },
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("kernel weights vanish at the current point (isolated point)")]
    VanishingDenominator,
    #[error("sparse basis is degenerate: no positive coefficient after the solve")]
    DegenerateBasis,
    #[error("exponential rate is unidentifiable from a flat trace")]
    Unidentifiable,
    #[error("singular regression design: all regressors identical")]
    SingularDesign,
    #[error("calibration needs at least 2 distinct glucose levels, got {0}")]
    TooFewLevels(usize),
    #[error("group {0} has a non-positive mean")]
    NonPositiveMean(usize),
    #[error("glucose {0} mg/dl outside the supported range [20, 600]")]
    GlucoseOutOfRange(f64),
}
