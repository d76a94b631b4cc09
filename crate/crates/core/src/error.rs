use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid expectation value {0}: |<sigma_z>| must not exceed 1")]
    InvalidExpectation(f64),

    #[error("rotation axis is not normalized (|axis| = {0})")]
    AxisNotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("grid resolution too coarse: {0}")]
    GridResolution(String),

    #[error("invalid noise parameter: {0}")]
    InvalidNoise(String),

    #[error("gate window [{start} ns, {end} ns] exceeds trace span of {span} ns")]
    WindowExceedsTrace { start: f64, end: f64, span: f64 },

    #[error("traces do not share a grid: {0}")]
    GridMismatch(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("Lindblad step too large: gamma*dt = {0} exceeds 0.01")]
    StepSize(f64),

    #[error("unresolvable noise routing: {0}")]
    NoiseRouting(String),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("spectral input too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid segmentation: {0}")]
    Segmentation(String),

    #[error("frequency band ({lo} MHz, {hi} MHz) contains no PSD bins")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("damping-time estimate diverges for zero noise amplitude")]
    DivergentEstimate,

    #[error("CSV error: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
