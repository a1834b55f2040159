use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported surface: {0}")]
    UnsupportedSurface(String),

    #[error("scaled training fraction out of range: (1+{u})*{tau} = {scaled} > 1")]
    ScaledFractionOutOfRange { tau: f64, u: f64, scaled: f64 },

    #[error("offset {eps} outside the valid range ({lo}, {hi}]")]
    OffsetOutOfRange { eps: f64, lo: f64, hi: f64 },

    #[error("non-differentiable point at eps = {at}: left derivative {left}, right derivative {right}")]
    NonDifferentiable { at: f64, left: f64, right: f64 },

    #[error("surface evaluation failed at eps = {eps}")]
    SurfaceEvaluation { eps: f64 },

    #[error("quadrature failed on [{lo}, {hi}]")]
    QuadratureFailed { lo: f64, hi: f64 },

    #[error("insufficient samples: window [{first}, {last}] not covered by supplied entropies")]
    InsufficientSamples { first: usize, last: usize },

    #[error("objective evaluation failed at tau = {tau}")]
    ObjectiveEvaluation { tau: f64 },

    #[error("enumeration too large: {size} sequences exceed the budget of {budget}")]
    EnumerationTooLarge { size: u128, budget: u128 },

    #[error("rate exceeds slot budget: {message_bits} message bits for {slots} code slots")]
    RateExceedsSlotBudget { message_bits: usize, slots: usize },

    #[error("no gains supplied")]
    NoGains,
}
