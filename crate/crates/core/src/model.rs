//! Shared domain types: training fractions, phase offsets, the model registry
//! and the simulation configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the blocklength spent on training, `0 < tau <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TrainingFraction(f64);

impl TrainingFraction {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 && tau <= 1.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidParameter(format!("training fraction must satisfy 0 < tau <= 1, got {tau}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Largest phase offset that still lies inside the block, `1/tau - 1`.
    #[inline]
    pub fn max_offset(self) -> f64 {
        1.0 / self.0 - 1.0
    }
}

impl TryFrom<f64> for TrainingFraction {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TrainingFraction> for f64 {
    fn from(value: TrainingFraction) -> f64 {
        value.0
    }
}

/// Position `ceil((1+eps) T)` inside a block, expressed relative to the
/// training length.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PhaseOffset(f64);

impl PhaseOffset {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps >= -1.0 {
            Ok(Self(eps))
        } else {
            Err(Error::InvalidParameter(format!("phase offset must satisfy eps >= -1, got {eps}")))
        }
    }

    /// Offset that additionally stays inside the block of the given training
    /// fraction.
    pub fn within(eps: f64, tau: TrainingFraction) -> Result<Self> {
        let offset = Self::new(eps)?;
        let hi = tau.max_offset();
        if eps > hi + 1e-12 {
            return Err(Error::OffsetOutOfRange { eps, lo: -1.0, hi });
        }
        Ok(offset)
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Where the gains of the scalar bilinear channel come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainSource {
    Samples { values: Vec<f64> },
    Normal { mean: f64, std_dev: f64 },
}

impl GainSource {
    pub fn standard_normal() -> Self {
        GainSource::Normal { mean: 0.0, std_dev: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Bit flipping through `ceil(a B)` randomly selected channels.
    XorRandomChannel { a: f64 },
    /// `y = g x + v` with an unknown scalar gain.
    ScalarGainChannel { gains: GainSource },
    /// Stationary process with entropy rate `h` bits per symbol.
    StationaryIid { h: f64 },
    /// Unit-entropy iid symbols for the training phase, repeated afterwards.
    Repetition,
    /// Every unit-entropy symbol emitted twice in a row.
    Oscillation,
    /// Independent unit-entropy symbols with a single `T`-bit symbol near `T/2`.
    UnboundedSpike,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::XorRandomChannel { .. } => "xor",
            ModelSpec::ScalarGainChannel { .. } => "gain",
            ModelSpec::StationaryIid { .. } => "iid",
            ModelSpec::Repetition => "repetition",
            ModelSpec::Oscillation => "oscillation",
            ModelSpec::UnboundedSpike => "spike",
        }
    }

    pub fn validate(self) -> Result<ValidatedModel> {
        validate_model(self)
    }
}

/// A [`ModelSpec`] whose parameters have been checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedModel(ModelSpec);

impl ValidatedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.0
    }

    pub fn into_spec(self) -> ModelSpec {
        self.0
    }

    /// Channel density of the XOR model, if this is one.
    pub fn xor_density(&self) -> Option<f64> {
        match self.0 {
            ModelSpec::XorRandomChannel { a } => Some(a),
            _ => None,
        }
    }
}

/// Checks every parameter invariant and reports the first violation.
pub fn validate_model(spec: ModelSpec) -> Result<ValidatedModel> {
    match &spec {
        ModelSpec::XorRandomChannel { a } => {
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
            }
        }
        ModelSpec::StationaryIid { h } => {
            if !(h.is_finite() && *h >= 0.0) {
                return Err(Error::InvalidParameter(format!("h must be non-negative, got {h}")));
            }
        }
        ModelSpec::ScalarGainChannel { gains } => match gains {
            GainSource::Samples { values } => {
                if values.is_empty() {
                    return Err(Error::NoGains);
                }
                if let Some(bad) = values.iter().find(|g| !g.is_finite()) {
                    return Err(Error::InvalidParameter(format!("gain sample {bad} is not finite")));
                }
            }
            GainSource::Normal { mean, std_dev } => {
                if !(mean.is_finite() && std_dev.is_finite() && *std_dev >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "normal gain distribution needs finite mean and std_dev >= 0, got ({mean}, {std_dev})"
                    )));
                }
            }
        },
        ModelSpec::Repetition | ModelSpec::Oscillation | ModelSpec::UnboundedSpike => {}
    }
    Ok(ValidatedModel(spec))
}

/// Ceiling that ignores floating-point noise just above an integer, so that
/// `10 / 0.1` rounds to 100 rather than 101.
pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Blocklength `ceil(T / tau)`.
pub fn blocklength(training_len: usize, tau: TrainingFraction) -> usize {
    let b = ceil_tolerant(training_len as f64 / tau.get()) as usize;
    b.max(training_len)
}

/// Number of distinct channels `L = ceil(a B)`, at least one.
pub fn channel_count(a: f64, blocklength: usize) -> usize {
    (ceil_tolerant(a * blocklength as f64) as usize).max(1)
}

/// Configuration of a seeded XOR-model simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub training_len: usize,
    pub tau: TrainingFraction,
    pub a: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(training_len: usize, tau: TrainingFraction, a: f64, trials: usize, seed: u64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
        }
        if trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        Ok(Self { training_len, tau, a, trials, seed })
    }

    pub fn blocklength(&self) -> usize {
        blocklength(self.training_len, self.tau).max(1)
    }

    pub fn channel_count(&self) -> usize {
        channel_count(self.a, self.blocklength())
    }
}
