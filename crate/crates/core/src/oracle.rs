//! Exact finite-length entropies for the XOR random-channel model and the
//! pedagogical processes, plus a brute-force enumerator that checks them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{blocklength, channel_count, ModelSpec, TrainingFraction, ValidatedModel};

/// Largest number of selection sequences the brute-force enumerator visits.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Training length `T`, blocklength `B` and channel count `L` of one finite
/// XOR system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct XorExactConfig {
    pub training_len: usize,
    pub blocklength: usize,
    pub channels: usize,
}

impl XorExactConfig {
    pub fn new(training_len: usize, blocklength: usize, channels: usize) -> Result<Self> {
        if training_len > blocklength {
            return Err(Error::InvalidParameter(format!(
                "training length {training_len} exceeds blocklength {blocklength}"
            )));
        }
        if channels == 0 || blocklength == 0 {
            return Err(Error::InvalidParameter("blocklength and channel count must be positive".into()));
        }
        Ok(Self { training_len, blocklength, channels })
    }

    /// `B = ceil(T / tau)`, `L = ceil(a B)`.
    pub fn from_fraction(training_len: usize, tau: TrainingFraction, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
        }
        let b = blocklength(training_len, tau).max(1);
        Self::new(training_len, b, channel_count(a, b))
    }
}

/// `(1 - 1/L)^t`: probability that the channel used at slot `t+1` was not
/// selected in any of the first `t` slots.
pub fn xor_unseen_probability(t: usize, channels: usize) -> f64 {
    assert!(channels > 0, "channel count must be positive");
    if t == 0 {
        return 1.0;
    }
    if channels == 1 {
        return 0.0;
    }
    (t as f64 * (-1.0 / channels as f64).ln_1p()).exp()
}

/// `L^T` and `(L-1)^T` as exact integers when `L^T < 2^53`.
fn exact_powers(t: usize, l: usize) -> Option<(u128, u128)> {
    let t = u32::try_from(t).ok()?;
    let lt = (l as u128).checked_pow(t)?;
    if lt >= 1u128 << 53 {
        return None;
    }
    Some((lt, (l as u128 - 1).pow(t)))
}

/// `H(y_T | x_T) = E|A_T| = L (1 - (1 - 1/L)^T)` bits, the expected number of
/// distinct channels seen in `T` draws.
pub fn xor_block_entropy(cfg: &XorExactConfig) -> f64 {
    let (t, l) = (cfg.training_len, cfg.channels);
    if t == 0 {
        return 0.0;
    }
    if let Some((lt, lm1t)) = exact_powers(t, l) {
        // L (L^T - (L-1)^T) / L^T, a single correctly rounded division
        return ((l as u128 * (lt - lm1t)) as f64) / lt as f64;
    }
    l as f64 * -(t as f64 * (-1.0 / l as f64).ln_1p()).exp_m1()
}

/// Brute-force `E|A_T|` over all `L^T` equally likely selection sequences.
pub fn xor_block_entropy_bruteforce(cfg: &XorExactConfig) -> Result<f64> {
    let (t, l) = (cfg.training_len, cfg.channels);
    let size = u32::try_from(t).ok().and_then(|t| (l as u128).checked_pow(t)).unwrap_or(u128::MAX);
    if size > ENUMERATION_BUDGET {
        return Err(Error::EnumerationTooLarge { size, budget: ENUMERATION_BUDGET });
    }
    if t == 0 {
        return Ok(0.0);
    }
    let mut digits = vec![0usize; t];
    let mut stamp = vec![0u64; l];
    let mut total: u64 = 0;
    for seq in 1..=size as u64 {
        let mut distinct = 0u64;
        for &k in &digits {
            if stamp[k] != seq {
                stamp[k] = seq;
                distinct += 1;
            }
        }
        total += distinct;
        // next sequence in base L
        for d in digits.iter_mut() {
            *d += 1;
            if *d < l {
                break;
            }
            *d = 0;
        }
    }
    Ok(total as f64 / size as f64)
}

/// Which inputs the receiver conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// All inputs up to and including the next slot are known.
    Diagonal,
    /// Only the training inputs are known.
    Data,
}

/// Exact `H(y_{t+1} | x^{...}, y^t)` for the finite XOR system.
///
/// Diagonal: `(1 - 1/L)^t`, the chance the next channel is still
/// unidentified. Data: once slot `t+1` lies beyond training its input is an
/// unknown fair bit, so the output is a fair bit too.
pub fn xor_conditional_entropy(t: usize, cfg: &XorExactConfig, regime: Regime) -> Result<f64> {
    if t >= cfg.blocklength {
        return Err(Error::InvalidParameter(format!("slot index {t} outside block of length {}", cfg.blocklength)));
    }
    Ok(match regime {
        Regime::Data if t >= cfg.training_len => 1.0,
        _ => xor_unseen_probability(t, cfg.channels),
    })
}

/// `I(x_{T+1}; y_{T+1} | x^T, y^T) = 1 - (1 - 1/L)^T` bits.
pub fn xor_finite_mutual_information(cfg: &XorExactConfig) -> f64 {
    let (t, l) = (cfg.training_len, cfg.channels);
    if t == 0 {
        return 0.0;
    }
    if l == 1 {
        return 1.0;
    }
    -(t as f64 * (-1.0 / l as f64).ln_1p()).exp_m1()
}

/// Spike position for the unbounded-entropy process.
pub fn spike_index(training_len: usize) -> usize {
    training_len / 2 - 3
}

/// Exact per-symbol entropy of the pedagogical processes at index `t` for
/// training length `T`.
pub fn pedagogical_entropy(model: &ValidatedModel, t: usize, training_len: usize) -> Result<f64> {
    match *model.spec() {
        ModelSpec::Repetition => Ok(if t < training_len { 1.0 } else { 0.0 }),
        ModelSpec::Oscillation => Ok(if t.is_multiple_of(2) { 1.0 } else { 0.0 }),
        ModelSpec::UnboundedSpike => {
            if training_len < 8 {
                return Err(Error::InvalidParameter(format!("the spike process needs T >= 8, got {training_len}")));
            }
            Ok(if t == spike_index(training_len) { training_len as f64 } else { 1.0 })
        }
        ModelSpec::StationaryIid { h } => Ok(h),
        _ => Err(Error::UnsupportedSurface(format!("{} is not a pedagogical process", model.spec().name()))),
    }
}

/// Large-`T` limit of the per-symbol entropy at index `ceil((1+eps) T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitingEntropy {
    pub value: f64,
    /// The raw limit does not exist and `value` is the window average.
    pub averaged: bool,
}

pub fn limiting_h_prime(model: &ValidatedModel, eps: f64) -> Result<LimitingEntropy> {
    let exact = |value| Ok(LimitingEntropy { value, averaged: false });
    match *model.spec() {
        ModelSpec::Repetition => exact(if eps < 0.0 { 1.0 } else { 0.0 }),
        // the spike occupies a single index and vanishes from the limit
        ModelSpec::UnboundedSpike => exact(1.0),
        ModelSpec::StationaryIid { h } => exact(h),
        ModelSpec::Oscillation => Ok(LimitingEntropy { value: 0.5, averaged: true }),
        _ => Err(Error::UnsupportedSurface(format!("no per-symbol law for {}", model.spec().name()))),
    }
}
