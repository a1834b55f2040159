//! Entropy surfaces `F(tau, eps) = H(Y_eps | X)` and their rescaling to
//! arbitrary conditioning offsets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, TrainingFraction, ValidatedModel};

/// `(1 - e^{-x}) / x`, continuous at zero.
#[inline]
pub(crate) fn saturation(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceKind {
    Xor { a: f64 },
    StationaryIid { h: f64 },
    Repetition,
    Oscillation,
    UnboundedSpike,
}

/// Closed-form entropy surface in bits per training symbol.
///
/// Values are defined for `eps >= -1`. For the XOR model the negative-offset
/// branch is `H(Y_eps | X)` with every emitted input already conditioned on,
/// i.e. the diagonal value, so the surface has a kink at `eps = 0`. The
/// pedagogical processes carry no input, so conditioning on `X` is vacuous.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySurface {
    kind: SurfaceKind,
    kinks: Vec<f64>,
}

/// `H(Y_eps | X_delta)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledEntropyPoint {
    pub eps: f64,
    pub delta: f64,
    pub value: f64,
}

/// Builds the closed-form surface of a validated model.
pub fn entropy_surface(model: &ValidatedModel) -> Result<EntropySurface> {
    let (kind, kinks) = match *model.spec() {
        ModelSpec::XorRandomChannel { a } => (SurfaceKind::Xor { a }, vec![0.0]),
        ModelSpec::StationaryIid { h } => (SurfaceKind::StationaryIid { h }, vec![]),
        ModelSpec::Repetition => (SurfaceKind::Repetition, vec![0.0]),
        ModelSpec::Oscillation => (SurfaceKind::Oscillation, vec![]),
        ModelSpec::UnboundedSpike => (SurfaceKind::UnboundedSpike, vec![-0.5]),
        ModelSpec::ScalarGainChannel { .. } => {
            return Err(Error::UnsupportedSurface(
                "the scalar gain channel has no entropy surface; use scalar_gain_bound".into(),
            ))
        }
    };
    Ok(EntropySurface { kind, kinks })
}

/// `H(Y_eps | X_delta) = (1+u) F((1+u) tau, (eps-u)/(1+delta))` with
/// `u = min(eps, delta)`.
pub fn scale_surface(
    surface: &EntropySurface,
    tau: TrainingFraction,
    eps: f64,
    delta: f64,
) -> Result<ScaledEntropyPoint> {
    let hi = tau.max_offset();
    for x in [eps, delta] {
        if !(x > -1.0 && x <= hi + 1e-12) {
            return Err(Error::OffsetOutOfRange { eps: x, lo: -1.0, hi });
        }
    }
    let u = eps.min(delta);
    let scaled = (1.0 + u) * tau.get();
    if scaled > 1.0 + 1e-12 {
        return Err(Error::ScaledFractionOutOfRange { tau: tau.get(), u, scaled });
    }
    Ok(ScaledEntropyPoint { eps, delta, value: surface.scaled_value(tau.get(), eps, delta) })
}

impl EntropySurface {
    pub fn for_model(model: &ValidatedModel) -> Result<Self> {
        entropy_surface(model)
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    /// Offsets where `eps -> F(tau, eps)` is not differentiable.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Kinks of the diagonal curve `eps -> H(Y_eps | X_eps)`.
    pub fn diagonal_kinks(&self) -> &[f64] {
        if self.conditions_on_input() {
            &[]
        } else {
            &self.kinks
        }
    }

    /// Whether the outputs depend on an input process at all.
    pub fn conditions_on_input(&self) -> bool {
        matches!(self.kind, SurfaceKind::Xor { .. })
    }

    /// `F(tau, eps)`; `tau` may be any value in `[0, 1]` here so that rescaled
    /// arguments near `eps = -1` stay evaluable.
    pub fn eval(&self, tau: f64, eps: f64) -> f64 {
        match self.kind {
            SurfaceKind::Xor { a } => {
                if eps >= 0.0 {
                    saturation(tau / a) + eps
                } else {
                    (1.0 + eps) * saturation((1.0 + eps) * tau / a)
                }
            }
            SurfaceKind::StationaryIid { h } => (1.0 + eps) * h,
            SurfaceKind::Repetition => (1.0 + eps).min(1.0),
            SurfaceKind::Oscillation => 0.5 * (1.0 + eps),
            SurfaceKind::UnboundedSpike => {
                if eps < -0.5 {
                    1.0 + eps
                } else {
                    2.0 + eps
                }
            }
        }
    }

    /// Unchecked rescaling used inside derivative stencils.
    pub(crate) fn scaled_value(&self, tau: f64, eps: f64, delta: f64) -> f64 {
        if !self.conditions_on_input() {
            return self.eval(tau, eps);
        }
        let u = eps.min(delta);
        if 1.0 + u <= 0.0 {
            // vanishing prefix; the surface is bounded on the diagonal
            return 0.0;
        }
        (1.0 + u) * self.eval((1.0 + u) * tau, (eps - u) / (1.0 + delta))
    }
}
