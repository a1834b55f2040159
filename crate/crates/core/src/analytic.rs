//! Derivatives of entropy surfaces, one-shot mutual information, the bound
//! chain and training-fraction optimization.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ceil_tolerant, GainSource, ModelSpec, TrainingFraction, ValidatedModel};
use crate::numerics::{
    derivative, integrate, maximize_bracketed, neumaier_sum, normal_expectation, right_derivative, DiffDomain,
    SimpsonConfig,
};
use crate::oracle::limiting_h_prime;
use crate::surface::{scale_surface, EntropySurface};

/// Offsets at which the right limits at `eps = 0+` are sampled before linear
/// extrapolation.
pub const RIGHT_LIMIT_LADDER: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Grid size of the pre-scan in [`optimize_tau`].
pub const TAU_GRID_POINTS: usize = 64;

/// Nodes of the Gauss-Hermite rule used for normal gain expectations.
pub const GAIN_QUADRATURE_NODES: usize = 64;

fn diagonal_domain(surface: &EntropySurface, tau: TrainingFraction) -> DiffDomain<'_> {
    DiffDomain::new(-1.0, tau.max_offset(), surface.diagonal_kinks())
}

fn check_offset(eps: f64, tau: TrainingFraction) -> Result<()> {
    let hi = tau.max_offset();
    if eps > -1.0 && eps <= hi + 1e-12 {
        Ok(())
    } else {
        Err(Error::OffsetOutOfRange { eps, lo: -1.0, hi })
    }
}

/// `dH(Y_eps | X)/d eps`, the per-symbol entropy when only the training
/// inputs are known.
///
/// Fails with [`Error::NonDifferentiable`] exactly at a declared kink.
pub fn h_prime_data(surface: &EntropySurface, tau: TrainingFraction, eps: f64) -> Result<f64> {
    check_offset(eps, tau)?;
    let t = tau.get();
    let dom = DiffDomain::new(-1.0, tau.max_offset(), surface.kinks());
    derivative(|u| surface.scaled_value(t, u, 0.0), eps, &dom)
}

/// `dH(Y_eps | X_eps)/d eps`, the per-symbol entropy when training continues
/// through the current slot.
pub fn h_prime_diag(surface: &EntropySurface, tau: TrainingFraction, eps: f64) -> Result<f64> {
    check_offset(eps, tau)?;
    if (1.0 + eps) * tau.get() > 1.0 + 1e-12 {
        return Err(Error::ScaledFractionOutOfRange { tau: tau.get(), u: eps, scaled: (1.0 + eps) * tau.get() });
    }
    let t = tau.get();
    derivative(|u| surface.scaled_value(t, u, u), eps, &diagonal_domain(surface, tau))
}

fn right_limit_ladder(tau: TrainingFraction) -> Result<[f64; 3]> {
    let room = tau.max_offset();
    if room <= 0.0 {
        return Err(Error::OffsetOutOfRange { eps: RIGHT_LIMIT_LADDER[0], lo: -1.0, hi: room });
    }
    let scale = (0.5 * room / RIGHT_LIMIT_LADDER[0]).min(1.0);
    Ok(RIGHT_LIMIT_LADDER.map(|e| e * scale))
}

/// Jump between the two per-symbol entropies at the training/data boundary,
/// `lim dH(Y_eps|X)/d eps - lim dH(Y_eps|X_eps)/d eps` as `eps -> 0+`.
pub fn one_shot_mutual_information(surface: &EntropySurface, tau: TrainingFraction) -> Result<f64> {
    let ladder = right_limit_ladder(tau)?;
    let mut data = Vec::with_capacity(ladder.len());
    let mut diag = Vec::with_capacity(ladder.len());
    for &e in &ladder {
        data.push((e, h_prime_data(surface, tau, e)?));
        diag.push((e, h_prime_diag(surface, tau, e)?));
    }
    let gap = crate::numerics::extrapolate_to_zero(&data) - crate::numerics::extrapolate_to_zero(&diag);
    if !gap.is_finite() {
        return Err(Error::SurfaceEvaluation { eps: 0.0 });
    }
    if gap < -1e-9 {
        log::warn!("extrapolated mutual information {gap} is negative; clamping to zero");
    }
    Ok(gap.max(0.0))
}

/// `(1 - tau) I(X;Y)`, the one-shot lower bound on the rate per received
/// symbol.
pub fn lower_bound_rate(surface: &EntropySurface, tau: TrainingFraction) -> Result<f64> {
    if tau.get() >= 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - tau.get()) * one_shot_mutual_information(surface, tau)?)
}

/// `I(X_eps; Y_eps)`: right derivative of `u -> H(Y_u | X_eps)` at `u = eps`
/// minus the diagonal derivative at `eps`.
pub fn offset_mutual_information(surface: &EntropySurface, tau: TrainingFraction, eps: f64) -> Result<f64> {
    check_offset(eps, tau)?;
    let t = tau.get();
    // The data branch is still defined a little past the end of the block,
    // which the right-sided stencil needs at eps = 1/tau - 1.
    let kinks = [eps];
    let dom = DiffDomain::new(-1.0, f64::INFINITY, &kinks);
    let data = right_derivative(|u| surface.scaled_value(t, u, eps), eps, &dom)?;
    let diag = match h_prime_diag(surface, tau, eps) {
        Err(Error::NonDifferentiable { right, .. }) if right.is_finite() => right,
        other => other?,
    };
    Ok(data - diag)
}

/// Absolute difference between `H(eps)` and `integral_{-1}^{eps} H'(u) du`.
///
/// Processes without input use their exact per-symbol law; the XOR model is
/// checked along the diagonal regime against the numerical surface
/// derivative. The quadrature is split at every declared kink.
pub fn integral_consistency(
    surface: &EntropySurface,
    tau: TrainingFraction,
    eps: f64,
    model: &ValidatedModel,
) -> Result<f64> {
    check_offset(eps, tau)?;
    let cfg = SimpsonConfig::default();
    let (entropy, integral) = if surface.conditions_on_input() {
        let t = tau.get();
        let h = scale_surface(surface, tau, eps, eps)?.value;
        let dom = diagonal_domain(surface, tau);
        let integrand = |u: f64| right_derivative(|v| surface.scaled_value(t, v, v), u, &dom).unwrap_or(f64::NAN);
        (h, integrate(integrand, -1.0, eps, surface.diagonal_kinks(), &cfg)?)
    } else {
        limiting_h_prime(model, 0.0)?;
        let h = surface.eval(tau.get(), eps);
        let integrand = |u: f64| limiting_h_prime(model, u).map(|l| l.value).unwrap_or(f64::NAN);
        (h, integrate(integrand, -1.0, eps, surface.kinks(), &cfg)?)
    };
    Ok((entropy - integral).abs())
}

/// Window mean of per-symbol entropies over indices
/// `ceil((1+eps-kappa/2) T) ..= ceil((1+eps+kappa/2) T) - 1`.
pub fn averaged_h_prime(entropies: &[(usize, f64)], training_len: usize, eps: f64, kappa: f64) -> Result<f64> {
    if kappa.is_nan() || kappa <= 0.0 || training_len == 0 {
        return Err(Error::InvalidParameter("averaging needs kappa > 0 and T >= 1".into()));
    }
    let t = training_len as f64;
    let first = ceil_tolerant((1.0 + eps - kappa / 2.0) * t).max(0.0) as usize;
    let end = ceil_tolerant((1.0 + eps + kappa / 2.0) * t).max(0.0) as usize;
    if end <= first {
        return Err(Error::InsufficientSamples { first, last: first });
    }
    let last = end - 1;
    let by_index: BTreeMap<usize, f64> = entropies.iter().copied().collect();
    let mut window = Vec::with_capacity(end - first);
    for idx in first..=last {
        match by_index.get(&idx) {
            Some(&v) => window.push(v),
            None => return Err(Error::InsufficientSamples { first, last }),
        }
    }
    Ok(neumaier_sum(window.iter().copied()) / window.len() as f64)
}

/// Optimal training fraction and the rate it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauOptResult {
    pub tau_opt: TrainingFraction,
    /// `(1 - tau_opt) * i_at_opt`, bits per received symbol.
    pub r_opt: f64,
    pub i_at_opt: f64,
    pub bracket: (f64, f64),
}

/// `1 - e^{-tau/a}`.
pub fn xor_mutual_information(tau: f64, a: f64) -> f64 {
    -(-tau / a).exp_m1()
}

/// Maximizes `(1 - tau) I(X;Y)` over `tau in (0, 1)`.
///
/// A grid pre-scan brackets the global maximum (no unimodality assumption),
/// then golden-section search narrows the bracket to `tol`.
pub fn optimize_tau(model: &ValidatedModel, tol: f64) -> Result<TauOptResult> {
    let mutual_info: Box<dyn Fn(f64) -> f64> = match *model.spec() {
        ModelSpec::XorRandomChannel { a } => Box::new(move |t| xor_mutual_information(t, a)),
        ModelSpec::ScalarGainChannel { .. } => {
            return Err(Error::UnsupportedSurface(
                "the scalar gain bound decreases in tau; its optimum is tau -> 0".into(),
            ))
        }
        _ => {
            let surface = EntropySurface::for_model(model)?;
            Box::new(move |t| {
                TrainingFraction::new(t).and_then(|tau| one_shot_mutual_information(&surface, tau)).unwrap_or(f64::NAN)
            })
        }
    };
    let objective = |t: f64| (1.0 - t) * mutual_info(t);
    let best = maximize_bracketed(objective, 0.0, 1.0, TAU_GRID_POINTS, tol)?;
    let tau_opt = TrainingFraction::new(best.x).map_err(|_| Error::ObjectiveEvaluation { tau: best.x })?;
    let i_at_opt = mutual_info(best.x);
    if !i_at_opt.is_finite() {
        return Err(Error::ObjectiveEvaluation { tau: best.x });
    }
    Ok(TauOptResult { tau_opt, r_opt: (1.0 - best.x) * i_at_opt, i_at_opt, bracket: best.bracket })
}

/// Closed-form limits of the optimal XOR training fraction: `-a ln a` for
/// `a <= 0.01`, `1/2` for `a >= 100`, `1/e` at `a = 1/e`; `None` elsewhere.
pub fn asymptotic_tau_reference(a: f64) -> Option<f64> {
    let inv_e = (-1.0f64).exp();
    if a <= 0.0 || !a.is_finite() {
        None
    } else if a <= 0.01 {
        Some(-a * a.ln())
    } else if a >= 100.0 {
        Some(0.5)
    } else if (a - inv_e).abs() <= 4.0 * f64::EPSILON * inv_e {
        Some(inv_e)
    } else {
        None
    }
}

/// `E_g log2(1 + g^2)`; Gauss-Hermite for a normal gain, the sample mean
/// otherwise.
pub fn gain_expectation(gains: &GainSource) -> Result<f64> {
    let f = |g: f64| (g * g).ln_1p() / std::f64::consts::LN_2;
    match gains {
        GainSource::Samples { values } if values.is_empty() => Err(Error::NoGains),
        GainSource::Samples { values } => Ok(neumaier_sum(values.iter().map(|&g| f(g))) / values.len() as f64),
        GainSource::Normal { mean, std_dev } => Ok(normal_expectation(f, *mean, *std_dev, GAIN_QUADRATURE_NODES)),
    }
}

/// `((1 - tau)/2) E_g log2(1 + g^2)` for the scalar bilinear channel.
pub fn scalar_gain_bound(model: &ValidatedModel, tau: TrainingFraction) -> Result<f64> {
    match model.spec() {
        ModelSpec::ScalarGainChannel { gains } => Ok(0.5 * (1.0 - tau.get()) * gain_expectation(gains)?),
        other => Err(Error::InvalidParameter(format!("{} is not a scalar gain channel", other.name()))),
    }
}

/// The two computed rungs of the lower-bound chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundChain {
    /// `integral_0^{1/tau-1} tau I(X_eps; Y_eps) d eps`.
    pub integral_bound: f64,
    /// `(1 - tau) I(X; Y)`.
    pub one_shot_bound: f64,
    /// `(eps, I(X_eps; Y_eps))` on the requested grid.
    pub offset_mi: Vec<(f64, f64)>,
}

impl BoundChain {
    /// `[integral bound, one-shot bound]`, largest first.
    pub fn values(&self) -> [f64; 2] {
        [self.integral_bound, self.one_shot_bound]
    }
}

/// Evaluates the bound chain and checks its ordering and the monotonicity of
/// `I(X_eps; Y_eps)` on `eps_grid`.
pub fn bound_chain(surface: &EntropySurface, tau: TrainingFraction, eps_grid: &[f64]) -> Result<BoundChain> {
    if !surface.conditions_on_input() {
        return Err(Error::UnsupportedSurface("the bound chain needs an input-output model".into()));
    }
    let t = tau.get();
    let hi = tau.max_offset();
    if hi <= 0.0 {
        return Ok(BoundChain { integral_bound: 0.0, one_shot_bound: 0.0, offset_mi: Vec::new() });
    }
    let integrand = |e: f64| t * offset_mutual_information(surface, tau, e.min(hi)).unwrap_or(f64::NAN);
    let integral_bound = integrate(integrand, 0.0, hi, &[], &SimpsonConfig::default())?;
    let one_shot_bound = lower_bound_rate(surface, tau)?;
    let mut offset_mi = Vec::with_capacity(eps_grid.len());
    for &e in eps_grid {
        if !(0.0..=hi).contains(&e) {
            return Err(Error::OffsetOutOfRange { eps: e, lo: 0.0, hi });
        }
        offset_mi.push((e, offset_mutual_information(surface, tau, e)?));
    }
    if integral_bound < one_shot_bound - 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "bound chain violated: integral bound {integral_bound} < one-shot bound {one_shot_bound}"
        )));
    }
    let mut sorted = offset_mi.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[1].1 < w[0].1 - 1e-9) {
        return Err(Error::InvalidParameter("I(X_eps; Y_eps) is not monotone in eps".into()));
    }
    Ok(BoundChain { integral_bound, one_shot_bound, offset_mi })
}

/// Entropy curves and their derivatives along the data and diagonal regimes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCurves {
    pub eps_grid: Vec<f64>,
    pub h_data: Vec<f64>,
    pub h_diag: Vec<f64>,
    pub hprime_data: Vec<f64>,
    pub hprime_diag: Vec<f64>,
    pub mutual_info: f64,
}

/// Tabulates [`PhaseCurves`] on a strictly increasing grid inside
/// `(-1, 1/tau - 1]`. Derivatives at kinks are right derivatives, matching the
/// forward-looking definition of the per-symbol entropy.
pub fn phase_curves(surface: &EntropySurface, tau: TrainingFraction, eps_grid: &[f64]) -> Result<PhaseCurves> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("empty offset grid".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("offset grid must be strictly increasing".into()));
    }
    let t = tau.get();
    let data_dom = DiffDomain::new(-1.0, tau.max_offset(), surface.kinks());
    let diag_dom = diagonal_domain(surface, tau);
    let n = eps_grid.len();
    let mut curves = PhaseCurves {
        eps_grid: eps_grid.to_vec(),
        h_data: Vec::with_capacity(n),
        h_diag: Vec::with_capacity(n),
        hprime_data: Vec::with_capacity(n),
        hprime_diag: Vec::with_capacity(n),
        mutual_info: 0.0,
    };
    for &e in eps_grid {
        curves.h_data.push(scale_surface(surface, tau, e, 0.0)?.value);
        curves.h_diag.push(scale_surface(surface, tau, e, e)?.value);
        curves.hprime_data.push(right_derivative(|u| surface.scaled_value(t, u, 0.0), e, &data_dom)?);
        curves.hprime_diag.push(right_derivative(|u| surface.scaled_value(t, u, u), e, &diag_dom)?);
    }
    curves.mutual_info = if tau.get() < 1.0 { one_shot_mutual_information(surface, tau)? } else { 0.0 };
    Ok(curves)
}
