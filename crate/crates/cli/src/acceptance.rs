//! The acceptance suite, shared by `selftest` and the `acceptance` test
//! target.

use std::time::Instant;

use clap::Parser;
use entropy_phase::analytic::{
    averaged_h_prime, integral_consistency, one_shot_mutual_information, optimize_tau, xor_mutual_information,
};
use entropy_phase::coding::{sweep_rates, CodingConfig};
use entropy_phase::montecarlo::{estimate_data_phase_mi, estimate_distinct_channels, estimate_unseen_probability};
use entropy_phase::numerics::neumaier_sum;
use entropy_phase::oracle::{
    pedagogical_entropy, xor_block_entropy, xor_block_entropy_bruteforce, xor_conditional_entropy,
    xor_finite_mutual_information, xor_unseen_probability, Regime, XorExactConfig,
};
use entropy_phase::seed::stream_rng;
use entropy_phase::surface::scale_surface;
use entropy_phase::{EntropySurface, ModelSpec, SimConfig, TrainingFraction};
use rand::Rng;
use serde::Serialize;

use crate::args::Cli;
use crate::commands::{execute, AVERAGING_EPS, AVERAGING_KAPPA};

/// Reference values the suite checks against. Kept in one place so a
/// deliberately corrupted copy can demonstrate that the suite fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub tau_opt_inv_e: f64,
    pub r_opt_inv_e: f64,
    pub tau_opt_a1: (f64, f64),
    pub tau_saturation: f64,
    pub small_a_tolerance: f64,
    pub finite_mi_limit: f64,
    pub oscillation_average: f64,
    pub spike_residual: f64,
    pub coding_low_rate: f64,
    pub coding_high_rate: f64,
}

impl Default for Reference {
    fn default() -> Self {
        let inv_e = (-1.0f64).exp();
        Self {
            tau_opt_inv_e: inv_e,
            r_opt_inv_e: (1.0 - inv_e).powi(2),
            tau_opt_a1: (0.43, 0.45),
            tau_saturation: 0.5,
            small_a_tolerance: 0.05,
            finite_mi_limit: -(-0.5f64).exp_m1(),
            oscillation_average: 0.5,
            spike_residual: 1.0,
            coding_low_rate: 0.16,
            coding_high_rate: 0.24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {} ({}) [{:.2}s / {}s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &CriterionOutcome> {
        self.criteria.iter().filter(|c| !c.passed)
    }

    /// 0 when every criterion passed, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }
}

type Check = fn(&Reference) -> Result<String, String>;

pub const CRITERIA: [(u8, &str, f64, Check); 10] = [
    (1, "optimal training at a = 1/e", 1.0, optimum_at_inverse_e),
    (2, "optimal training regimes", 5.0, optimum_regimes),
    (3, "one-shot mutual information", 1.0, one_shot_grid),
    (4, "scaled surface closed form", 1.0, scaled_surface_closed_form),
    (5, "exact oracle equivalence", 10.0, oracle_equivalence),
    (6, "finite-length convergence", 1.0, finite_convergence),
    (7, "Monte Carlo calibration", 30.0, monte_carlo_calibration),
    (8, "coding threshold", 60.0, coding_threshold),
    (9, "counterexample fidelity", 1.0, counterexamples),
    (10, "reproducibility", 60.0, reproducibility),
];

pub fn run_criterion(id: u8, reference: &Reference) -> CriterionOutcome {
    let &(id, title, budget, check) = CRITERIA.iter().find(|c| c.0 == id).expect("criterion ids are 1-10");
    let start = Instant::now();
    let result = check(reference);
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if seconds > budget {
        passed = false;
        detail = format!("{detail}; over the {budget}s budget");
    }
    CriterionOutcome { id, title, passed, detail, seconds, budget_seconds: budget }
}

pub fn run_all(reference: &Reference) -> Report {
    run_with(reference, |_| {})
}

/// Runs every criterion, handing each outcome to `on_result` as it completes.
pub fn run_with(reference: &Reference, mut on_result: impl FnMut(&CriterionOutcome)) -> Report {
    let criteria: Vec<CriterionOutcome> = CRITERIA
        .iter()
        .map(|c| {
            let outcome = run_criterion(c.0, reference);
            on_result(&outcome);
            outcome
        })
        .collect();
    Report { passed: criteria.iter().all(|c| c.passed), criteria }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn xor(a: f64) -> Result<entropy_phase::ValidatedModel, String> {
    ModelSpec::XorRandomChannel { a }.validate().map_err(|e| e.to_string())
}

fn tau(x: f64) -> Result<TrainingFraction, String> {
    TrainingFraction::new(x).map_err(|e| e.to_string())
}

fn optimum_at_inverse_e(r: &Reference) -> Result<String, String> {
    let inv_e = (-1.0f64).exp();
    let opt = optimize_tau(&xor(inv_e)?, 1e-12).map_err(|e| e.to_string())?;
    let (t, rate) = (opt.tau_opt.get(), opt.r_opt);
    let detail = format!("tau_opt = {t:.9}, R_opt = {rate:.12}");
    ensure((t - r.tau_opt_inv_e).abs() <= 1e-6, || format!("{detail}; tau_opt off"))?;
    ensure((rate - r.r_opt_inv_e).abs() <= 1e-9, || format!("{detail}; R_opt off"))?;
    Ok(detail)
}

fn optimum_regimes(r: &Reference) -> Result<String, String> {
    let t = |a: f64| optimize_tau(&xor(a)?, 1e-12).map(|o| o.tau_opt.get()).map_err(|e| e.to_string());
    let (t1, t1000, tsmall) = (t(1.0)?, t(1000.0)?, t(0.001)?);
    let ratio = tsmall / (-0.001 * 0.001f64.ln());
    let detail = format!("tau(1) = {t1:.6}, tau(1000) = {t1000:.6}, tau(0.001)/(-a ln a) = {ratio:.4}");
    ensure((r.tau_opt_a1.0..=r.tau_opt_a1.1).contains(&t1), || format!("{detail}; a = 1 outside range"))?;
    ensure((t1000 - r.tau_saturation).abs() <= 0.01, || format!("{detail}; no saturation"))?;
    ensure((ratio - 1.0).abs() <= r.small_a_tolerance, || format!("{detail}; small-a regime off"))?;
    Ok(detail)
}

fn one_shot_grid(_: &Reference) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for a in [0.1, (-1.0f64).exp(), 1.0, 10.0] {
        let surface = EntropySurface::for_model(&xor(a)?).map_err(|e| e.to_string())?;
        for k in 1..=9 {
            let t = k as f64 / 10.0;
            let mi = one_shot_mutual_information(&surface, tau(t)?).map_err(|e| e.to_string())?;
            worst = worst.max((mi - xor_mutual_information(t, a)).abs());
        }
    }
    let detail = format!("max |I - (1 - e^(-tau/a))| = {worst:.2e} over 36 points");
    ensure(worst <= 1e-6, || detail.clone())?;
    Ok(detail)
}

/// Closed form of the scaled XOR surface in its two branches.
fn xor_scaled_closed_form(a: f64, t: f64, eps: f64, delta: f64) -> f64 {
    let grow = |u: f64| -(a / t) * (-(t / a) * (1.0 + u)).exp_m1();
    if eps <= delta {
        grow(eps)
    } else {
        grow(delta) + (eps - delta)
    }
}

fn scaled_surface_closed_form(_: &Reference) -> Result<String, String> {
    let mut rng = stream_rng(0, &[4]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t: f64 = rng.gen_range(0.01..=1.0);
        let a: f64 = (rng.gen_range(-3.0f64..3.0)).exp();
        let hi = 1.0 / t - 1.0;
        let mut draw = || if hi > 0.0 { rng.gen_range(-0.999..=hi) } else { rng.gen_range(-0.999..=0.0) };
        let (eps, delta) = (draw(), draw());
        let surface = EntropySurface::for_model(&xor(a)?).map_err(|e| e.to_string())?;
        let got = scale_surface(&surface, tau(t)?, eps, delta).map_err(|e| e.to_string())?.value;
        let want = xor_scaled_closed_form(a, t, eps, delta);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    let detail = format!("max relative deviation {worst:.2e} over 1000 tuples");
    ensure(worst <= 1e-12, || detail.clone())?;
    Ok(detail)
}

fn oracle_equivalence(_: &Reference) -> Result<String, String> {
    let mut cells = 0;
    for t in 0..=6 {
        for l in 1..=4 {
            let cfg = XorExactConfig::new(t, t.max(1), l).map_err(|e| e.to_string())?;
            let brute = xor_block_entropy_bruteforce(&cfg).map_err(|e| e.to_string())?;
            let closed = xor_block_entropy(&cfg);
            ensure(brute == closed, || format!("T = {t}, L = {l}: closed {closed} != enumerated {brute}"))?;
            cells += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for t in [1usize, 2, 3, 10, 57, 100, 333, 1000] {
        for l in [1usize, 2, 37, t, 2 * t] {
            let cfg = XorExactConfig::new(t, t.max(l), l.max(1)).map_err(|e| e.to_string())?;
            let terms = (0..t)
                .map(|s| xor_conditional_entropy(s, &cfg, Regime::Diagonal))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            worst = worst.max((neumaier_sum(terms) - xor_block_entropy(&cfg)).abs());
        }
    }
    let detail = format!("{cells} grid cells bit-identical; chain-rule residual {worst:.2e}");
    ensure(worst <= 1e-12, || detail.clone())?;
    Ok(detail)
}

fn finite_convergence(r: &Reference) -> Result<String, String> {
    let mut values = Vec::new();
    for t in [100usize, 1_000, 10_000, 100_000] {
        let cfg = XorExactConfig::from_fraction(t, tau(0.5)?, 1.0).map_err(|e| e.to_string())?;
        values.push(xor_finite_mutual_information(&cfg));
    }
    let gap = (values[3] - r.finite_mi_limit).abs();
    let detail = format!("I(T = 1e5) - limit = {gap:.2e}");
    ensure(gap <= 1e-4, || detail.clone())?;
    ensure(values.windows(2).all(|w| w[1] < w[0]), || format!("{detail}; not decreasing: {values:?}"))?;
    Ok(detail)
}

fn monte_carlo_calibration(_: &Reference) -> Result<String, String> {
    let mut lines = Vec::new();
    for t in [2usize, 1000] {
        let cfg = SimConfig::new(t, tau(0.5)?, 1.0, 100_000, 0).map_err(|e| e.to_string())?;
        let (b, l) = (cfg.blocklength(), cfg.channel_count());
        let exact_cfg = XorExactConfig::new(t, b, l).map_err(|e| e.to_string())?;
        let checks = [
            ("unseen", estimate_unseen_probability(&cfg, t), xor_unseen_probability(t, l)),
            ("distinct", estimate_distinct_channels(&cfg, t), xor_block_entropy(&exact_cfg)),
            ("mi", estimate_data_phase_mi(&cfg), xor_finite_mutual_information(&exact_cfg)),
        ];
        for (name, est, exact) in checks {
            let est = est.map_err(|e| e.to_string())?;
            let z = (est.mean - exact) / est.ci_half_width.max(f64::MIN_POSITIVE) * 3.0;
            ensure(est.covers(exact), || {
                format!("T = {t} {name}: estimate {} +- {} excludes {exact}", est.mean, est.ci_half_width)
            })?;
            lines.push(format!("T={t} {name} z={z:+.2}"));
        }
    }
    Ok(lines.join(", "))
}

fn coding_threshold(r: &Reference) -> Result<String, String> {
    let t = tau(0.443)?;
    let rates = [r.coding_low_rate, 0.18, 0.2, 0.22, r.coding_high_rate];
    let base = CodingConfig::new(1000, t, 1.0, 20, rates[0], 50, 0).map_err(|e| e.to_string())?;
    let results = sweep_rates(&base, &rates).map_err(|e| e.to_string())?;
    let pe: Vec<f64> = results.iter().map(|x| x.empirical_pe).collect();
    let bound = (1.0 - t.get()) * xor_mutual_information(t.get(), 1.0);
    let detail = format!("bound {bound:.4}, pe at R = {rates:?}: {pe:?}");
    ensure(pe[0] <= 0.1, || format!("{detail}; low rate fails too often"))?;
    ensure(pe[pe.len() - 1] >= 0.9, || format!("{detail}; high rate succeeds too often"))?;
    ensure(pe.windows(2).all(|w| w[1] >= w[0]), || format!("{detail}; not monotone"))?;
    Ok(detail)
}

fn counterexamples(r: &Reference) -> Result<String, String> {
    let t_len = 1000;
    let t = tau(0.5)?;
    let osc = ModelSpec::Oscillation.validate().map_err(|e| e.to_string())?;
    let entropies = (0..2 * t_len)
        .map(|i| pedagogical_entropy(&osc, i, t_len).map(|h| (i, h)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let avg = averaged_h_prime(&entropies, t_len, AVERAGING_EPS, AVERAGING_KAPPA).map_err(|e| e.to_string())?;
    ensure(avg == r.oscillation_average, || format!("averaged H' = {avg}"))?;

    let spike = ModelSpec::UnboundedSpike.validate().map_err(|e| e.to_string())?;
    let spike_surface = EntropySurface::for_model(&spike).map_err(|e| e.to_string())?;
    let residual = integral_consistency(&spike_surface, t, 0.0, &spike).map_err(|e| e.to_string())?;
    ensure((residual - r.spike_residual).abs() <= 1e-9, || format!("spike residual {residual}"))?;

    let rep = ModelSpec::Repetition.validate().map_err(|e| e.to_string())?;
    let rep_surface = EntropySurface::for_model(&rep).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..=190 {
        let e = -0.9 + i as f64 / 100.0;
        worst = worst.max(integral_consistency(&rep_surface, t, e, &rep).map_err(|e| e.to_string())?);
    }
    let detail = format!("averaged H' = {avg}, spike residual at 0 = {residual}, repetition max residual {worst:.1e}");
    ensure(worst < 1e-9, || detail.clone())?;
    Ok(detail)
}

/// Command lines covering every data command, sized to run quickly.
pub const REPRODUCIBILITY_RUNS: [&[&str]; 6] = [
    &["analyze", "--model", "xor", "--a", "1", "--tau", "0.5", "--eps", "-0.9:1:96", "--svg", "plot.svg"],
    &["analyze", "--model", "spike", "--tau", "0.4"],
    &["optimize", "--a-list", "0.001,1/e,1,1000"],
    &[
        "simulate",
        "--T",
        "200",
        "--tau",
        "0.5",
        "--a",
        "1",
        "--trials",
        "20000",
        "--seed",
        "7",
        "--quantity",
        "distinct",
    ],
    &[
        "code",
        "--B",
        "300",
        "--tau",
        "0.443",
        "--rate-list",
        "0.12,0.24",
        "--blocks",
        "4",
        "--trials",
        "12",
        "--seed",
        "3",
    ],
    &["examples", "--which", "3", "--T", "400"],
];

fn reproducibility(_: &Reference) -> Result<String, String> {
    for argv in REPRODUCIBILITY_RUNS {
        let cli = Cli::try_parse_from(std::iter::once("entropy-phase").chain(argv.iter().copied()))
            .map_err(|e| e.to_string())?;
        let render = || {
            execute(&cli.command).map(|o| (o.csv.clone(), o.summary_text(), o.svg.clone())).map_err(|e| e.to_string())
        };
        let (first, second) = (render()?, render()?);
        ensure(first == second, || format!("`{}` differs between runs", argv.join(" ")))?;
    }
    Ok(format!("{} command lines byte-identical across reruns", REPRODUCIBILITY_RUNS.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_reference_fails_the_suite() {
        let bad = Reference { r_opt_inv_e: 0.4, ..Reference::default() };
        let outcome = run_criterion(1, &bad);
        assert!(!outcome.passed);
        let report = Report { passed: false, criteria: vec![outcome] };
        assert_eq!(report.exit_code(), 3);
        assert!(run_criterion(1, &Reference::default()).passed);
    }

    #[test]
    fn outcome_line_format() {
        let o =
            CriterionOutcome { id: 3, title: "x", passed: true, detail: "d".into(), seconds: 0.5, budget_seconds: 1.0 };
        assert_eq!(o.to_string(), "criterion  3 PASS x (d) [0.50s / 1s]");
    }
}
