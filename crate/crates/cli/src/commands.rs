//! Command implementations. Each command renders its outputs into memory so
//! reruns can be compared byte for byte before anything touches disk.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use entropy_phase::analytic::{
    asymptotic_tau_reference, averaged_h_prime, h_prime_data, h_prime_diag, integral_consistency, lower_bound_rate,
    optimize_tau, phase_curves,
};
use entropy_phase::coding::{sweep_rates, CodingConfig};
use entropy_phase::montecarlo::{
    estimate_data_phase_mi, estimate_distinct_curve, estimate_unseen_curve, Estimate, MIN_TRIALS_FOR_CI,
};
use entropy_phase::oracle::{
    limiting_h_prime, pedagogical_entropy, xor_block_entropy, xor_finite_mutual_information, xor_unseen_probability,
    XorExactConfig,
};
use entropy_phase::{EntropySurface, Error, GainSource, ModelSpec, SimConfig, TrainingFraction, ValidatedModel};
use serde_json::{json, Value};
use thiserror::Error;

use crate::args::{
    AnalyzeArgs, CodeArgs, Command, ExamplesArgs, Grid, ModelKind, OptimizeArgs, OutputArgs, Quantity, SimulateArgs,
};
use crate::format::{num, Table};
use crate::manifest::RunManifest;
use crate::svg::{Marker, Plot, Series};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("calibration failure: {0}")]
    Calibration(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Calibration(_) => 2,
            CliError::Model(e) => match e {
                Error::InvalidParameter(_)
                | Error::OffsetOutOfRange { .. }
                | Error::ScaledFractionOutOfRange { .. }
                | Error::RateExceedsSlotBudget { .. }
                | Error::EnumerationTooLarge { .. }
                | Error::NoGains => 1,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Everything a command produces.
#[derive(Debug, Clone)]
pub struct Output {
    pub csv: String,
    pub summary: Option<Value>,
    pub svg: Option<String>,
    pub manifest: RunManifest,
    /// Failure detected after the outputs were computed; the outputs are
    /// still written before exiting with its code.
    pub deferred: Option<String>,
}

impl Output {
    pub fn summary_text(&self) -> Option<String> {
        self.summary.as_ref().map(|v| serde_json::to_string_pretty(v).expect("json values serialize") + "\n")
    }
}

/// Runs a data command. `selftest` is handled by the binary.
pub fn execute(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Analyze(a) => analyze(a),
        Command::Optimize(a) => optimize(a),
        Command::Simulate(a) => simulate(a),
        Command::Code(a) => code(a),
        Command::Examples(a) => examples(a),
        Command::Selftest(_) => Err(CliError::Usage("selftest produces no data outputs".into())),
    }
}

fn output_args(cmd: &Command) -> Option<&OutputArgs> {
    match cmd {
        Command::Analyze(a) => Some(&a.io),
        Command::Optimize(a) => Some(&a.io),
        Command::Simulate(a) => Some(&a.io),
        Command::Code(a) => Some(&a.io),
        Command::Examples(a) => Some(&a.io),
        Command::Selftest(_) => None,
    }
}

/// Writes the outputs of `cmd` to their destinations. When the CSV goes to a
/// file, a sidecar `<out>.manifest.json` with a timestamped manifest is
/// written next to it.
pub fn write_outputs(cmd: &Command, output: &Output) -> CliResult<()> {
    let io = output_args(cmd).cloned().unwrap_or_default();
    match &io.out {
        Some(path) => {
            fs::write(path, &output.csv)?;
            let sidecar = sidecar_path(path);
            let stamped =
                serde_json::to_string_pretty(&output.manifest.clone().stamped()).expect("manifest serializes");
            fs::write(sidecar, stamped + "\n")?;
        }
        None => std::io::stdout().write_all(output.csv.as_bytes())?,
    }
    if let Some(text) = output.summary_text() {
        match &io.json {
            Some(path) => fs::write(path, text)?,
            None => std::io::stderr().write_all(text.as_bytes())?,
        }
    }
    if let (Command::Analyze(AnalyzeArgs { svg: Some(path), .. }), Some(svg)) = (cmd, &output.svg) {
        fs::write(path, svg)?;
    }
    Ok(())
}

pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn manifest_json(m: &RunManifest) -> Value {
    serde_json::to_value(m).expect("manifest serializes")
}

fn model_spec(kind: ModelKind, a: f64, h: f64) -> ModelSpec {
    match kind {
        ModelKind::Xor => ModelSpec::XorRandomChannel { a },
        ModelKind::Gain => ModelSpec::ScalarGainChannel { gains: GainSource::standard_normal() },
        ModelKind::Iid => ModelSpec::StationaryIid { h },
        ModelKind::Repetition => ModelSpec::Repetition,
        ModelKind::Oscillation => ModelSpec::Oscillation,
        ModelKind::Spike => ModelSpec::UnboundedSpike,
    }
}

fn analyze(args: &AnalyzeArgs) -> CliResult<Output> {
    let tau = TrainingFraction::new(args.tau)?;
    let model = model_spec(args.model, args.a, args.h).validate()?;
    let surface = EntropySurface::for_model(&model)?;
    let grid = args.eps.unwrap_or(Grid { lo: -0.9, hi: tau.max_offset().min(1.0), n: 191 });
    if grid.n > 1 && grid.hi <= grid.lo {
        return Err(CliError::Usage(format!("offset grid {grid} is empty for tau = {}", args.tau)));
    }
    let eps = grid.points();
    let curves = phase_curves(&surface, tau, &eps)?;

    let mut table = Table::new(&["eps", "h_data", "h_diag", "hprime_data", "hprime_diag"]);
    for i in 0..eps.len() {
        table.row(&[
            num(eps[i]),
            num(curves.h_data[i]),
            num(curves.h_diag[i]),
            num(curves.hprime_data[i]),
            num(curves.hprime_diag[i]),
        ]);
    }

    let rate = lower_bound_rate(&surface, tau)?;
    let (tau_opt, r_opt) = match model.spec() {
        ModelSpec::XorRandomChannel { .. } => {
            let opt = optimize_tau(&model, 1e-10)?;
            (Some(opt.tau_opt.get()), Some(opt.r_opt))
        }
        _ => (None, None),
    };
    // jump of the right derivatives at the boundary, read off directly
    let phase_gap = if tau.get() < 1.0 {
        let right = |r: entropy_phase::Result<f64>| match r {
            Err(Error::NonDifferentiable { right, .. }) => Ok(right),
            other => other,
        };
        Some(right(h_prime_data(&surface, tau, 0.0))? - right(h_prime_diag(&surface, tau, 0.0))?)
    } else {
        None
    };
    let manifest = RunManifest::new("analyze", args, args.io.seed);
    let summary = json!({
        "model": model.spec().name(),
        "tau": tau.get(),
        "a": model.xor_density(),
        "mutual_info": curves.mutual_info,
        "lower_bound_rate": rate,
        "tau_opt": tau_opt,
        "r_opt": r_opt,
        "phase_gap": phase_gap,
        "manifest": manifest_json(&manifest),
    });

    let svg = args.svg.as_ref().map(|_| {
        let col = |v: &[f64]| eps.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        let mut markers: Vec<Marker> =
            surface.kinks().iter().map(|&k| Marker { x: k, label: format!("kink {k}"), y_range: None }).collect();
        if let Some(gap) = phase_gap {
            let top = curves.hprime_data[0..].iter().zip(&eps).find(|(_, &e)| e >= 0.0).map(|(v, _)| *v);
            if let Some(top) = top {
                markers.push(Marker {
                    x: 0.0,
                    label: format!("I = {:.6}", curves.mutual_info),
                    y_range: Some((top - gap, top)),
                });
            }
        }
        Plot {
            title: format!("{} model, tau = {}", model.spec().name(), num(tau.get())),
            x_label: "eps".into(),
            series: vec![
                Series { name: "H(Y_eps | X)".into(), points: col(&curves.h_data) },
                Series { name: "H(Y_eps | X_eps)".into(), points: col(&curves.h_diag) },
                Series { name: "H'(Y_eps | X)".into(), points: col(&curves.hprime_data) },
                Series { name: "H'(Y_eps | X_eps)".into(), points: col(&curves.hprime_diag) },
            ],
            markers,
        }
        .render()
    });

    Ok(Output { csv: table.finish(), summary: Some(summary), svg, manifest, deferred: None })
}

fn optimize(args: &OptimizeArgs) -> CliResult<Output> {
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::Usage("tolerance must be positive".into()));
    }
    let mut table = Table::new(&["a", "tau_opt", "r_opt", "i_at_opt", "tau_asymptotic"]);
    let mut rows = Vec::new();
    for &a in &args.a_list {
        let model = ModelSpec::XorRandomChannel { a }.validate()?;
        let opt = optimize_tau(&model, args.tol)?;
        let reference = asymptotic_tau_reference(a);
        table.row(&[
            num(a),
            num(opt.tau_opt.get()),
            num(opt.r_opt),
            num(opt.i_at_opt),
            reference.map(num).unwrap_or_default(),
        ]);
        rows.push(json!({
            "a": a,
            "tau_opt": opt.tau_opt.get(),
            "r_opt": opt.r_opt,
            "i_at_opt": opt.i_at_opt,
            "tau_asymptotic": reference,
        }));
    }
    let manifest = RunManifest::new("optimize", args, args.io.seed);
    let summary = json!({ "model": "xor", "rows": rows, "manifest": manifest_json(&manifest) });
    Ok(Output { csv: table.finish(), summary: Some(summary), svg: None, manifest, deferred: None })
}

/// Share of rows whose estimate may sit outside its 3-sigma interval before
/// the run is declared miscalibrated; no single row may miss by more than
/// twice its half width.
const CALIBRATION_MISS_SHARE: f64 = 0.05;

fn default_slots(t: usize, count: usize) -> Vec<usize> {
    let m = count.min(t.max(1));
    let mut v: Vec<usize> = (1..=m).map(|k| (k * t).div_ceil(m)).collect();
    v.dedup();
    v
}

fn simulate(args: &SimulateArgs) -> CliResult<Output> {
    let tau = TrainingFraction::new(args.tau)?;
    let cfg = SimConfig::new(args.training_len, tau, args.a, args.trials, args.io.seed)?;
    let (b, l) = (cfg.blocklength(), cfg.channel_count());
    if args.trials < MIN_TRIALS_FOR_CI {
        log::warn!(
            "{} trials is below {MIN_TRIALS_FOR_CI}; the normal-approximation interval may be unreliable",
            args.trials
        );
    }
    let (ts, exact, estimates): (Vec<usize>, Vec<f64>, Vec<Estimate>) = match args.quantity {
        Quantity::Unseen => {
            let ts = args
                .t_list
                .clone()
                .unwrap_or_else(|| default_slots(cfg.training_len, 10).into_iter().map(|t| t.min(b - 1)).collect());
            let exact = ts.iter().map(|&t| xor_unseen_probability(t, l)).collect();
            let est = estimate_unseen_curve(&cfg, &ts)?;
            (ts, exact, est)
        }
        Quantity::Distinct => {
            let ts = args.t_list.clone().unwrap_or_else(|| default_slots(cfg.training_len, 10));
            let mut exact = Vec::with_capacity(ts.len());
            for &t in &ts {
                exact.push(xor_block_entropy(&XorExactConfig::new(t.min(b), b, l)?));
            }
            let est = estimate_distinct_curve(&cfg, &ts)?;
            (ts, exact, est)
        }
        Quantity::Mi => {
            if args.t_list.is_some() {
                return Err(CliError::Usage("--t-list does not apply to the mutual information".into()));
            }
            let exact = xor_finite_mutual_information(&XorExactConfig::new(cfg.training_len, b, l)?);
            (vec![cfg.training_len], vec![exact], vec![estimate_data_phase_mi(&cfg)?])
        }
    };

    let mut table = Table::new(&["t", "exact", "estimate", "ci_low", "ci_high"]);
    let mut misses = 0usize;
    let mut worst: f64 = 0.0;
    for ((t, x), e) in ts.iter().zip(&exact).zip(&estimates) {
        table.row(&[t.to_string(), num(*x), num(e.mean), num(e.ci_low()), num(e.ci_high())]);
        if !e.covers(*x) {
            misses += 1;
            let excess = (e.mean - x).abs() / e.ci_half_width.max(f64::MIN_POSITIVE);
            worst = worst.max(excess);
        }
    }
    let deferred = (worst > 2.0 || misses as f64 > CALIBRATION_MISS_SHARE * ts.len() as f64).then(|| {
        format!("{misses} of {} estimates miss their exact value (worst by {worst:.2} half widths)", ts.len())
    });
    let manifest = RunManifest::new("simulate", args, args.io.seed);
    let summary = json!({
        "model": "xor",
        "tau": tau.get(),
        "a": args.a,
        "blocklength": b,
        "channels": l,
        "quantity": args.quantity,
        "rows": ts.len(),
        "misses": misses,
        "manifest": manifest_json(&manifest),
    });
    Ok(Output { csv: table.finish(), summary: Some(summary), svg: None, manifest, deferred })
}

fn code(args: &CodeArgs) -> CliResult<Output> {
    let tau = TrainingFraction::new(args.tau)?;
    let first = *args.rate_list.first().ok_or_else(|| CliError::Usage("no rates given".into()))?;
    for &r in &args.rate_list {
        if r > 1.0 - tau.get() {
            return Err(CliError::Usage(format!("rate {r} exceeds 1 - tau = {}", 1.0 - tau.get())));
        }
    }
    let base = CodingConfig::new(args.blocklength, tau, args.a, args.blocks, first, args.trials, args.io.seed)?;
    let results = sweep_rates(&base, &args.rate_list)?;
    let mut table = Table::new(&["R", "trials", "errors", "pe", "capacity_estimate"]);
    for r in &results {
        table.row(&[
            num(r.rate),
            r.trials.to_string(),
            r.errors.to_string(),
            num(r.empirical_pe),
            num(r.capacity_estimate),
        ]);
    }
    let manifest = RunManifest::new("code", args, args.io.seed);
    let bound = (1.0 - tau.get()) * -(-tau.get() / args.a).exp_m1();
    let summary = json!({
        "model": "xor",
        "tau": tau.get(),
        "a": args.a,
        "lower_bound_rate": bound,
        "results": results,
        "manifest": manifest_json(&manifest),
    });
    Ok(Output { csv: table.finish(), summary: Some(summary), svg: None, manifest, deferred: None })
}

/// Window used to average per-symbol entropies that have no limit.
pub const AVERAGING_EPS: f64 = 0.5;
pub const AVERAGING_KAPPA: f64 = 0.1;

fn example_model(which: u8, h: f64) -> CliResult<ValidatedModel> {
    let spec = match which {
        1 => ModelSpec::StationaryIid { h },
        2 => ModelSpec::Repetition,
        3 => ModelSpec::Oscillation,
        4 => ModelSpec::UnboundedSpike,
        other => return Err(CliError::Usage(format!("unknown example {other}; choose 1-4"))),
    };
    Ok(spec.validate()?)
}

fn examples(args: &ExamplesArgs) -> CliResult<Output> {
    let model = example_model(args.which, args.h)?;
    let tau = TrainingFraction::new(args.tau)?;
    let surface = EntropySurface::for_model(&model)?;
    let t_len = args.training_len;
    let span = 2 * t_len;
    let mut entropies = Vec::with_capacity(span);
    let mut table = Table::new(&["t", "entropy"]);
    for t in 0..span {
        let h = pedagogical_entropy(&model, t, t_len)?;
        entropies.push((t, h));
        table.row(&[t.to_string(), num(h)]);
    }

    let eps = args.eps.points();
    let mut rows = Vec::with_capacity(eps.len());
    let mut max_residual: f64 = 0.0;
    for &e in &eps {
        let residual = integral_consistency(&surface, tau, e, &model)?;
        max_residual = max_residual.max(residual);
        let limit = limiting_h_prime(&model, e)?;
        // finite-length normalized entropy of the first ceil((1+eps)T) symbols
        let n = ((1.0 + e) * t_len as f64).ceil().max(0.0) as usize;
        let finite = entropies.iter().take(n).map(|p| p.1).sum::<f64>() / t_len as f64;
        rows.push(json!({
            "eps": e,
            "h_surface": surface.eval(tau.get(), e),
            "h_finite": if n <= span { Some(finite) } else { None },
            "hprime": if limit.averaged { None } else { Some(limit.value) },
            "residual": residual,
        }));
    }
    let averaged = averaged_h_prime(&entropies, t_len, AVERAGING_EPS, AVERAGING_KAPPA)?;
    let residual_at_zero = integral_consistency(&surface, tau, 0.0, &model)?;
    let hprime_exists = !limiting_h_prime(&model, AVERAGING_EPS)?.averaged;
    let manifest = RunManifest::new("examples", args, args.io.seed);
    let summary = json!({
        "example": args.which,
        "model": model.spec().name(),
        "T": t_len,
        "tau": tau.get(),
        "hprime_status": if hprime_exists { "exists" } else { "does not exist" },
        "averaged_hprime": averaged,
        "averaging": { "eps": AVERAGING_EPS, "kappa": AVERAGING_KAPPA },
        "residual_at_zero": residual_at_zero,
        "max_residual": max_residual,
        "grid": rows,
        "manifest": manifest_json(&manifest),
    });
    Ok(Output { csv: table.finish(), summary: Some(summary), svg: None, manifest, deferred: None })
}
