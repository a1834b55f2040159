use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Parser)]
#[command(name = "entropy-phase", version, about = "Entropy phase transitions and one-shot training")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Tabulate entropy curves and their derivatives over a grid of offsets.
    Analyze(AnalyzeArgs),
    /// Optimal training fraction for the XOR model at several channel densities.
    Optimize(OptimizeArgs),
    /// Compare Monte Carlo estimates with exact finite-length values.
    Simulate(SimulateArgs),
    /// Random linear codes over the erasure channel left by one-shot training.
    Code(CodeArgs),
    /// Per-symbol entropies of the pedagogical processes.
    Examples(ExamplesArgs),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

/// Output destinations shared by all data commands.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct OutputArgs {
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// JSON summary destination; the summary goes to stderr when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub json: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Xor,
    Gain,
    Iid,
    Repetition,
    Oscillation,
    Spike,
}

/// `lo:hi:n`, `n` evenly spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let m = (self.n - 1) as f64;
        let scale = self.lo.abs().max(self.hi.abs()).max(1.0);
        (0..self.n)
            .map(|i| {
                let x = (self.lo * (m - i as f64) + self.hi * i as f64) / m;
                if x.abs() < 1e-13 * scale {
                    0.0
                } else {
                    x
                }
            })
            .collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("expected lo:hi:n, got {s:?}"));
    };
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower end {lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper end {hi:?}: {e}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("bad point count {n:?}: {e}"))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && hi <= lo) {
        return Err(format!("grid {s:?} needs n >= 1 and lo < hi"));
    }
    Ok(Grid { lo, hi, n })
}

/// Parses a real number; `e`, `1/e` and `p/q` forms are accepted.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let atom = |t: &str| -> Result<f64, String> {
        match t.trim() {
            "e" => Ok(std::f64::consts::E),
            other => other.parse::<f64>().map_err(|e| format!("bad number {other:?}: {e}")),
        }
    };
    let v = match s.split_once('/') {
        Some((p, q)) => atom(p)? / atom(q)?,
        None => atom(s)?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Xor)]
    pub model: ModelKind,
    /// Channel density of the XOR model, `L = ceil(a B)`.
    #[arg(long, default_value = "1", allow_hyphen_values = true, value_parser = parse_real)]
    pub a: f64,
    /// Entropy rate of the iid model.
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Offset grid `lo:hi:n`; defaults to `-0.9:min(1, 1/tau-1):191`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_grid)]
    pub eps: Option<Grid>,
    /// Also render the four curves to this SVG file.
    #[arg(long)]
    #[serde(skip)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    /// Comma-separated channel densities; `1/e` is accepted.
    #[arg(long, default_value = "0.001,1/e,1,1000", value_delimiter = ',', value_parser = parse_real)]
    pub a_list: Vec<f64>,
    /// Golden-section tolerance on tau.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub io: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// Probability that the next channel was not seen in the first t slots.
    Unseen,
    /// Expected number of distinct channels among the first t slots.
    Distinct,
    /// Mutual information of the first data slot given the training.
    Mi,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Training length.
    #[arg(long = "T", default_value_t = 100)]
    pub training_len: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value = "1", allow_hyphen_values = true, value_parser = parse_real)]
    pub a: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Quantity::Unseen)]
    pub quantity: Quantity,
    /// Comma-separated slots; defaults to ten points up to T.
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CodeArgs {
    /// Blocklength.
    #[arg(long = "B", default_value_t = 1000)]
    pub blocklength: usize,
    #[arg(long, default_value_t = 0.443)]
    pub tau: f64,
    #[arg(long, default_value = "1", allow_hyphen_values = true, value_parser = parse_real)]
    pub a: f64,
    /// Comma-separated rates in message bits per transmission.
    #[arg(long, default_value = "0.16,0.2,0.24", value_delimiter = ',', value_parser = parse_real)]
    pub rate_list: Vec<f64>,
    /// Channel blocks spanned by one codeword.
    #[arg(long, default_value_t = 20)]
    pub blocks: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub io: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExamplesArgs {
    /// 1: iid, 2: repetition, 3: oscillation, 4: unbounded spike.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub which: u8,
    /// Training length of the finite process.
    #[arg(long = "T", default_value_t = 1000)]
    pub training_len: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Entropy rate of the iid process.
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    /// Offset grid `lo:hi:n` for the residual table.
    #[arg(long, default_value = "-0.75:1:8", allow_hyphen_values = true, value_parser = parse_grid)]
    pub eps: Grid,
    #[command(flatten)]
    #[serde(skip)]
    pub io: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    /// Print a machine-readable report instead of text lines.
    #[arg(long)]
    pub json: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:101").unwrap();
        let p = g.points();
        assert_eq!(p.len(), 101);
        assert_eq!((p[0], p[50], p[100]), (0.0, 0.5, 1.0));
        let p = parse_grid("-0.9:1:191").unwrap().points();
        assert_eq!(p[90], 0.0);
        assert_eq!(p[40], -0.5);
        assert_eq!(parse_grid("0.2:0.2:1").unwrap().points(), vec![0.2]);
        assert!(parse_grid("1:0:5").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn real_parsing() {
        use clap::Parser;
        assert_eq!(parse_real("1/e").unwrap(), 1.0 / std::f64::consts::E);
        assert_eq!(parse_real(" 0.25 ").unwrap(), 0.25);
        assert!(parse_real("1/0").is_err());
        let cli = Cli::try_parse_from(["x", "optimize", "--a-list", "0.001,1/e,1"]).unwrap();
        let Command::Optimize(args) = cli.command else { unreachable!() };
        assert_eq!(args.a_list.len(), 3);
        assert!(Cli::try_parse_from(["x", "optimize", "--a-list", "1,,2"]).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
