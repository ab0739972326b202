//! `fbexp`: analytic exponent curves, Monte Carlo simulations, crossover
//! search, and the verification suite, all emitting CSV or plain text.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/parameter error,
//! 3 internal invariant violation (energy ledger).

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use fbexp_core::baseline::BaselineScheme;
use fbexp_core::channel::ChannelSpec;
use fbexp_core::exponents::{
    crossover_alpha, emit_curves, linear_exponent, two_stage_exponent_at_alpha,
};
use fbexp_core::linear::{LinearParams, LinearScheme};
use fbexp_core::montecarlo::{fit_exponent, run_batch, ErrorEstimate, Scheme, RESULT_CSV_HEADER};
use fbexp_core::two_stage::{TwoStageParams, TwoStageScheme};
use fbexp_core::{acceptance, fmt_g17, Error};

#[derive(Parser)]
#[command(name = "fbexp", version, about = "Noisy-feedback coding laboratory")]
struct Cli {
    /// Worker threads for simulation batches (default: all cores).
    /// Results are identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the analytic exponent-vs-alpha table for all schemes as CSV
    Exponents(ExponentsArgs),
    /// Run a Monte Carlo batch and emit an error-rate CSV row per block length
    Simulate(SimulateArgs),
    /// Locate the alpha where the linear and two-stage curves cross
    Crossover(CrossoverArgs),
    /// Run the verification suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ExponentsArgs {
    /// Number of messages
    #[arg(long, visible_alias = "M", default_value_t = 3)]
    m: usize,

    /// Average power constraint
    #[arg(long, visible_alias = "P", default_value_t = 1.0)]
    p: f64,

    /// Alpha grid as start:end:count (inclusive endpoints)
    #[arg(long, default_value = "0:0.25:51")]
    alpha_grid: String,

    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeKind {
    Baseline,
    TwoStage,
    Linear,
}

#[derive(Args)]
struct SimulateArgs {
    /// Coding scheme to simulate
    #[arg(long, value_enum)]
    scheme: Option<SchemeKind>,

    /// Number of messages
    #[arg(long, visible_alias = "M")]
    m: Option<usize>,

    /// Average power constraint
    #[arg(long, visible_alias = "P")]
    p: Option<f64>,

    /// Block length (with the default P = 1 this is the energy budget nP)
    #[arg(long, visible_alias = "nP")]
    n: Option<u64>,

    /// Comma-separated block lengths; fits an exponent across them
    #[arg(long, conflicts_with = "n")]
    n_grid: Option<String>,

    /// Feedback noise variance
    #[arg(long)]
    alpha: Option<f64>,

    /// Monte Carlo trials per block length
    #[arg(long)]
    trials: Option<u64>,

    /// Run seed (flag wins over the environment variable)
    #[arg(long, env = "FBEXP_SEED")]
    seed: Option<u64>,

    /// Stage-1 energy fraction override (two-stage and linear schemes)
    #[arg(long)]
    lambda: Option<f64>,

    /// Protection margin override (two-stage scheme)
    #[arg(long)]
    s: Option<f64>,

    /// Amplification override (linear scheme)
    #[arg(long)]
    delta: Option<f64>,

    /// JSON config with the same fields; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

/// JSON mirror of the simulate flags.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    scheme: Option<SchemeKind>,
    m: Option<usize>,
    p: Option<f64>,
    n: Option<u64>,
    n_grid: Option<String>,
    alpha: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    lambda: Option<f64>,
    s: Option<f64>,
    delta: Option<f64>,
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CrossoverArgs {
    /// Number of messages
    #[arg(long, visible_alias = "M", default_value_t = 3)]
    m: usize,

    /// Average power constraint
    #[arg(long, visible_alias = "P", default_value_t = 1.0)]
    p: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only the sub-minute subset
    #[arg(long)]
    quick: bool,
}

/// Errors mapped to process exit codes.
enum CliError {
    /// Exit 2: bad flags or parameter domain violations.
    Usage(String),
    /// Exit 3: an internal invariant (the energy ledger) was violated.
    Internal(String),
    /// Exit 1: verification criteria failed.
    VerifyFailed(usize),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { .. } => CliError::Internal(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: cannot configure {workers} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Exponents(args) => cmd_exponents(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Crossover(args) => cmd_crossover(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::VerifyFailed(count)) => {
            eprintln!("error: {count} verification criteria failed");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn write_output(output: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Usage(format!("cannot write stdout: {e}")))
        }
    }
}

/// Parses "start:end:count" into an inclusive linear grid.
fn parse_linear_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad grid '{text}': expected start:end:count"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let end: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    // `!(end > start)` rather than `end <= start` so NaN endpoints are rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if count < 2 || !(end > start) {
        return Err(bad());
    }
    let step = (end - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                end
            } else {
                start + i as f64 * step
            }
        })
        .collect())
}

fn cmd_exponents(args: ExponentsArgs) -> Result<(), CliError> {
    let grid = parse_linear_grid(&args.alpha_grid)?;
    let table = emit_curves(args.m, args.p, &grid)?;
    write_output(args.output.as_ref(), &table.to_csv())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg: SimulateConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
        }
        None => SimulateConfig::default(),
    };

    // explicit flags win over the config file, which wins over defaults
    let scheme_kind = args
        .scheme
        .or(cfg.scheme)
        .ok_or_else(|| CliError::Usage("--scheme is required".into()))?;
    let m = args.m.or(cfg.m).unwrap_or(3);
    let p = args.p.or(cfg.p).unwrap_or(1.0);
    let alpha = args.alpha.or(cfg.alpha).unwrap_or(0.0);
    let trials = args.trials.or(cfg.trials).unwrap_or(100_000);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let lambda = args.lambda.or(cfg.lambda);
    let s = args.s.or(cfg.s);
    let delta = args.delta.or(cfg.delta);
    let output = args.output.or(cfg.output);

    let n_grid_text = args.n_grid.or(cfg.n_grid);
    let ns: Vec<u64> = if let Some(text) = &n_grid_text {
        text.split(',')
            .map(|part| {
                part.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("bad block length '{part}'")))
            })
            .collect::<Result<_, _>>()?
    } else {
        vec![args
            .n
            .or(cfg.n)
            .ok_or_else(|| CliError::Usage("--n (or --n-grid) is required".into()))?]
    };
    if ns.is_empty() {
        return Err(CliError::Usage("empty block-length grid".into()));
    }

    let mut csv = String::from(RESULT_CSV_HEADER);
    csv.push('\n');
    let mut points: Vec<(u64, ErrorEstimate)> = Vec::new();
    for &n in &ns {
        let spec = ChannelSpec::new(p, n, alpha)?;
        let est = match scheme_kind {
            SchemeKind::Baseline => {
                let scheme = BaselineScheme::new(m, &spec)?;
                let est = run_batch(&scheme, &spec, trials, seed)?;
                csv.push_str(&est.csv_row(scheme.label(), &spec, m, seed));
                est
            }
            SchemeKind::TwoStage => {
                let params = match (lambda, s) {
                    (Some(l), Some(sv)) => TwoStageParams::new(m, l, sv)?,
                    (l_over, s_over) => {
                        let base = TwoStageParams::optimal_for_alpha(m, p, alpha)?;
                        TwoStageParams::new(
                            m,
                            l_over.unwrap_or(base.lambda),
                            s_over.unwrap_or(base.s),
                        )?
                    }
                };
                let scheme = TwoStageScheme::new(params, &spec)?;
                let est = run_batch(&scheme, &spec, trials, seed)?;
                csv.push_str(&est.csv_row(scheme.label(), &spec, m, seed));
                est
            }
            SchemeKind::Linear => {
                let mut params = if alpha > 0.0 {
                    LinearParams::noisy_schedule(m, n, p, alpha)?
                } else {
                    LinearParams::noise_free_schedule(m, n, p)?
                };
                if let Some(d) = delta {
                    params.delta = d;
                }
                if let Some(l) = lambda {
                    params.amplitude = (l * spec.budget()).sqrt();
                }
                let scheme = LinearScheme::new(params, &spec)?;
                let est = run_batch(&scheme, &spec, trials, seed)?;
                csv.push_str(&est.csv_row(scheme.label(), &spec, m, seed));
                est
            }
        };
        csv.push('\n');
        points.push((n, est));
    }

    if ns.len() > 1 {
        match fit_exponent(&points) {
            Ok(fit) => {
                eprintln!(
                    "fit: slope={} stderr={} intercept={} dropped_zero_error={:?}",
                    fmt_g17(fit.slope),
                    fmt_g17(fit.stderr),
                    fmt_g17(fit.intercept),
                    fit.dropped_zero_error
                );
            }
            Err(e) => eprintln!("fit: unavailable ({e})"),
        }
    }
    write_output(output.as_ref(), &csv)
}

fn cmd_crossover(args: CrossoverArgs) -> Result<(), CliError> {
    if args.m < 3 {
        return Err(CliError::Usage(format!("M = {} < 3", args.m)));
    }
    let mut out = String::new();
    for (label, use_weak) in [("strong", false), ("weak", true)] {
        match crossover_alpha(args.m, args.p, use_weak) {
            Ok(c) => out.push_str(&format!(
                "crossover_alpha={} expression={label} exponent={}\n",
                fmt_g17(c.alpha),
                fmt_g17(c.exponent)
            )),
            Err(Error::NoCrossover) => out.push_str(&format!(
                "no crossover for the {label} expression: the curves do not intersect \
                 on (0, 1/4) for M={}, P={}\n",
                args.m, args.p
            )),
            Err(e) => return Err(e.into()),
        }
    }
    out.push_str("reference_annotation=5.6e-3 (M=3 comparison plot)\n");
    for &probe in &[1e-4, 1e-1] {
        let lin = linear_exponent(args.m, args.p, probe).exponent;
        let ts = two_stage_exponent_at_alpha(args.m, args.p, probe)?.exponent;
        out.push_str(&format!(
            "probe alpha={probe:e}: linear={} two_stage={} better={}\n",
            fmt_g17(lin),
            fmt_g17(ts),
            if lin > ts { "linear" } else { "two_stage" }
        ));
    }
    write_output(None, &out)
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let reports = acceptance::run(args.quick);
    let mut failures = 0;
    for r in &reports {
        println!(
            "criterion {:>2} [{}] {} — {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        Err(CliError::VerifyFailed(failures))
    } else {
        Ok(())
    }
}
