//! `schedcert`: lower bounds, monotonicity audits and adversary games for
//! truthful scheduling on unrelated machines.
//!
//! Exit codes: 0 certified/clean, 1 checks failed (audit witnesses, invalid
//! certificate), 2 invalid input, 3 internal or budget failure.

mod output;
mod registry;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use schedcert_core::adversary::{
    guaranteed_ratio, run_game_with_budget, verify_certificate, Certificate, GameError, Outcome,
};
use schedcert_core::bounds::{
    game_params_with_delta, limit_bound, sequence_report, solve_an1, solve_an2,
    DEFAULT_BOUNDARY_DELTA,
};
use schedcert_core::instances::{GameParams, DEFAULT_NODE_BUDGET};
use schedcert_core::mechanisms::Mechanism;
use schedcert_core::truthfulness::{
    audit_mechanism, random_pairs, row_scaling_pairs, single_entry_pairs, structured_pairs,
    DeviationPair, GeneratorKind, DEFAULT_WITNESS_TOL,
};

use output::{render_audit, render_bound_rows, render_limit, AuditReport, BoundRow, Format, LimitReport};

/// Ratio slack accepted when deciding whether a game reached its target.
const RATIO_TOLERANCE: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "schedcert",
    version,
    about = "Lower-bound certification for deterministic truthful scheduling on unrelated machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the bound rho(n), its limit, or the whole table.
    Bounds(BoundsArgs),
    /// Shorthand for `bounds --table <N_MAX>`.
    Table {
        n_max: usize,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Play the lower-bound game against a mechanism and emit a certificate.
    Adversary(AdversaryArgs),
    /// Audit a mechanism for weak-monotonicity violations.
    Audit(AuditArgs),
    /// Re-check a previously emitted certificate.
    Verify { certificate: PathBuf },
}

#[derive(Args)]
struct IoArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Machine count for a single bound (n >= 3).
    #[arg(long, conflicts_with_all = ["limit", "table"])]
    n: Option<usize>,
    /// The bound for unboundedly many machines.
    #[arg(long, conflicts_with = "table")]
    limit: bool,
    /// Tabulate bounds for n = 3..=N_MAX (N_MAX >= 6).
    #[arg(long, value_name = "N_MAX")]
    table: Option<usize>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct AdversaryArgs {
    /// Built-in mechanism to play against.
    #[arg(long, conflicts_with = "script")]
    mechanism: Option<String>,
    /// JSON script file with digest-keyed responses.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Machine count (n >= 3).
    #[arg(long)]
    n: usize,
    /// Override the fallback price r (requires --a).
    #[arg(long, requires = "a")]
    r: Option<f64>,
    /// Override the discount factor a (requires --r).
    #[arg(long, requires = "r")]
    a: Option<f64>,
    /// Override the pinning perturbation magnitude.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Boundary shift applied to the default r for n >= 6.
    #[arg(long)]
    delta: Option<f64>,
    /// Override the finite surrogate for unbounded entries.
    #[arg(long = "big-m")]
    big_m: Option<f64>,
    /// Node allowance for exact-optimum searches.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: u64,
    /// Where to write the certificate.
    #[arg(long, default_value = "certificate.json")]
    emit_certificate: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum GeneratorArg {
    Random,
    Structured,
    SingleEntry,
    RowScaling,
}

impl GeneratorArg {
    fn kind(self) -> GeneratorKind {
        match self {
            GeneratorArg::Random => GeneratorKind::Random,
            GeneratorArg::Structured => GeneratorKind::Structured,
            GeneratorArg::SingleEntry => GeneratorKind::SingleEntry,
            GeneratorArg::RowScaling => GeneratorKind::RowScaling,
        }
    }
}

#[derive(Args)]
struct AuditArgs {
    /// Mechanism to audit.
    #[arg(long)]
    mechanism: String,
    /// Deviation family to test.
    #[arg(long, value_enum, default_value = "random")]
    generator: GeneratorArg,
    /// Number of random pairs to draw (random generator only).
    #[arg(long, default_value_t = 500)]
    pairs: usize,
    /// Seed for the random generator.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Machine count.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Task count for random instances; defaults to n + 1.
    #[arg(long)]
    m: Option<usize>,
    /// Witness tolerance; positive values at or below it count as
    /// inconclusive.
    #[arg(long, default_value_t = DEFAULT_WITNESS_TOL)]
    tol: f64,
    #[command(flatten)]
    io: IoArgs,
}

/// An error paired with the process exit code it should produce.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn input_error(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn internal_error(error: anyhow::Error) -> Failure {
    Failure { code: 3, error }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> CliResult<u8> {
    match command {
        Command::Bounds(args) => cmd_bounds(args),
        Command::Table { n_max, io } => cmd_bounds(BoundsArgs {
            n: None,
            limit: false,
            table: Some(n_max),
            io,
        }),
        Command::Adversary(args) => cmd_adversary(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Verify { certificate } => cmd_verify(&certificate),
    }
}

fn cmd_bounds(args: BoundsArgs) -> CliResult<u8> {
    let rho_limit = limit_bound();
    let report = if args.limit {
        let residual = (rho_limit - 1.0) * (rho_limit - 2.0) * (rho_limit - 2.0) - 1.0;
        render_limit(
            &LimitReport {
                rho_limit,
                residual,
            },
            args.io.format,
        )
        .map_err(internal_error)?
    } else if let Some(n_max) = args.table {
        let rows = sequence_report(n_max).map_err(|e| input_error(anyhow!("{e}")))?;
        let rows: Vec<BoundRow> = rows
            .iter()
            .map(|row| BoundRow::from_sequence(row, rho_limit))
            .collect();
        render_bound_rows(&rows, args.io.format).map_err(internal_error)?
    } else if let Some(n) = args.n {
        let sol = schedcert_core::bounds::analytic_bound(n)
            .map_err(|e| input_error(anyhow!("{e}")))?;
        let row = BoundRow {
            n,
            a_n1: solve_an1(n).map_err(|e| input_error(anyhow!("{e}")))?,
            a_n2: solve_an2(n).map_err(|e| input_error(anyhow!("{e}")))?,
            branch: sol.branch,
            r: sol.r,
            rho: sol.rho,
            rho_limit,
        };
        render_bound_rows(&[row], args.io.format).map_err(internal_error)?
    } else {
        return Err(input_error(anyhow!(
            "choose one of --n <N>, --limit, or --table <N_MAX>"
        )));
    };
    emit(&args.io, &report)?;
    Ok(0)
}

fn build_params(args: &AdversaryArgs) -> CliResult<GameParams> {
    let base = match (args.r, args.a) {
        (Some(r), Some(a)) => {
            GameParams::new(args.n, r, a).map_err(|e| input_error(anyhow!("{e}")))?
        }
        _ => {
            let delta = args.delta.unwrap_or(DEFAULT_BOUNDARY_DELTA);
            game_params_with_delta(args.n, delta).map_err(|e| input_error(anyhow!("{e}")))?
        }
    };
    let base = match args.epsilon {
        Some(eps) => base
            .with_epsilon(eps)
            .map_err(|e| input_error(anyhow!("{e}")))?,
        None => base,
    };
    match args.big_m {
        Some(big_m) => base
            .with_big_m(big_m)
            .map_err(|e| input_error(anyhow!("{e}"))),
        None => Ok(base),
    }
}

fn cmd_adversary(args: AdversaryArgs) -> CliResult<u8> {
    let params = build_params(&args)?;
    let mechanism: Box<dyn Mechanism> = match (&args.mechanism, &args.script) {
        (Some(name), None) => registry::resolve(name).map_err(input_error)?,
        (None, Some(path)) => Box::new(registry::load_script(path).map_err(input_error)?),
        _ => {
            return Err(input_error(anyhow!(
                "choose exactly one of --mechanism or --script"
            )))
        }
    };

    let certificate = run_game_with_budget(mechanism.as_ref(), &params, args.node_budget)
        .map_err(|e| match e {
            GameError::Params(_)
            | GameError::Build(_)
            | GameError::Oracle { .. }
            | GameError::Infeasible { .. } => input_error(anyhow!("{e}")),
            GameError::Search(_) | GameError::Internal { .. } => internal_error(anyhow!("{e}")),
        })?;

    let verification = verify_certificate(&certificate);
    if !verification.valid {
        return Err(internal_error(anyhow!(
            "self-verification failed: {}",
            verification.failures.join("; ")
        )));
    }

    let path = out_path(&args.emit_certificate);
    let json =
        serde_json::to_string_pretty(&certificate).map_err(|e| internal_error(e.into()))?;
    fs::write(&path, json.as_bytes())
        .with_context(|| format!("cannot write certificate to {}", path.display()))
        .map_err(internal_error)?;

    println!("{}", summary_line(&certificate, &path));

    match &certificate.outcome {
        Outcome::RatioAtLeast { value, .. } => {
            let target = guaranteed_ratio(&params) - RATIO_TOLERANCE;
            if *value >= target {
                Ok(0)
            } else {
                Err(internal_error(anyhow!(
                    "certified ratio {value} fell below the guaranteed target {target}"
                )))
            }
        }
        Outcome::TruthfulnessViolation { .. } | Outcome::UnboundedRatio { .. } => Ok(0),
    }
}

fn summary_line(certificate: &Certificate, path: &Path) -> String {
    let common = format!(
        "mechanism={} n={} relabeled={} certificate={}",
        certificate.mechanism,
        certificate.params.n,
        certificate.relabeled,
        path.display()
    );
    match &certificate.outcome {
        Outcome::RatioAtLeast {
            value,
            ideal_value,
            formula,
        } => format!(
            "outcome=ratio_at_least value={value:.6} ideal={ideal_value:.6} formula=\"{formula}\" case={} {common}",
            certificate.case_taken.map_or("none".to_string(), |c| c.to_string()),
        ),
        Outcome::TruthfulnessViolation { violation } => format!(
            "outcome=truthfulness_violation step={} machine={} value={:.6e} {common}",
            violation.label, violation.witness.machine, violation.witness.value
        ),
        Outcome::UnboundedRatio {
            task,
            machine,
            implied_ratio,
        } => format!(
            "outcome=unbounded_ratio task={task} machine={machine} implied_ratio={implied_ratio:.3e} {common}"
        ),
    }
}

fn cmd_audit(args: AuditArgs) -> CliResult<u8> {
    let mechanism = registry::resolve(&args.mechanism).map_err(input_error)?;
    let kind = args.generator.kind();
    let pairs: Vec<DeviationPair> = match kind {
        GeneratorKind::Random => {
            let m = args.m.unwrap_or(args.n + 1);
            if args.n == 0 || m == 0 {
                return Err(input_error(anyhow!("need at least one machine and task")));
            }
            random_pairs(args.n, m, args.pairs, args.seed)
        }
        GeneratorKind::Structured => {
            let params = game_params_with_delta(args.n, DEFAULT_BOUNDARY_DELTA)
                .map_err(|e| input_error(anyhow!("{e}")))?;
            structured_pairs(&params).map_err(|e| internal_error(anyhow!("{e}")))?
        }
        GeneratorKind::SingleEntry | GeneratorKind::RowScaling => {
            let params = game_params_with_delta(args.n, DEFAULT_BOUNDARY_DELTA)
                .map_err(|e| input_error(anyhow!("{e}")))?;
            let base = schedcert_core::instances::build_matrix(
                schedcert_core::instances::MatrixKind::A1,
                &params,
            )
            .map_err(|e| internal_error(anyhow!("{e}")))?
            .materialize(params.big_m);
            if kind == GeneratorKind::SingleEntry {
                single_entry_pairs(&base, &schedcert_core::truthfulness::DEFAULT_FACTORS)
            } else {
                row_scaling_pairs(&base, &schedcert_core::truthfulness::DEFAULT_FACTORS)
            }
        }
    };

    let outcome = audit_mechanism(mechanism.as_ref(), &pairs, args.tol);
    let clean = outcome.is_clean();
    let report = AuditReport {
        mechanism: mechanism.name().to_string(),
        generator: kind.label().to_string(),
        seed: args.seed,
        tol: args.tol,
        outcome,
    };
    let rendered = render_audit(&report, args.io.format).map_err(input_error)?;
    emit(&args.io, &rendered)?;
    Ok(if clean { 0 } else { 1 })
}

fn cmd_verify(certificate: &Path) -> CliResult<u8> {
    let raw = fs::read_to_string(certificate)
        .with_context(|| format!("cannot read {}", certificate.display()))
        .map_err(input_error)?;
    let cert: Certificate = serde_json::from_str(&raw)
        .with_context(|| format!("cannot parse {}", certificate.display()))
        .map_err(input_error)?;
    let verification = verify_certificate(&cert);
    if verification.valid {
        println!("valid");
        Ok(0)
    } else {
        println!("invalid");
        for failure in &verification.failures {
            println!("  {failure}");
        }
        Ok(1)
    }
}

/// Relative paths land in `SCHEDCERT_OUT_DIR` when it is set.
fn out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("SCHEDCERT_OUT_DIR") {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

fn emit(io: &IoArgs, report: &str) -> CliResult<()> {
    match &io.output {
        Some(path) => {
            let path = out_path(path);
            fs::write(&path, report.as_bytes())
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(internal_error)
        }
        None => {
            print!("{report}");
            Ok(())
        }
    }
}
