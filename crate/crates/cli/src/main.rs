//! `privdist` command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use privdist::curves::{self, format_number, CurveContext};
use privdist::mechanisms::{self, ParametricMechanism, EPS_TILDE_TOL};
use privdist::metrics::{self, PrivacyReport};
use privdist::model::{MechanismFile, PriorFile};
use privdist::optimize::blahut_arimoto;
use privdist::universe::DEFAULT_STATE_CAP;
use privdist::verify::{verify, VerifyOptions};
use privdist::{Error, Mechanism, Prior, UniverseSpec};
use serde::Deserialize;

const STATE_CAP_VAR: &str = "PRIVDIST_STATE_CAP";

#[derive(Parser)]
#[command(name = "privdist", version, about = "Privacy-distortion analysis over finite database universes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure identifiability, DP, mutual information, distortion and eps_X.
    Analyze(AnalyzeArgs),
    /// Construct a mechanism and write it as JSON.
    Build(BuildArgs),
    /// Tabulate tradeoff bounds over a distortion grid as CSV.
    Sweep(SweepArgs),
    /// Minimum mutual information at a distortion budget.
    Rd(RdArgs),
    /// Run every applicable consistency check on a prior.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    mech: PathBuf,
    #[arg(long, conflicts_with = "table")]
    json: bool,
    #[arg(long)]
    table: bool,
    /// Report levels and mutual information in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    ExpDp,
    ExpId,
    Identity,
    Independent,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    eps: Option<f64>,
    /// Required for exp_id; for independent it is the output distribution.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Universe size when no prior is given.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    prior: PathBuf,
    /// START:STOP:STEP, STOP inclusive.
    #[arg(long)]
    grid: String,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct RdArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    distortion: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    full: bool,
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn from_core(context: &str, err: Error) -> Self {
        let code = match err {
            Error::SpecMismatch { .. } => 3,
            Error::Infeasible { .. } => 4,
            Error::NotConverged(_) => 5,
            _ => 2,
        };
        let message = if context.is_empty() { err.to_string() } else { format!("{context}: {err}") };
        Failure { code, message }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn state_cap() -> CliResult<usize> {
    match std::env::var(STATE_CAP_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("{STATE_CAP_VAR} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_STATE_CAP),
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_prior(path: &Path, cap: usize) -> CliResult<Prior> {
    let file: PriorFile = parse_json(path, &read(path)?)?;
    Prior::from_file(file, cap).map_err(|e| Failure::from_core(&path.display().to_string(), e))
}

enum MechanismInput {
    Parametric(ParametricMechanism),
    Table(MechanismFile),
}

fn load_mechanism(path: &Path, prior: &Prior, cap: usize) -> CliResult<Mechanism> {
    let ctx = path.display().to_string();
    let text = read(path)?;
    let value: serde_json::Value = parse_json(path, &text)?;
    let input = if value.get("kind").is_some() {
        MechanismInput::Parametric(parse_json(path, &text)?)
    } else {
        MechanismInput::Table(parse_json(path, &text)?)
    };
    match input {
        MechanismInput::Parametric(p) => {
            let spec = UniverseSpec::with_cap(p.n, p.m, cap).map_err(|e| Failure::from_core(&ctx, e))?;
            if &spec != prior.spec() {
                return Err(Failure::from_core(
                    &ctx,
                    Error::SpecMismatch { left: prior.spec().to_string(), right: spec.to_string() },
                ));
            }
            p.expand(spec, Some(prior)).map_err(|e| Failure::from_core(&ctx, e))
        }
        MechanismInput::Table(file) => {
            if (file.n, file.m) != (prior.spec().n(), prior.spec().m()) {
                return Err(Failure::from_core(
                    &ctx,
                    Error::SpecMismatch {
                        left: prior.spec().to_string(),
                        right: format!("(n={}, m={})", file.n, file.m),
                    },
                ));
            }
            Mechanism::from_file(file, cap).map_err(|e| Failure::from_core(&ctx, e))
        }
    }
}

fn analyze(args: AnalyzeArgs, cap: usize) -> CliResult<()> {
    let prior = load_prior(&args.prior, cap)?;
    let mech = load_mechanism(&args.mech, &prior, cap)?;
    let mut report = metrics::report(&prior, &mech).map_err(|e| Failure::from_core("", e))?;
    if args.bits {
        let ln2 = std::f64::consts::LN_2;
        report = PrivacyReport {
            identifiability_level: report.identifiability_level / ln2,
            dp_level: report.dp_level / ln2,
            mutual_information: report.mutual_information / ln2,
            eps_x: report.eps_x / ln2,
            ..report
        };
    }
    let mut out = String::new();
    if args.table {
        let unit = if args.bits { "bits" } else { "nats" };
        let rows = [
            ("identifiability_level", format_number(report.identifiability_level)),
            ("dp_level", format_number(report.dp_level)),
            ("mutual_information", format_number(report.mutual_information)),
            ("distortion", format_number(report.distortion)),
            ("eps_X", format_number(report.eps_x)),
            ("unsupported_outputs", report.unsupported_outputs.to_string()),
        ];
        let _ = writeln!(out, "units: {unit}");
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<22} {v}");
        }
    } else {
        out = serde_json::to_string_pretty(&report).expect("report serializes");
        out.push('\n');
    }
    write_out(None, &out)
}

fn build(args: BuildArgs, cap: usize) -> CliResult<()> {
    let prior = args.prior.as_deref().map(|p| load_prior(p, cap)).transpose()?;
    let spec = match (&prior, args.n, args.m) {
        (Some(p), None, None) => *p.spec(),
        (Some(p), n, m) => {
            let (n, m) = (n.unwrap_or(p.spec().n()), m.unwrap_or(p.spec().m()));
            if (n, m) != (p.spec().n(), p.spec().m()) {
                return Err(Failure::from_core(
                    "",
                    Error::SpecMismatch { left: p.spec().to_string(), right: format!("(n={n}, m={m})") },
                ));
            }
            *p.spec()
        }
        (None, Some(n), Some(m)) => UniverseSpec::with_cap(n, m, cap).map_err(|e| Failure::from_core("", e))?,
        (None, _, _) => return Err(Failure::input("give --prior or both --n and --m")),
    };
    let eps = || args.eps.ok_or_else(|| Failure::input("--eps is required for this kind"));
    let mech = match args.kind {
        Kind::ExpDp => mechanisms::build_exp_dp(spec, eps()?),
        Kind::ExpId => {
            let prior = prior.as_ref().ok_or_else(|| Failure::input("exp_id requires --prior"))?;
            let eps = eps()?;
            mechanisms::build_exp_id(prior, eps).map_err(|e| match e {
                Error::Infeasible { .. } => {
                    let threshold = match mechanisms::eps_tilde(prior, EPS_TILDE_TOL) {
                        Ok(t) => format_number(t),
                        Err(_) => "undefined".into(),
                    };
                    Error::Infeasible {
                        eps,
                        reason: format!("below the feasibility threshold eps_tilde_X = {threshold}"),
                    }
                }
                other => other,
            })
        }
        Kind::Identity => Ok(mechanisms::build_identity(spec)),
        Kind::Independent => {
            let q = match &prior {
                Some(p) => p.pmf().to_vec(),
                None => vec![1.0 / spec.states() as f64; spec.states()],
            };
            mechanisms::build_independent(spec, &q)
        }
    }
    .map_err(|e| Failure::from_core("", e))?;
    let mut text = mech.to_json();
    text.push('\n');
    write_out(args.output.as_deref(), &text)
}

fn sweep(args: SweepArgs, cap: usize) -> CliResult<()> {
    let prior = load_prior(&args.prior, cap)?;
    let grid = curves::parse_grid(&args.grid).map_err(|e| Failure::from_core("--grid", e))?;
    let n = prior.spec().n() as f64;
    if let Some(bad) = grid.iter().find(|&&d| d.is_nan() || d <= 0.0 || d > n) {
        return Err(Failure::input(format!("--grid: D = {bad} outside (0, {n}]")));
    }
    if args.threads == 0 {
        return Err(Failure::input("--threads must be at least 1"));
    }
    let ctx = CurveContext::new(&prior).map_err(|e| Failure::from_core("", e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Failure::input(e.to_string()))?;
    let rows = pool
        .install(|| {
            use rayon::prelude::*;
            grid.par_iter()
                .map(|&d| curves::sweep_row(&ctx, &prior, d))
                .collect::<privdist::Result<Vec<_>>>()
        })
        .map_err(|e| Failure::from_core("", e))?;
    write_out(args.output.as_deref(), &curves::write_csv(&rows))
}

fn rd(args: RdArgs, cap: usize) -> CliResult<()> {
    let prior = load_prior(&args.prior, cap)?;
    let sol = blahut_arimoto(&prior, args.distortion, args.tol, args.max_iter)
        .map_err(|e| Failure::from_core("", e))?;
    let mut text = serde_json::to_string_pretty(&sol).expect("solution serializes");
    text.push('\n');
    write_out(None, &text)?;
    if !sol.converged {
        return Err(Failure {
            code: 5,
            message: format!("Blahut-Arimoto did not converge within {} iterations", args.max_iter),
        });
    }
    Ok(())
}

fn run_verify(args: VerifyArgs, cap: usize) -> CliResult<bool> {
    let prior = load_prior(&args.prior, cap)?;
    let opts = VerifyOptions { full: args.full, ..VerifyOptions::default() };
    let report = verify(&prior, &opts);
    let text = if args.json {
        serde_json::to_string_pretty(&report).expect("report serializes")
    } else {
        report.to_string()
    };
    write_out(None, &format!("{text}\n"))?;
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = state_cap().and_then(|cap| match cli.command {
        Command::Analyze(a) => analyze(a, cap).map(|_| true),
        Command::Build(a) => build(a, cap).map(|_| true),
        Command::Sweep(a) => sweep(a, cap).map(|_| true),
        Command::Rd(a) => rd(a, cap).map(|_| true),
        Command::Verify(a) => run_verify(a, cap),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
