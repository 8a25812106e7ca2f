use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delegation_lab::io::read_profile;
use delegation_lab::montecarlo::{baseline_config, run_experiment, write_experiment, ExperimentConfig, G_PRESETS};
use delegation_lab::{
    check_pne_sufficient, evaluate_objectives, Error, ExpenditureMode, Polynomial, RewardScheme,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "delegation-lab", version, about = "Stake-delegation equilibria and Monte-Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write draws.csv, objectives.csv and summary.json.
    Run(RunArgs),
    /// Check the sufficient equilibrium conditions on a profile CSV.
    Check(CheckArgs),
    /// Evaluate participation, expenditure and decentralization of a profile CSV.
    Objectives(ObjectivesArgs),
    /// Print the g1..g6 reward shapes and the baseline config.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "DELEGATION_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    draws: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    eps_approx: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    include_idle_epsilon: bool,
}

#[derive(Args)]
struct SchemeArgs {
    /// JSON reward scheme file (same keys as the `scheme` block of a config).
    #[arg(long, conflicts_with_all = ["a_coeffs", "b_coeffs", "cap", "c_min", "c_max"])]
    scheme: Option<PathBuf>,
    /// Pledge component coefficients, constant term first.
    #[arg(long, value_delimiter = ',')]
    a_coeffs: Option<Vec<f64>>,
    /// Delegation component coefficients, constant term first.
    #[arg(long, value_delimiter = ',')]
    b_coeffs: Option<Vec<f64>>,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    c_min: Option<f64>,
    #[arg(long)]
    c_max: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    profile: PathBuf,
    #[command(flatten)]
    scheme: SchemeArgs,
}

#[derive(Args)]
struct ObjectivesArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    ell: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_approx: f64,
    #[arg(long)]
    include_idle_epsilon: bool,
    #[command(flatten)]
    scheme: SchemeArgs,
}

const EXIT_VIOLATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        Error::Draw { source, .. } => exit_code(source),
        Error::Invariant(_) | Error::Unstable | Error::InfeasibleAllocation { .. } => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Check(args) => cmd_check(args),
        Command::Objectives(args) => cmd_objectives(args),
        Command::Presets => cmd_presets(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn cmd_run(args: RunArgs) -> Result<u8, Error> {
    let mut config: ExperimentConfig = serde_json::from_str(&read_text(&args.config)?)?;
    config.theta = args.theta.unwrap_or(config.theta);
    config.n = args.n.unwrap_or(config.n);
    config.draws = args.draws.unwrap_or(config.draws);
    config.m = args.m.unwrap_or(config.m);
    config.ell = args.ell.unwrap_or(config.ell);
    config.eps_approx = args.eps_approx.unwrap_or(config.eps_approx);
    config.master_seed = args.master_seed.unwrap_or(config.master_seed);
    config.include_idle_epsilon |= args.include_idle_epsilon;
    config.validate()?;

    let experiment = run_experiment(&config, args.threads)?;
    for (label, run) in experiment.runs() {
        let s = &run.summary;
        let prefix = if label.is_empty() { String::new() } else { format!("{label}: ") };
        eprintln!(
            "{prefix}{}/{} draws stable (frequency {})",
            s.stable_draws, s.draws, s.stability_frequency
        );
    }
    for path in write_experiment(&args.out, &experiment)? {
        println!("{}", path.display());
    }
    Ok(0)
}

fn scheme_from(args: &SchemeArgs) -> Result<RewardScheme, Error> {
    if let Some(path) = &args.scheme {
        return Ok(serde_json::from_str(&read_text(path)?)?);
    }
    let base = RewardScheme::baseline();
    let a = match &args.a_coeffs {
        Some(c) => Polynomial::new(c.clone())?,
        None => base.pledge_component().clone(),
    };
    let b = match &args.b_coeffs {
        Some(c) => Polynomial::new(c.clone())?,
        None => base.delegation_component().clone(),
    };
    RewardScheme::new(
        a,
        b,
        args.cap.unwrap_or(base.cap()),
        args.c_min.unwrap_or(base.c_min()),
        args.c_max.unwrap_or(base.c_max()),
    )
}

fn cmd_check(args: CheckArgs) -> Result<u8, Error> {
    let scheme = scheme_from(&args.scheme)?;
    let profile = read_profile(File::open(&args.profile)?)?;
    scheme.check_proper(profile.types())?;
    let verdict = check_pne_sufficient(&profile, &scheme);
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(if verdict.sufficient { 0 } else { EXIT_VIOLATION })
}

fn cmd_objectives(args: ObjectivesArgs) -> Result<u8, Error> {
    let scheme = scheme_from(&args.scheme)?;
    let profile = read_profile(File::open(&args.profile)?)?;
    let mode = if args.include_idle_epsilon {
        ExpenditureMode::IncludeIdleUtility
    } else {
        ExpenditureMode::SchemePayout
    };
    let report = evaluate_objectives(&profile, &scheme, args.ell, args.eps_approx, mode)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_presets() -> Result<u8, Error> {
    let shapes: serde_json::Map<String, serde_json::Value> =
        G_PRESETS.iter().map(|(name, c)| (name.to_string(), json!(c))).collect();
    let out = json!({ "g": shapes, "baseline": baseline_config() });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}
