//! `scalc`: runs verification campaigns and writes reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scalc_core::io::{load_config, run_campaign, Campaign, CoefficientSource, Preset, Report, RunConfig, Status};

#[derive(Parser, Debug)]
#[command(name = "scalc", version, about = "Numerical laboratory for second-order elliptic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ellipticity, adjointness, null space and sector checks.
    OperatorCheck,
    /// Functional calculus against the dense oracle.
    CalculusCheck,
    /// Boundary value problems in the upper half-space.
    Solve {
        #[arg(value_enum)]
        problem: Problem,
    },
    /// Numerical probes of the operator.
    Probe {
        #[arg(value_enum)]
        probe: ProbeKind,
    },
    /// Every campaign in sequence.
    VerifyAll,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Problem {
    Dirichlet,
    Regularity,
    Neumann,
    Holder,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProbeKind {
    Offdiag,
    Critical,
    Riesz,
    Kato,
    Identify,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PresetArg {
    T1,
    T2,
    T3,
}

#[derive(Args, Debug)]
struct Overrides {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Spatial dimension.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Number of components.
    #[arg(long, global = true)]
    components: Option<usize>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Built-in coefficient preset (repeatable).
    #[arg(long, value_enum, global = true)]
    preset: Vec<PresetArg>,
    /// Tabulated coefficient file (repeatable).
    #[arg(long = "coefficients", global = true)]
    coefficient_files: Vec<PathBuf>,
    /// Solver exponent (repeatable).
    #[arg(long = "exponent", global = true, allow_negative_numbers = true)]
    exponents: Vec<f64>,
    /// Grid sizes for refinement studies (repeatable).
    #[arg(long = "refine", global = true)]
    refinement: Vec<usize>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    kato_samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also probe the adjoint operator.
    #[arg(long, global = true)]
    adjoint: bool,
    /// Directory for report.json and curve tables.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads; SCALC_WORKERS takes precedence.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Print the full JSON report to stdout.
    #[arg(long, global = true)]
    json: bool,
}

impl Command {
    fn campaign(&self) -> Campaign {
        match self {
            Command::OperatorCheck => Campaign::OperatorCheck,
            Command::CalculusCheck => Campaign::CalculusCheck,
            Command::Solve { problem } => match problem {
                Problem::Dirichlet => Campaign::SolveDirichlet,
                Problem::Regularity => Campaign::SolveRegularity,
                Problem::Neumann => Campaign::SolveNeumann,
                Problem::Holder => Campaign::SolveHolder,
            },
            Command::Probe { probe } => match probe {
                ProbeKind::Offdiag => Campaign::ProbeOffdiag,
                ProbeKind::Critical => Campaign::ProbeCritical,
                ProbeKind::Riesz => Campaign::ProbeRiesz,
                ProbeKind::Kato => Campaign::ProbeKato,
                ProbeKind::Identify => Campaign::ProbeIdentify,
            },
            Command::VerifyAll => Campaign::VerifyAll,
        }
    }
}

fn build_config(cli: &Cli) -> scalc_core::Result<RunConfig> {
    let o = &cli.overrides;
    let mut cfg = match &o.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    cfg.campaign = cli.command.campaign();
    if let Some(n) = o.dim {
        cfg.grid.n = n;
    }
    if let Some(m) = o.components {
        cfg.grid.m = m;
    }
    if let Some(points) = o.points {
        cfg.grid.points = points;
    }
    if !o.preset.is_empty() || !o.coefficient_files.is_empty() {
        cfg.coefficients = o
            .preset
            .iter()
            .map(|p| {
                CoefficientSource::Preset(match p {
                    PresetArg::T1 => Preset::T1,
                    PresetArg::T2 => Preset::T2,
                    PresetArg::T3 => Preset::T3,
                })
            })
            .chain(o.coefficient_files.iter().cloned().map(CoefficientSource::File))
            .collect();
    }
    if !o.exponents.is_empty() {
        cfg.exponents = o.exponents.clone();
    }
    if !o.refinement.is_empty() {
        cfg.refinement = o.refinement.clone();
    }
    if let Some(s) = o.samples {
        cfg.samples = s;
    }
    if let Some(s) = o.kato_samples {
        cfg.kato_samples = s;
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    cfg.adjoint |= o.adjoint;
    cfg.svg |= o.svg;
    if let Some(dir) = &o.output {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn workers(flag: Option<usize>) -> Option<usize> {
    match std::env::var("SCALC_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                log::warn!("ignoring SCALC_WORKERS={v:?}: expected a positive integer");
                flag
            }
        },
        Err(_) => flag,
    }
}

fn summarise(report: &Report) {
    let passed = report.checks.iter().filter(|c| c.passed).count();
    println!("{} {}: {passed}/{} checks passed", report.campaign, status_label(report.status), report.checks.len());
    for c in report.checks.iter().filter(|c| !c.passed) {
        println!(
            "  FAIL {} [{} N={}]: value {:.3e}, tolerance {:.3e}",
            c.name, c.context.coefficients, c.context.points, c.value, c.tolerance
        );
    }
    for f in &report.failures {
        println!("  ERROR {}: {}", f.stage, f.message);
    }
    if let Some(dir) = &report.config.output_dir {
        println!("report written to {}", dir.join("report.json").display());
    }
}

fn status_label(status: Status) -> &'static str {
    match status {
        Status::Pass => "passed",
        Status::CheckFailure => "failed",
        Status::ConfigError => "configuration error",
        Status::NumericalFailure => "numerical failure",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("scalc: {e}");
            return ExitCode::from(Status::ConfigError.exit_code() as u8);
        }
    };
    if cli.overrides.print_config {
        println!("{}", scalc_core::io::emit_config(&cfg));
        return ExitCode::SUCCESS;
    }
    if let Some(n) = workers(cli.overrides.workers) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("worker pool already initialised: {e}");
        }
    }
    let report = run_campaign(&cfg);
    if cli.overrides.json {
        println!("{}", report.to_json());
    } else {
        summarise(&report);
    }
    ExitCode::from(report.status.exit_code() as u8)
}
