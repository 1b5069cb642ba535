use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polymerlab::config::ExperimentConfig;
use polymerlab::lattice::PathFunctional;
use polymerlab::run::run;
use polymerlab::{Error, ExperimentKind, LawFamily};

/// Directed polymers in heavy-tailed random environments.
#[derive(Parser)]
#[command(name = "polymerlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv and manifest.json.
    Run(RunArgs),
    /// Validate a configuration and print its effective form.
    Check(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// simulate-discrete, simulate-continuum, converge, truncation-curve,
    /// moments, verify-appendix or replica-moment. Optional when the
    /// config file names one.
    experiment: Option<String>,

    /// TOML config file; flags override its fields.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, env = "POLYMERLAB_THREADS")]
    threads: Option<usize>,

    #[arg(long, value_parser = parse_family)]
    family: Option<LawFamily>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "N-grid", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Half-width of the rescaled spatial window.
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long)]
    beta_hat: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    a_grid: Option<Vec<f64>>,
    /// Path functional as inline JSON, e.g. '{"kind":"constant_one"}'.
    #[arg(long)]
    functional: Option<String>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    path_samples: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
}

fn parse_family(s: &str) -> Result<LawFamily, String> {
    match s.replace('-', "_").as_str() {
        "pareto" => Ok(LawFamily::Pareto),
        "centered_pareto" => Ok(LawFamily::CenteredPareto),
        "log_pareto" => Ok(LawFamily::LogPareto),
        _ => Err(format!("unknown law family `{s}` (pareto, centered_pareto, log_pareto)")),
    }
}

fn build_config(args: &RunArgs) -> polymerlab::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.experiment) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => ExperimentConfig::new(ExperimentKind::parse(name)?),
        (None, None) => return Err(Error::invalid("experiment", "name an experiment or pass --config")),
    };
    if let Some(name) = &args.experiment {
        cfg.experiment = ExperimentKind::parse(name)?;
    }
    if let Some(v) = args.family {
        cfg.law.family = v;
    }
    if let Some(v) = args.alpha {
        cfg.law.alpha = v;
    }
    if let Some(v) = args.d {
        cfg.geometry.d = v;
    }
    if let Some(v) = args.n {
        cfg.geometry.n = Some(v);
        cfg.geometry.n_grid = None;
    }
    if let Some(v) = &args.n_grid {
        cfg.geometry.n_grid = Some(v.clone());
        cfg.geometry.n = None;
    }
    if let Some(v) = args.half_width {
        cfg.geometry.half_width = v;
    }
    if let Some(v) = args.beta_hat {
        cfg.disorder.beta_hat = v;
    }
    if let Some(v) = args.a {
        cfg.disorder.a = v;
    }
    if let Some(v) = args.b {
        cfg.disorder.b = Some(v);
    }
    if let Some(v) = &args.a_grid {
        cfg.disorder.a_grid = Some(v.clone());
    }
    if let Some(s) = &args.functional {
        cfg.functional = serde_json::from_str::<PathFunctional>(s).map_err(|e| Error::invalid("functional", e.to_string()))?;
    }
    if let Some(v) = args.replicas {
        cfg.replicas = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.output {
        cfg.output = v.clone();
    }
    if let Some(v) = args.path_samples {
        cfg.options.path_samples = v;
    }
    if args.no_bootstrap {
        cfg.options.bootstrap = false;
    }
    Ok(cfg)
}

fn fail(e: Error) -> ExitCode {
    eprintln!("polymerlab: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match build_config(&args) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run(&cfg, args.threads) {
                Ok(summary) => {
                    println!(
                        "{}: {} rows in {:.2}s -> {}",
                        summary.manifest.experiment_id,
                        summary.manifest.rows,
                        summary.manifest.wall_time_s,
                        summary.results_path.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Check(args) => {
            let cfg = match build_config(&args).and_then(|c| c.validate().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match cfg.to_toml_string() {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
