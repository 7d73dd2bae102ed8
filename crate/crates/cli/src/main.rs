use std::path::PathBuf;
use std::process::ExitCode;

use boundary_noise::harness::{self, ExperimentConfig, RunOptions, RunOutcome, OUT_DIR_ENV};
use boundary_noise::Error;
use clap::{Args, Parser, Subcommand};

/// Boundary-noise experiment runner.
#[derive(Parser, Debug)]
#[command(name = "bnoise", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a registered experiment, or the experiment described by --config.
    Run {
        /// Experiment name (see list-experiments).
        experiment: Option<String>,
        /// Domain tag used to pick a registry row, e.g. ball2.
        #[arg(long)]
        domain: Option<String>,
        /// Noise key used to pick a registry row, e.g. white.
        #[arg(long)]
        noise: Option<String>,
        /// TOML experiment file; overrides the bundled configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the experiment registry.
    ListExperiments,
    /// Run the heat-kernel self-test.
    KernelSelftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for CSV and JSON.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn options(&self, base_dir: Option<PathBuf>) -> RunOptions {
        RunOptions { seed: self.seed, workers: self.workers, out_dir: Some(self.out_dir.clone()), base_dir }
    }
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Usage(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn report(out: &RunOutcome) -> ExitCode {
    for c in &out.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(p) = &out.csv_path {
        println!("csv: {}", p.display());
    }
    if let Some(p) = &out.json_path {
        println!("json: {}", p.display());
    }
    if out.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}: check failed", out.experiment);
        ExitCode::from(1)
    }
}

fn run(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::ListExperiments => {
            print!("{}", harness::list_experiments());
            Ok(ExitCode::SUCCESS)
        }
        Command::KernelSelftest { common } => {
            let entry = harness::lookup("kernel-selftest", None, None)?;
            Ok(report(&harness::run_registered(entry, &common.options(None))?))
        }
        Command::Run { experiment, domain, noise, config, common } => {
            let (cfg, base) = match (config, experiment.as_deref()) {
                (Some(path), exp) => {
                    let cfg = ExperimentConfig::from_file(&path)?;
                    if let Some(exp) = exp {
                        if exp != cfg.experiment.name {
                            return Err(Error::Usage(format!(
                                "{} describes {}, not {exp}",
                                path.display(),
                                cfg.experiment.name
                            )));
                        }
                    }
                    (cfg, path.parent().map(PathBuf::from))
                }
                (None, Some(exp)) => {
                    let entry = harness::lookup(exp, domain.as_deref(), noise.as_deref())?;
                    (ExperimentConfig::from_toml(entry.config)?, None)
                }
                (None, None) => return Err(Error::Usage("run needs an experiment name or --config".into())),
            };
            Ok(report(&harness::run(&cfg, &common.options(base))?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
