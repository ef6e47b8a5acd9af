//! `dwlab`: simulate, decompose and analyse damped wave runs.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 blow-up, 4 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dwlab::config::RunConfig;
use dwlab::pipeline::{self, Outcome, PipelineError, RunPaths};
use dwlab::selftest;

const EXIT_VALIDATION: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "dwlab", version, about = "Damped wave similarity-profile lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output root; defaults to $DWLAB_OUT, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Locates an existing run either directly or through its configuration.
#[derive(Args)]
struct RunLocator {
    /// Run directory produced by `dwlab run`.
    #[arg(long, conflicts_with = "config")]
    run: Option<PathBuf>,
    /// Locate the run by its configuration id instead.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root used with `--config`; defaults to $DWLAB_OUT, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print errors and warnings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate and run every analysis stage.
    Run(ConfigArgs),
    /// Recompute the similarity-frame decomposition from stored snapshots.
    Decompose(RunLocator),
    /// Recompute the energy ladder from stored decompositions.
    Energy(RunLocator),
    /// Recompute rate fits, or print predicted rates with `--predict`.
    Rates {
        /// `predict` is the positional spelling of `--predict`.
        #[arg(value_parser = ["predict"])]
        action: Option<String>,
        #[command(flatten)]
        locator: RunLocator,
        /// Print the predicted rates for `--config` without touching any run.
        #[arg(long)]
        predict: bool,
    },
    /// Run the configuration's sweep block.
    Sweep {
        #[command(flatten)]
        args: ConfigArgs,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Quick invariant checks against closed forms.
    Selftest,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Config(_) | PipelineError::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: format!("{}: {e}", path.display()),
    })?;
    RunConfig::from_json_str(&text).map_err(|e| PipelineError::from(e).into())
}

fn locate(loc: &RunLocator) -> Result<RunPaths, Failure> {
    match (&loc.run, &loc.config) {
        (Some(dir), _) => Ok(RunPaths::new(dir)),
        (None, Some(cfg)) => {
            let cfg = load(cfg)?;
            Ok(RunPaths::new(pipeline::output_root(loc.out.as_deref()).join(&cfg.id)))
        }
        (None, None) => Err(Failure {
            code: EXIT_VALIDATION,
            message: "either --run or --config is required".into(),
        }),
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config } => {
            let report = load(&config)?.validate();
            for w in &report.warnings {
                eprintln!("warning: {}: {}", w.path, w.message);
            }
            for e in &report.errors {
                eprintln!("error: {}: {}", e.path, e.message);
            }
            if report.ok() {
                println!("ok");
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_VALIDATION,
                    message: format!("{} error(s)", report.errors.len()),
                })
            }
        }
        Command::Run(args) => {
            let cfg = load(&args.config)?;
            for w in cfg.validate().warnings {
                eprintln!("warning: {}: {}", w.path, w.message);
            }
            let summary = pipeline::run(&cfg, &pipeline::output_root(args.out.as_deref()))?;
            print_json(&summary);
            if summary.outcome == Outcome::Blowup {
                return Err(Failure {
                    code: EXIT_BLOWUP,
                    message: match summary.blowup {
                        Some(b) => format!("blow-up at t = {} (sup |u| = {:e})", b.t, b.sup),
                        None => "blow-up".into(),
                    },
                });
            }
            Ok(())
        }
        Command::Decompose(loc) => {
            let rows = pipeline::decompose_stage(&locate(&loc)?)?;
            println!("decomposed {} snapshots", rows.len());
            Ok(())
        }
        Command::Energy(loc) => {
            let (_, summary) = pipeline::energy_stage(&locate(&loc)?)?;
            print_json(&summary);
            Ok(())
        }
        Command::Rates {
            action,
            locator,
            predict,
        } => {
            if predict || action.is_some() {
                let path = locator.config.as_deref().ok_or_else(|| Failure {
                    code: EXIT_VALIDATION,
                    message: "rate prediction needs --config".into(),
                })?;
                let cfg = load(path)?;
                print_json(&cfg.rates().map_err(PipelineError::from)?);
            } else {
                print_json(&pipeline::rates_stage(&locate(&locator)?)?);
            }
            Ok(())
        }
        Command::Sweep { args, jobs } => {
            let cfg = load(&args.config)?;
            let rows = pipeline::sweep(&cfg, &pipeline::output_root(args.out.as_deref()), jobs)?;
            print_json(&rows);
            Ok(())
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                let tol = if c.tolerance == f64::MAX {
                    "finite".to_string()
                } else {
                    format!("<= {:.3e}", c.tolerance)
                };
                println!(
                    "{} {}: {:.3e} ({tol})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value
                );
            }
            if checks.iter().all(|c| c.pass) {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_INTERNAL,
                    message: "selftest failed".into(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dwlab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
