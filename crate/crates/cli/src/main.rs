//! `ief`: check, solve and price interim envy-free lotteries from the shell.
//!
//! Exit status is 0 when the run succeeded and the checked property holds,
//! 2 when the property fails or the problem is infeasible, and 1 on usage,
//! input or internal errors.

mod commands;
mod input;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ief::Objective;

use output::{Body, Report};

#[derive(Parser)]
#[command(name = "ief", version, about = "Interim envy-free lotteries over matchings")]
struct Cli {
    /// Output format; `csv` is available for `solve` and `experiment`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Util,
    Egal,
    Lognash,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Util => Objective::Utilitarian,
            ObjectiveArg::Egal => Objective::Egalitarian,
            ObjectiveArg::Lognash => Objective::LogNash,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckProperty {
    /// Interim envy-freeness, up to `--epsilon`.
    Ief,
    ExAnteEf,
    ExPostEf,
    ExPostProp,
    /// Every support allocation is envy-free.
    Ef,
    /// Every support allocation is proportional.
    Prop,
    /// Every support allocation is epistemic envy-free.
    Eef,
    /// Every support allocation meets the min-max shares.
    Mms,
    /// Largest envy over the support is at most `--epsilon`.
    MaxEnvy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExistsProperty {
    /// A lottery over general allocations that is iEF.
    Ief,
    Ef,
    Prop,
    Eef,
    Mms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleProblem {
    Util,
    Egal,
    Lognash,
    Subsidy,
    Rent,
}

#[derive(Subcommand)]
enum Command {
    /// Check a fairness property of a lottery.
    Check {
        #[arg(long, value_enum)]
        property: CheckProperty,
        #[arg(long, default_value = "0")]
        epsilon: String,
        /// Extra slack for float lotteries.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        instance: PathBuf,
        lottery: PathBuf,
    },
    /// Welfare-maximizing iEF lottery.
    Solve {
        #[arg(long, value_enum, default_value = "util")]
        objective: ObjectiveArg,
        instance: PathBuf,
    },
    /// Maximum edge-pair-weighted perfect matching.
    #[command(name = "2ebm")]
    TwoEbm { weights: PathBuf },
    /// Interim envy graph of a lottery.
    Graph { instance: PathBuf, lottery: PathBuf },
    /// Smallest per-agent subsidies making a lottery iEF.
    Apay { instance: PathBuf, lottery: PathBuf },
    /// Check iEF with payments.
    Paycheck {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value = "0")]
        epsilon: String,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        instance: PathBuf,
        lottery: PathBuf,
        payments: PathBuf,
    },
    /// iEF lottery with per-outcome payments of least expected subsidy.
    Subsidy {
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        instance: PathBuf,
    },
    /// iEF lottery with payments collecting `--rent`, maximizing the least
    /// expected utility.
    Rent {
        #[arg(long)]
        rent: f64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        instance: PathBuf,
    },
    /// Brute-force references.
    Oracle {
        #[command(subcommand)]
        oracle: OracleCommand,
    },
    /// Batch experiments.
    Experiment {
        #[command(subcommand)]
        experiment: ExperimentCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Whether some allocation (or lottery, for `ief`) has the property.
    Exists {
        #[arg(long, value_enum)]
        property: ExistsProperty,
        instance: PathBuf,
    },
    /// Optimum of the LP over all matchings.
    FullLp {
        #[arg(long, value_enum)]
        problem: OracleProblem,
        #[arg(long, default_value_t = 0.0)]
        rent: f64,
        instance: PathBuf,
    },
    /// Best per-agent against best per-item payments over a lottery grid.
    Compare {
        #[arg(long, value_enum)]
        problem: OracleProblem,
        #[arg(long, default_value_t = 0.0)]
        rent: f64,
        /// Grid denominator.
        #[arg(long, default_value_t = 12)]
        denominator: u32,
        /// Restrict supports to proportional matchings.
        #[arg(long)]
        proportional: bool,
        instance: PathBuf,
    },
    /// Cross-check the solvers against the references on random instances.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Unconstrained against iEF optimum on an instance family.
    Price {
        #[arg(long)]
        family: String,
        /// Numbers of agents, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Gap parameter of the `util` family.
        #[arg(long, default_value = "1/100")]
        epsilon: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn json_only(format: Option<Format>, command: &str) -> Result<()> {
    if format == Some(Format::Csv) {
        bail!("--format csv is not available for {command}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Report> {
    let format = cli.format;
    let name = match &cli.command {
        Command::Solve { .. } => "solve",
        Command::Experiment { .. } => "experiment",
        Command::Check { .. } => "check",
        Command::TwoEbm { .. } => "2ebm",
        Command::Graph { .. } => "graph",
        Command::Apay { .. } => "apay",
        Command::Paycheck { .. } => "paycheck",
        Command::Subsidy { .. } => "subsidy",
        Command::Rent { .. } => "rent",
        Command::Oracle { .. } => "oracle",
    };
    if !matches!(name, "solve" | "experiment") {
        json_only(format, name)?;
    }
    match cli.command {
        Command::Check { property, epsilon, tol, instance, lottery } => {
            commands::check(&instance, &lottery, property, &epsilon, tol)
        }
        Command::Solve { objective, instance } => {
            commands::solve(&instance, objective.into(), format.unwrap_or(Format::Json))
        }
        Command::TwoEbm { weights } => commands::two_ebm(&weights),
        Command::Graph { instance, lottery } => commands::graph(&instance, &lottery),
        Command::Apay { instance, lottery } => commands::apay(&instance, &lottery),
        Command::Paycheck { kind, epsilon, tol, instance, lottery, payments } => {
            commands::paycheck(&instance, &lottery, &payments, kind.as_deref(), &epsilon, tol)
        }
        Command::Subsidy { epsilon, instance } => commands::subsidy(&instance, epsilon),
        Command::Rent { rent, epsilon, instance } => commands::rent(&instance, rent, epsilon),
        Command::Oracle { oracle } => match oracle {
            OracleCommand::Exists { property, instance } => commands::exists(&instance, property),
            OracleCommand::FullLp { problem, rent, instance } => commands::full_lp(&instance, problem, rent),
            OracleCommand::Compare { problem, rent, denominator, proportional, instance } => {
                commands::compare(&instance, problem, rent, denominator, proportional)
            }
            OracleCommand::Random { seed, cases, n } => commands::random_check(seed, cases, n),
        },
        Command::Experiment { experiment } => match experiment {
            ExperimentCommand::Price { family, n, epsilon, jobs } => {
                let eps = input::rational(&epsilon, "epsilon")?;
                commands::experiment(&family, &n, &eps, jobs.max(1), format.unwrap_or(Format::Csv))
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let report = match dispatch(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let mut stdout = std::io::stdout().lock();
    let written = match &report.body {
        Body::Json(v) => {
            writeln!(stdout, "{}", serde_json::to_string_pretty(v).expect("JSON values serialize"))
        }
        Body::Csv(text) => write!(stdout, "{text}"),
    };
    if written.and_then(|_| stdout.flush()).is_err() {
        return ExitCode::from(1);
    }
    if report.holds {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
