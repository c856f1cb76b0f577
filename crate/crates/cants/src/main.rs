use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cants::app::{self, AppError};
use cants::config::{self, ConfigError, Settings};
use cants::sweep::{self, SweepParam};

/// Continuous ant-based neural topology search for time-series forecasting.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset (overrides `data_path`).
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Synthetic series: noisy-sine, mackey-glass or linear-ar.
    #[arg(long)]
    synth: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "cants-out")]
    out: PathBuf,
    /// Setting override, repeatable, e.g. `--set num_ants=150`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search and write its artifacts.
    Run(Common),
    /// Repeat searches over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// num_ants or sensing_radius.
        #[arg(long)]
        param: String,
        /// Comma-separated values; defaults to the reference grid.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value_t = sweep::DEFAULT_TRIALS)]
        trials: usize,
    },
}

fn settings(common: &Common) -> Result<Settings, AppError> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Invalid {
            field: "config".into(),
            reason: format!("{}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(d) = &common.data {
        overrides.push(format!("data_path={}", d.display()));
    }
    if let Some(s) = &common.synth {
        overrides.push(format!("synth={s}"));
    }
    Ok(config::load(&text, &overrides)?)
}

fn execute(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Run(common) => {
            let s = settings(&common)?;
            let summary = app::cmd_run(&s, &common.out)?;
            println!(
                "best validation MSE {:.6}, test MAE {:.6} ({} candidates, {} accepted); artifacts in {}",
                summary.best_fitness,
                summary.test_mae,
                summary.candidates,
                summary.accepted,
                common.out.display()
            );
        }
        Command::Sweep { common, param, values, trials } => {
            let s = settings(&common)?;
            let invalid = |field: &str, reason: String| ConfigError::Invalid { field: field.into(), reason };
            let param: SweepParam = param.parse().map_err(|e| invalid("param", e))?;
            let values = match values {
                Some(v) => sweep::parse_values(param, &v).map_err(|e| invalid("values", e))?,
                None => sweep::default_grid(param),
            };
            if trials == 0 {
                return Err(invalid("trials", "must be at least 1".into()).into());
            }
            let rows = app::cmd_sweep(&s, param, &values, trials, &common.out)?;
            for r in rows {
                println!("{} = {}: min {:.6} median {:.6} max {:.6}", r.param, r.value, r.min, r.median, r.max);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
