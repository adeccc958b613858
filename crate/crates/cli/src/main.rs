use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use pfopt::harness::{
    ablation_base_factor, ablation_eta0, grid_search, parse_value, rates, run_and_write,
    summary_to_json, ExperimentConfig, SweepTable, DEFAULT_BASE_FACTORS, DEFAULT_ETA0_VALUES,
};

#[derive(Parser)]
#[command(
    name = "pfopt",
    version,
    about = "Run parameter-free optimizer experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Override a config key, e.g. `--set optimizer.base_factor=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Exit nonzero if any run diverges.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SweepOutput {
    /// Write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the table as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Run sweep members one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run.
    Run {
        #[command(flatten)]
        common: Common,
        /// Trace CSV path (overrides output.trace_csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary JSON path (overrides output.summary_json).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Sweep one dotted config key over a list of values.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// Sweep the initial step scale in absolute mode.
    AblateEta0 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// Sweep the base factor.
    AblateBase {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// Run the config at several horizons and fit the convergence rate.
    Rates {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    for item in &common.overrides {
        let (key, value) = item
            .split_once('=')
            .with_context(|| format!("override `{item}` is not KEY=VALUE"))?;
        cfg = cfg
            .with_override(key, parse_value(value))
            .with_context(|| format!("applying override `{item}`"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit_table(table: &SweepTable, output: &SweepOutput) -> Result<bool> {
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(path) = &output.csv {
        write(path, &csv)?;
    }
    if let Some(path) = &output.json {
        write(path, &(serde_json::to_string_pretty(table)? + "\n"))?;
    }
    Ok(table.rows.iter().any(|r| r.summary.diverged))
}

/// Returns `(diverged, strict)`.
fn execute(command: Command) -> Result<(bool, bool)> {
    match command {
        Command::Run {
            common,
            trace,
            summary,
        } => {
            let mut cfg = load(&common)?;
            if trace.is_some() {
                cfg.output.trace_csv = trace;
            }
            if summary.is_some() {
                cfg.output.summary_json = summary;
            }
            let out = run_and_write(&cfg)?;
            for w in &out.summary.warnings {
                log::warn!("{w}");
            }
            print!("{}", summary_to_json(&out.summary)?);
            Ok((out.summary.diverged, common.strict))
        }
        Command::Grid {
            common,
            param,
            values,
            output,
        } => {
            let cfg = load(&common)?;
            let values: Vec<Value> = values.iter().map(|v| parse_value(v)).collect();
            let table = grid_search(&cfg, &param, &values, !output.sequential)?;
            Ok((emit_table(&table, &output)?, common.strict))
        }
        Command::AblateEta0 {
            common,
            values,
            output,
        } => {
            let cfg = load(&common)?;
            let values = values.unwrap_or_else(|| DEFAULT_ETA0_VALUES.to_vec());
            let table = ablation_eta0(&cfg, &values, !output.sequential)?;
            Ok((emit_table(&table, &output)?, common.strict))
        }
        Command::AblateBase {
            common,
            values,
            output,
        } => {
            let cfg = load(&common)?;
            let values = values.unwrap_or_else(|| DEFAULT_BASE_FACTORS.to_vec());
            let table = ablation_base_factor(&cfg, &values, !output.sequential)?;
            Ok((emit_table(&table, &output)?, common.strict))
        }
        Command::Rates {
            common,
            steps,
            seeds,
            json,
            sequential,
        } => {
            let cfg = load(&common)?;
            let report = rates(&cfg, &steps, seeds, !sequential)?;
            println!("steps,median_gap");
            for (t, g) in report.horizons.iter().zip(&report.median_gaps) {
                println!("{t},{g:.16e}");
            }
            println!(
                "# slope,{:.16e}\n# alpha_hat,{:.16e}",
                report.fit.slope, report.fit.alpha_hat
            );
            if let Some(path) = json {
                write(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            }
            let diverged = report.gaps.iter().flatten().any(|g| g.is_none());
            Ok((diverged, common.strict))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok((true, true)) => {
            eprintln!("error: divergence detected (--strict)");
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
