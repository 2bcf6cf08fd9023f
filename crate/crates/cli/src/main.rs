use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dmd_core::analysis::canonical_regularizer;
use dmd_core::experiment::Overrides;
use dmd_core::{preset, preset_catalog, run_experiment, verify_mirror_map_properties, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dmd", version, about = "Discounted mirror-descent experiments for concave games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML experiment config.
    Simulate(SimulateArgs),
    /// List the built-in presets as JSON.
    Catalog,
    /// Check the mirror-map properties of one regularizer kind.
    VerifyMaps(VerifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
}

/// Exit status for a finished `simulate`: runs completed, but one diverged.
const EXIT_DIVERGED: u8 = 2;

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is reserved for
    // divergent runs here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Catalog => {
            println!("{}", serde_json::to_string_pretty(&preset_catalog())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyMaps(args) => {
            let reg = canonical_regularizer(&args.kind, args.dim, args.epsilon)?;
            let report = verify_mirror_map_properties(&reg, args.samples, args.seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut cfg: ExperimentConfig = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        _ => bail!("pass exactly one of --preset or --config"),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        dt: args.dt,
        horizon: args.horizon,
        out: args.out,
    });
    let result = run_experiment(&cfg, None)?;
    let s = &result.summary;
    for run in &s.runs {
        let distance = run
            .verdict
            .target_distance
            .map_or_else(
                || "-".to_string(),
                |d| if d < 1e4 { format!("{d:.4}") } else { format!("{d:.3e}") },
            );
        let flag = match run.matches_expectation {
            Some(false) => "  (unexpected)",
            _ => "",
        };
        println!(
            "{:<28} {:<12} target distance {distance}{flag}",
            run.label,
            run.verdict.status.name()
        );
    }
    println!("wrote {}", result.dir.display());
    Ok(if s.any_diverged {
        ExitCode::from(EXIT_DIVERGED)
    } else {
        ExitCode::SUCCESS
    })
}
