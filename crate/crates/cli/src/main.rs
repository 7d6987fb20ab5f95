//! `skyrelay`: experiment harness for the UAV relay optimizer.
//!
//! Exit codes: 0 success, 1 configuration/usage/IO error, 2 infeasible,
//! 3 internal numeric failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skyrelay_core::config::preset;
use skyrelay_core::experiments::{
    run_sweep, summarize, trace_rows, write_results, write_summary, write_trace, SweepSpec, SweepVar,
};
use skyrelay_core::orchestrator::{run_algorithm1, RunStatus, SchemeId};
use skyrelay_core::{generate_scenario, Error, Result, SystemConfig};

#[derive(Debug, Parser)]
#[command(name = "skyrelay", version, about = "Joint UAV placement and resource allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the joint algorithm on one scenario and write its iteration trace.
    Converge {
        /// TOML configuration (defaults to the table2 preset).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario seed (overrides the configuration's rng_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Trace CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one configuration entry over a grid of values and seeds.
    Sweep {
        /// TOML configuration (defaults to the table2 preset).
        #[arg(long)]
        config: Option<PathBuf>,
        /// `VAR` or `VAR=v1,v2,...` with VAR one of num_users, power_budget,
        /// rho, network_size_D. Without values the default grid is used.
        #[arg(long)]
        grid: String,
        /// Comma-separated schemes (default: all).
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<SchemeId>>,
        /// First scenario seed (default: the configuration's rng_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds per grid value.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Results CSV path; the summary goes next to it as
        /// `<stem>_summary.csv`.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Record wall-clock time per run (makes output non-deterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Write a built-in configuration preset as documented TOML files.
    Presets {
        /// Preset name: table2 or video_scenarios.
        name: String,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Converge { config, seed, out } => converge(config.as_deref(), seed, out.as_deref()),
        Command::Sweep { config, grid, schemes, seed, seeds, workers, out, timing } => {
            sweep(config.as_deref(), &grid, schemes, seed, seeds, workers, &out, timing)
        }
        Command::Presets { name, out } => presets(&name, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig> {
    match path {
        Some(p) => SystemConfig::from_path(p),
        None => Ok(SystemConfig::table2()),
    }
}

fn converge(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut config = load_config(config)?;
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }
    let scenario = generate_scenario(&config)?;
    let result = run_algorithm1(&scenario)?;
    let rows = trace_rows(&result.trace);
    match out {
        Some(path) => write_trace(&rows, BufWriter::new(File::create(path)?))?,
        None => write_trace(&rows, std::io::stdout().lock())?,
    }
    if result.status != RunStatus::Converged {
        eprintln!(
            "warning: stopped after {} iterations with status {}",
            result.iterations,
            result.status.as_str()
        );
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<(SweepVar, Vec<f64>)> {
    let (name, values) = match text.split_once('=') {
        Some((name, values)) => (name, Some(values)),
        None => (text, None),
    };
    let var: SweepVar = name.trim().parse()?;
    let grid = match values {
        None => var.default_grid(),
        Some(values) => values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad grid value {v:?} for {}", var.as_str())))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok((var, grid))
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    out.with_file_name(format!("{stem}_summary.csv"))
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    config: Option<&Path>,
    grid: &str,
    schemes: Option<Vec<SchemeId>>,
    seed: Option<u64>,
    seeds: usize,
    workers: usize,
    out: &Path,
    timing: bool,
) -> Result<()> {
    let config = load_config(config)?;
    let (var, values) = parse_grid(grid)?;
    let schemes = schemes.unwrap_or_else(|| SchemeId::ALL.to_vec());
    let spec = SweepSpec::new(var, values, seed.unwrap_or(config.rng_seed), seeds, schemes)?;
    let rows = run_sweep(&config, &spec, workers, timing)?;
    write_results(&rows, BufWriter::new(File::create(out)?))?;
    let summary = summarize(&rows);
    write_summary(&summary, BufWriter::new(File::create(summary_path(out))?))?;
    let failed = rows.iter().filter(|r| r.avg_utility.is_none()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed; see the status column", rows.len());
    }
    Ok(())
}

fn presets(name: &str, out: &Path) -> Result<()> {
    let presets = preset(name)?;
    std::fs::create_dir_all(out)?;
    for p in presets {
        let path = out.join(format!("{}.toml", p.name));
        let mut file = BufWriter::new(File::create(&path)?);
        file.write_all(p.config.to_documented_toml(&format!("{}: {}", p.name, p.description)).as_bytes())?;
        file.flush()?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
