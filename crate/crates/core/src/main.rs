use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use leakcast::config::{load_config, LoadedConfig, Seeds, DEFAULT_LEAKAGE_LEVELS};
use leakcast::report;
use leakcast::scenario::{run_scenario_with_defaults, spearman, ScenarioReport};
use leakcast::{selfcheck, Error};

/// Trace 5G out-of-band leakage at 23.8 GHz through radiance assimilation
/// into a toy forecast.
#[derive(Debug, Parser)]
#[command(name = "leakcast", version)]
struct Cli {
    /// Write CSV here instead of stdout; the summary then goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Debug logging, including minimizer iterations.
    #[arg(long, short, global = true)]
    verbose: bool,

    /// Replace all seeds: nature = n, obs_noise = n + 1, init = n + 2.
    #[arg(long, global = true, value_name = "N")]
    seed_override: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the leakage levels listed in the config.
    Run { config: PathBuf },
    /// Run a leakage sweep (the default 7 levels unless --levels is given).
    Sweep {
        config: PathBuf,
        /// Comma-separated ascending dBW levels.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        levels: Option<Vec<f64>>,
    },
    /// Induced noise temperature for -55..-15 dBW in 5 dB steps.
    NoiseTable {
        /// Take link, channel and antenna from this config instead of defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Check,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn load(path: &Path, seed_override: Option<u64>) -> leakcast::Result<LoadedConfig> {
    let mut loaded = load_config(path)?;
    if let Some(n) = seed_override {
        loaded.config.seeds = Seeds::from_override(n);
        loaded.defaulted.retain(|k| !k.starts_with("seeds."));
    }
    Ok(loaded)
}

fn execute(cli: &Cli) -> leakcast::Result<ExitCode> {
    match &cli.command {
        Command::Run { config } => {
            let loaded = load(config, cli.seed_override)?;
            let report = run_scenario_with_defaults(&loaded.config, loaded.defaulted)?;
            emit(cli, &report, false)?;
        }
        Command::Sweep { config, levels } => {
            let mut loaded = load(config, cli.seed_override)?;
            loaded.config.leakage_levels = levels
                .clone()
                .unwrap_or_else(|| DEFAULT_LEAKAGE_LEVELS.to_vec());
            loaded.config.validate()?;
            let report = run_scenario_with_defaults(&loaded.config, loaded.defaulted)?;
            emit(cli, &report, true)?;
        }
        Command::NoiseTable { config } => {
            let config = match config {
                Some(path) => load(path, cli.seed_override)?.config,
                None => Default::default(),
            };
            let rows = report::noise_table(
                &report::noise_table_levels(),
                &config.link_budget()?,
                &config.victim_channel(),
                &config.antenna_model()?,
            )?;
            write_output(cli.out.as_deref(), &report::noise_table_csv(&rows))?;
        }
        Command::Check => {
            let outcomes = selfcheck::run_checks();
            let mut stdout = io::stdout().lock();
            for o in &outcomes {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                writeln!(
                    stdout,
                    "{tag} {} ({}) [{:.2} s]",
                    o.name, o.detail, o.seconds
                )?;
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            writeln!(
                stdout,
                "{} of {} checks passed",
                outcomes.len() - failed,
                outcomes.len()
            )?;
            if failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_output(out: Option<&Path>, csv: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => io::stdout().lock().write_all(csv.as_bytes())?,
    }
    Ok(())
}

/// CSV to `--out` (summary on stdout) or CSV on stdout (summary on stderr).
fn emit(cli: &Cli, report: &ScenarioReport, with_rank: bool) -> leakcast::Result<()> {
    let mut summary = Vec::new();
    report::emit_summary(report, &mut summary)?;
    if with_rank && report.levels().len() >= 2 {
        let levels: Vec<f64> = report
            .levels()
            .iter()
            .filter_map(|r| r.leakage_dbw)
            .collect();
        let divergence: Vec<f64> = report
            .levels()
            .iter()
            .map(|r| r.lead_t_diff_rms_c)
            .collect();
        writeln!(
            summary,
            "rank correlation, level vs temperature divergence at lead {}: {:.4}",
            report.verification_lead,
            spearman(&levels, &divergence)
        )?;
    }
    match &cli.out {
        Some(path) => {
            report::emit_csv(report, path)?;
            io::stdout().lock().write_all(&summary)?;
        }
        None => {
            io::stdout()
                .lock()
                .write_all(report::csv_string(report).as_bytes())?;
            io::stderr().lock().write_all(&summary)?;
        }
    }
    Ok(())
}
