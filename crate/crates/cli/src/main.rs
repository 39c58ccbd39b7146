//! `stokesdiff`: simulate far-field Stokes-photon diffraction and run the
//! witness and metrology analyses from a unit-annotated TOML config.

mod commands;
mod config;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stokesdiff::export::ArtifactHeader;
use stokesdiff::ErrorCategory;

use crate::config::{parse_config, parse_override, RunConfig};
use crate::output::{Format, Output};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] stokesdiff::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 configuration, 3 domain, 4 numerical or failed check, 5 i/o.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Domain => 3,
                ErrorCategory::Numerical => 4,
                ErrorCategory::Io => 5,
            },
            CliError::Check(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stokesdiff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set geometry.fwhm="50 um"`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Global seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, default_value = "out", global = true)]
    out_dir: PathBuf,

    /// Image format; tables are always CSV.
    #[arg(long, value_enum, default_value = "both", global = true)]
    format: Format,

    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0, global = true)]
    threads: usize,

    /// Log verbosity: repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Diffraction image and peak/dip ratio.
    Diffract,
    /// Sum-rule entanglement witnesses, optional phase diagram and Dicke table.
    Witness,
    /// Gradient estimate from a displaced peak, or a sensitivity sweep.
    Gradiometer,
    /// Temperature from the decay of a displaced peak.
    Thermometry,
    /// Closed forms against brute-force quantum mechanics.
    OracleCheck {
        /// Largest number of spins (same as `--set oracle.max_n=N`).
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Batch run over one configuration key.
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Diffract => "diffract",
            Command::Witness => "witness",
            Command::Gradiometer => "gradiometer",
            Command::Thermometry => "thermometry",
            Command::OracleCheck { .. } => "oracle-check",
            Command::Sweep => "sweep",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let mut overrides = Vec::new();
    if let Some(s) = cli.seed {
        overrides.push(("seed".to_string(), toml::Value::Integer(s as i64)));
    }
    if let Command::OracleCheck { max_n: Some(n) } = cli.command {
        overrides.push(("oracle.max_n".to_string(), toml::Value::Integer(n as i64)));
    }
    for o in &cli.overrides {
        overrides.push(parse_override(o)?);
    }
    let cfg: RunConfig = parse_config(text.as_deref(), &overrides)?;

    let name = cli.command.name();
    let header = ArtifactHeader::new()
        .with("tool", format!("stokesdiff {}", env!("CARGO_PKG_VERSION")))
        .with("command", name)
        .with("config_sha256", cfg.digest())
        .with("seed", cfg.seed);
    let mut out = Output::new(&cli.out_dir, name, cli.format, header)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    let mut check = None;
    pool.install(|| -> Result<(), CliError> {
        match &cli.command {
            Command::Diffract => commands::diffract(&cfg, &mut out),
            Command::Witness => commands::witness(&cfg, &mut out),
            Command::Gradiometer => commands::gradiometer(&cfg, &mut out),
            Command::Thermometry => commands::thermometry(&cfg, &mut out),
            Command::OracleCheck { .. } => {
                check = Some(commands::oracle_check(&cfg, &mut out)?);
                Ok(())
            }
            Command::Sweep => {
                let mut table = config::load_table(text.as_deref())?;
                for (k, v) in &overrides {
                    config::set_path(&mut table, k, v.clone())?;
                }
                commands::sweep(&table, &cfg, &mut out)
            }
        }
    })?;
    let report = out.finish(&cfg.canonical())?;
    print!("{report}");
    if let Some(worst) = check {
        if !(worst < commands::ORACLE_TOL) {
            return Err(CliError::Check(format!(
                "oracle deviation {worst:.3e} exceeds {:e}",
                commands::ORACLE_TOL
            )));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
