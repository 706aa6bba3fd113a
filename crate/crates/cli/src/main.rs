use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Status;
use config::{read_config_file, RunConfig};

/// Price improvement of order-flow-auction trades against a router baseline.
///
/// Exit codes: 0 success, 1 success with excluded trades or rejected rows,
/// 2 fatal error.
#[derive(Parser, Debug)]
#[command(name = "ofapi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` config file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    trades: Option<PathBuf>,
    /// Recorded baseline quotes (replay provider)
    #[arg(long, global = true)]
    quotes: Option<PathBuf>,
    /// Pool snapshots per offset (synthetic router provider)
    #[arg(long, global = true)]
    pools: Option<PathBuf>,
    /// Provider to use when the quote file holds several
    #[arg(long, global = true)]
    provider_id: Option<String>,
    /// Calibration report (default: <out>/calibration.json)
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Inclusive offset range, e.g. -4..3
    #[arg(long, global = true, allow_hyphen_values = true)]
    offsets: Option<String>,
    /// Baseline priority fee, wei per gas
    #[arg(long, global = true)]
    f_prime_wei: Option<u128>,
    /// Rolling window size in trades
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Fail on the first malformed input row
    #[arg(long, global = true)]
    strict: bool,
    /// Use raw baseline gas estimates
    #[arg(long, global = true)]
    no_correction: bool,
    /// Systematic band uses beta1 +/- k * se
    #[arg(long, global = true)]
    sys_multiplier: Option<f64>,
    /// Path tag of the trades used for gas calibration
    #[arg(long, global = true)]
    calibration_source: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the baseline gas bias and write calibration.json
    Calibrate,
    /// Per-trade attribution CSV
    Analyze,
    /// Offset curves, rolling-by-size series and summary JSON
    Aggregate,
    /// Generate a synthetic dataset from a TOML scenario spec
    Synth {
        spec: PathBuf,
    },
    /// Aggregate plus a markdown report
    Report,
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            for (k, v) in read_config_file(path)? {
                cfg.apply(&k, &v)?;
            }
        }
        let flags: [(&str, Option<String>); 12] = [
            ("trades", self.trades.as_ref().map(|p| p.display().to_string())),
            ("quotes", self.quotes.as_ref().map(|p| p.display().to_string())),
            ("pools", self.pools.as_ref().map(|p| p.display().to_string())),
            ("provider_id", self.provider_id.clone()),
            ("calibration", self.calibration.as_ref().map(|p| p.display().to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("offsets", self.offsets.clone()),
            ("f_prime_wei", self.f_prime_wei.map(|v| v.to_string())),
            ("window", self.window.map(|v| v.to_string())),
            ("stride", self.stride.map(|v| v.to_string())),
            ("sys_multiplier", self.sys_multiplier.map(|v| v.to_string())),
            ("calibration_source", self.calibration_source.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.apply(k, &v)?;
            }
        }
        if self.strict {
            cfg.strict = true;
        }
        if self.no_correction {
            cfg.no_correction = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<Status> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Analyze => commands::analyze(&cfg),
        Command::Aggregate => commands::aggregate(&cfg).map(|a| a.status),
        Command::Report => commands::report(&cfg),
        Command::Synth { spec } => commands::synth(spec, &cfg.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
