use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harmshift::config::{ChannelSet, Method, RunConfig};
use harmshift::pipeline::{self, Layout};
use harmshift::Error;

/// Speed- and load-robust bearing fault features.
#[derive(Debug, Parser)]
#[command(name = "harmshift", version)]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// FFT, HFFT, HAR or HARH.
    #[arg(long, global = true)]
    method: Option<String>,
    /// A1, A2 or A1+A2.
    #[arg(long, global = true)]
    channels: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root (overrides `paths.out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fit the adjustment on faulty rows too.
    #[arg(long, global = true)]
    allow_mixed_training: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Synth,
    /// Extract features for the configured method and channel set.
    Extract,
    /// Fit the condition adjustment and write the adjusted store.
    Adjust {
        /// Leave this bearing out of the fit.
        #[arg(long)]
        test_bearing: Option<String>,
    },
    /// Evaluate on unseen bearings at the held-out conditions.
    Eval,
    /// Compare finished runs (all runs under the output root by default).
    Report { run_dirs: Vec<PathBuf> },
}

fn load_config(cli: &Cli) -> harmshift::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &cli.method {
        cfg.method = m.parse::<Method>()?;
    }
    if let Some(c) = &cli.channels {
        cfg.channels = c.parse::<ChannelSet>()?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> harmshift::Result<()> {
    let cfg = load_config(cli)?;
    let layout = Layout::new(&cfg.paths.out);
    match &cli.command {
        Command::Synth => {
            println!("{}", pipeline::cmd_synth(&cfg, &layout)?.display());
        }
        Command::Extract => {
            println!("{}", pipeline::cmd_extract(&cfg, &layout)?.display());
        }
        Command::Adjust { test_bearing } => {
            let outcome = pipeline::cmd_adjust(
                &cfg,
                &layout,
                test_bearing.as_deref(),
                cli.allow_mixed_training,
            )?;
            println!("{}", outcome.model_path.display());
            println!("{}", outcome.store_path.display());
        }
        Command::Eval => {
            let report = pipeline::cmd_eval(&cfg, &layout, cli.allow_mixed_training)?;
            print!("{}", report.to_markdown());
        }
        Command::Report { run_dirs } => {
            let dirs = if run_dirs.is_empty() {
                pipeline::finished_runs(&layout)
            } else {
                run_dirs.clone()
            };
            let comparison = pipeline::cmd_report(&dirs, &layout.comparison_dir())?;
            if let Some(w) = &comparison.warning {
                eprintln!("warning: {w}");
            }
            print!("{}", comparison.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for configuration problems, 3 for data problems.
fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else {
        3
    }
}
