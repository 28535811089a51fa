//! `pfbmux`: filter-bank spectrum multiplexer CLI.
//!
//! Exit codes: 0 success, 2 configuration/schema error, 3 numeric or
//! training failure, 4 file I/O error.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pfbmux_core::error::Error;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "pfbmux", version, about = "Polyphase filter-bank spectrum multiplexer")]
struct Cli {
    /// Experiment configuration (JSON)
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    /// Override the configured RNG seed
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads (falls back to env PFBMUX_THREADS, then all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the fixed prototypes and dump taps + frequency responses
    Design {
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train the synthesis prototype on dual-rate waveform pairs
    Train {
        /// Trained-filter JSON path (loss CSV written alongside)
        #[arg(long, default_value = "trained_filter.json")]
        out: PathBuf,
    },
    /// Multiplex the configured streams into one wideband capture
    Mux {
        /// Multiplexer: nnpfb, direct, or dft
        #[arg(long, default_value = "nnpfb")]
        method: String,
        /// Per-stream payload cf32 files, overriding the config paths
        #[arg(long = "in", value_name = "CF32")]
        inputs: Vec<PathBuf>,
        /// Wideband cf32 output path
        #[arg(long, default_value = "wideband.cf32")]
        out: PathBuf,
    },
    /// Mux -> AWGN sweep -> demux; emit per-stream NMSE/BER metrics CSV
    Eval {
        /// Metrics CSV path
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Time each multiplexer over a payload-size ladder
    Bench {
        /// Timing CSV path
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 4,
        Error::Training(_) | Error::Timing(_) | Error::UndefinedMetric(_) => 3,
        Error::Config(_) | Error::Dimension(_) | Error::Plan(_) | Error::Serde(_) => 2,
    }
}

fn init_threads(cli_threads: Option<usize>) -> Result<(), Error> {
    let n = match cli_threads {
        Some(n) => Some(n),
        None => match std::env::var("PFBMUX_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| Error::config(format!("PFBMUX_THREADS=`{v}` is not a number")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::config("thread count must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    init_threads(cli.threads)?;
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("--config <JSON> is required"))?;
    let cfg = ExperimentConfig::load(config_path)?;
    let config_dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();

    match &cli.command {
        Command::Design { out } => commands::cmd_design(&cfg, &config_dir, out),
        Command::Train { out } => commands::cmd_train(&cfg, out, cli.seed),
        Command::Mux { method, inputs, out } => {
            commands::cmd_mux(&cfg, &config_dir, method, inputs, out)
        }
        Command::Eval { out } => commands::cmd_eval(&cfg, &config_dir, out, cli.seed),
        Command::Bench { out } => commands::cmd_bench(&cfg, &config_dir, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
