use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use issc_cli::config::ExperimentConfig;
use issc_cli::runner::{run_music, run_sensing_ref, run_single, run_sweep, RunContext};
use issc_cli::CliError;

/// Integrated sensing and semantic communication experiments.
#[derive(Parser, Debug)]
#[command(name = "issc", version, about)]
struct Cli {
    /// Experiment mode.
    #[arg(value_enum)]
    mode: Mode,
    /// TOML configuration; omit (or point at an empty file) for the default
    /// 18-antenna experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel/randomization seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-iteration optimizer trace records.
    #[arg(long)]
    emit_trace: bool,
    /// Baseline variant for `bench` mode.
    #[arg(long, value_enum, default_value_t = BenchVariant::FixedRatio)]
    variant: BenchVariant,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Full semantic design at one budget point.
    Run,
    /// Budget sweep comparing the semantic design and the baseline.
    Sweep,
    /// Sensing-only reference beampattern design.
    SensingRef,
    /// Target detection check via the pseudospectrum.
    Music,
    /// Baseline design (extraction ratios pinned at 1).
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchVariant {
    /// Ratios pinned at one, everything else optimized.
    FixedRatio,
    /// Reserved: externally defined SINR-capped baseline.
    SinrCap,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    let emit_trace = cli.emit_trace || config.emit_trace;
    let ctx = RunContext {
        config,
        seed,
        out_dir,
        emit_trace,
    };
    match cli.mode {
        Mode::Run => run_single(&ctx, true),
        Mode::Bench => match cli.variant {
            BenchVariant::FixedRatio => run_single(&ctx, false),
            BenchVariant::SinrCap => Err(CliError::Config(
                "benchmark variant `sinr-cap` is not implemented; only the \
                 fixed-ratio baseline is available"
                    .into(),
            )),
        },
        Mode::Sweep => run_sweep(&ctx),
        Mode::SensingRef => run_sensing_ref(&ctx),
        Mode::Music => run_music(&ctx),
    }
}
