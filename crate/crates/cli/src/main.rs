use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedspeech_core::arch::Precision;
use fedspeech_core::archcost::FlopConvention;
use fedspeech_core::config::{RunConfig, CONFIG_ENV};
use fedspeech_core::fedagg::AggregationMethod;
use fedspeech_core::trainprofile::{MixedScheme, Optimizer};
use fedspeech_core::{Error, ErrorClass};

mod commands;

/// Resource, device-time and federated-training estimates for
/// self-supervised speech encoders.
#[derive(Debug, Parser)]
#[command(name = "fedspeech", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Directory for report files (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for partitioning, scheduling and synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct WorkloadArgs {
    /// Preset name: base or large.
    #[arg(long)]
    arch: Option<String>,
    /// Utterance length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    batch: Option<u64>,
    /// fp32 or mixed.
    #[arg(long)]
    precision: Option<Precision>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-module parameters and forward FLOPs (modules.csv/json, layers.csv).
    Analyze {
        #[command(flatten)]
        workload: WorkloadArgs,
        /// layer_hooks or full.
        #[arg(long, value_parser = parse_convention)]
        convention: Option<FlopConvention>,
    },
    /// Forward-pass memory timeline and peak (memory.csv/json).
    Memory {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(long)]
        optimizer: Option<Optimizer>,
        #[arg(long)]
        mixed_scheme: Option<MixedScheme>,
        /// Also judge whether the peak fits on this device.
        #[arg(long)]
        device: Option<String>,
        /// Exit with code 4 when the verdict is oom.
        #[arg(long, requires = "device")]
        fail_on_oom: bool,
    },
    /// Predicted seconds per batch on one or more devices (predict_time.csv/json).
    PredictTime {
        #[command(flatten)]
        workload: WorkloadArgs,
        /// Device keys; all measured devices when omitted.
        #[arg(long = "device")]
        devices: Vec<String>,
    },
    /// Partition, schedule and federated wall-clock / traffic estimate.
    FlPlan {
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        clients: Option<usize>,
        #[arg(long)]
        per_round: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        batch: Option<u64>,
        #[arg(long)]
        precision: Option<Precision>,
        #[arg(long)]
        local_epochs: Option<u32>,
        /// Device key for every client (see `fl.devices` for mixed fleets).
        #[arg(long)]
        device: Option<String>,
        /// Manifest TSV; a generated corpus-scale manifest when omitted.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Synthetic quadratic federated run (trajectory.csv, fl_sim.json).
    FlSim {
        /// fedavg or loss.
        #[arg(long)]
        agg: Option<AggregationMethod>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        clients: Option<usize>,
        #[arg(long)]
        per_round: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        /// Offset of client 0's optimum from the population center.
        #[arg(long)]
        outlier: Option<f64>,
    },
    /// Year a slower device reaches a reference under compute doubling.
    Forecast {
        #[arg(long)]
        device: Option<String>,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        batch: Option<u64>,
        #[arg(long)]
        precision: Option<Precision>,
        #[arg(long)]
        doubling_months: Option<f64>,
        #[arg(long)]
        base_year: Option<f64>,
    },
    /// Run every reference-value check and print a pass/fail table.
    Reproduce,
    /// Write a generated manifest TSV.
    Synth {
        #[arg(long, default_value_t = 195_000)]
        utterances: usize,
        #[arg(long, default_value_t = 6_000)]
        speakers: usize,
        #[arg(long, default_value_t = 5.5)]
        mean_duration: f64,
        /// Output file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Convert a Common Voice validated.tsv into a manifest TSV.
    ConvertCv {
        #[arg(long)]
        validated: PathBuf,
        /// clip_durations.tsv with `clip` and `duration[ms]` columns.
        #[arg(long)]
        clip_durations: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_convention(s: &str) -> Result<FlopConvention, String> {
    match s {
        "layer_hooks" | "layer-hooks" => Ok(FlopConvention::LayerHooks),
        "full" => Ok(FlopConvention::Full),
        other => Err(format!("unknown convention '{other}' (layer_hooks, full)")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Data => 3,
        ErrorClass::Infeasible => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::discover(cli.config.as_deref()).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.output_dir = out.clone();
        }
        commands::run(cli.command, cfg)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
