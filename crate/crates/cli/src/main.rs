//! `csistat`: batch front-end for the CSI statistics pipeline.
//!
//! Every subcommand writes plot-ready CSV plus a JSON sidecar into the
//! output directory. Exit codes: 0 success, 1 validation or parse error,
//! 2 numeric or degenerate input, 3 I/O.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "CSI_STAT_OUT";

#[derive(Debug, Parser)]
#[command(name = "csistat", version, about = "Wi-Fi CSI amplitude statistics: normalization, increment models, quantization, WHD and MI")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// re0,im0,re1,im1,…
    Interleaved,
    /// re0…reN−1,im0…imN−1
    Paired,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for synthetic generation.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Increment quantization bits.
    #[arg(long = "q-inc", global = true, default_value_t = 4, value_parser = clap::value_parser!(u32).range(3..=5))]
    pub q_inc: u32,
    /// Use δ* = 3σ instead of the tail-budget rule.
    #[arg(long = "fixed-3-sigma", global = true)]
    pub fixed_3_sigma: bool,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (overridden by CSI_STAT_OUT).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Trace files carry one header row.
    #[arg(long, global = true)]
    pub header: bool,
    /// Complex column layout of trace files.
    #[arg(long, global = true, value_enum, default_value_t = Layout::Interleaved)]
    pub layout: Layout,
    /// Print matrix values as the first three decimals, as integers.
    #[arg(long = "thesis-style", global = true)]
    pub thesis_style: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace + metadata → quantized trace, increment model and stage report.
    Pipeline(PipelineArgs),
    /// Normalized average WHD matrix over quantized experiments.
    Distance(DistanceArgs),
    /// Histogram of per-frame normalized WHD against a reference.
    Hist(HistArgs),
    /// Amplitude and increment autocorrelation of one sub-carrier.
    Autocorr(AutocorrArgs),
    /// Two amplitude matrices and their difference.
    Heatmap(HeatmapArgs),
    /// Internal or external MI on a reduced alphabet.
    Mi(MiArgs),
    /// Synthetic multi-scenario corpus from the increment random walk.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// CSV trace of complex samples.
    #[arg(long)]
    pub trace: PathBuf,
    /// Experiment metadata JSON.
    #[arg(long)]
    pub metadata: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Quantized experiment files, in report order.
    #[arg(required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Quantized experiment whose frames are measured.
    #[arg(long)]
    pub input: PathBuf,
    /// Experiment providing the reference CSI (default: the input itself).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = csistat::distance::DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct AutocorrArgs {
    /// Quantized experiment.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub subcarrier: usize,
    #[arg(long = "max-lag", default_value_t = 20)]
    pub max_lag: usize,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    /// Quantized experiment providing the reference and model.
    #[arg(long)]
    pub reference: PathBuf,
    /// Increment model JSON of the reference experiment.
    #[arg(long)]
    pub model: PathBuf,
    /// Other experiment for external MI (omit for internal MI).
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Low bits dropped from each amplitude level.
    #[arg(long, default_value_t = 1)]
    pub r: u32,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long = "n-sc", default_value_t = 256)]
    pub n_sc: usize,
    #[arg(long, default_value_t = 2000)]
    pub frames: usize,
    #[arg(long = "q-amp", default_value_t = 10)]
    pub q_amp: u32,
    /// Level offset between scenario references.
    #[arg(long, default_value_t = 100)]
    pub separation: u32,
    /// Increment spread per scenario, in amplitude levels.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 3.0, 8.0])]
    pub sigma: Vec<f64>,
    /// Experiments per scenario.
    #[arg(long = "per-scenario", default_value_t = 1)]
    pub per_scenario: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs {n}: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
