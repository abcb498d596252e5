use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use octd_core::{SmoothMode, WindowSpec};

mod commands;
mod report;

/// Despeckle OCT B-scans with cluster-masked adaptive Wiener filtering.
#[derive(Debug, Parser)]
#[command(name = "octd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic layered phantom: <prefix>_noisy.raw, <prefix>_clean.raw, <prefix>_truth.pgm.
    Phantom(PhantomArgs),
    /// Filter one image with CFF or the baseline Wiener filter.
    Despeckle(DespeckleArgs),
    /// Append one metrics row per image to a CSV table.
    Metrics(MetricsArgs),
    /// Run both filters and tabulate metrics for original, Wiener and CFF.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct PhantomArgs {
    /// Phantom description (JSON).
    #[arg(required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Output prefix.
    #[arg(long, short)]
    out: PathBuf,
    /// Built-in phantom instead of a JSON spec.
    #[arg(long, value_enum, conflicts_with = "spec")]
    preset: Option<Preset>,
    /// Preset image height.
    #[arg(long, default_value_t = 400, requires = "preset")]
    rows: usize,
    /// Preset image width.
    #[arg(long, default_value_t = 300, requires = "preset")]
    cols: usize,
    /// Override the RNG seed from the description.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Four TiO2 layers, surface reduced scattering 1.08, 0.55, 1.90, 1.36 /cm.
    FourLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Cff,
    Wiener,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Smooth {
    Max,
    Majority,
}

impl From<Smooth> for SmoothMode {
    fn from(s: Smooth) -> Self {
        match s {
            Smooth::Max => SmoothMode::Max,
            Smooth::Majority => SmoothMode::Majority,
        }
    }
}

/// Pipeline settings. Flags override `--config`, which overrides defaults.
#[derive(Debug, Clone, Default, Args)]
struct RunFlags {
    /// JSON file with any RunConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Window as N1xN2 (odd sizes), or N for square.
    #[arg(long)]
    window: Option<WindowSpec>,
    /// Attenuation feature weight.
    #[arg(long)]
    w1: Option<f64>,
    /// Intensity feature weight.
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long, value_enum)]
    smooth: Option<Smooth>,
    /// Pixels sampled for Ward clustering.
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed Wiener noise variance instead of the mean local variance.
    #[arg(long)]
    noise_var: Option<f64>,
}

#[derive(Debug, Args)]
struct DespeckleArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum, default_value = "cff")]
    method: Method,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Reference image for EPI and SSIM.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// ROI list: first line is the background, the rest are CNR regions.
    #[arg(long)]
    roi: Option<PathBuf>,
    /// CSV file to append to (stdout if absent).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Comma-separated subset of snr,cnr,epi,ssim (default: all with --ref, else snr,cnr).
    #[arg(long)]
    metrics: Option<String>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    input: PathBuf,
    /// Reference image; defaults to the sibling *_clean file of a *_noisy input.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    roi: Option<PathBuf>,
    /// CSV output (stdout if absent).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also evaluate w1 = 0.0, 0.1, ..., 1.0 with w2 = 1 - w1.
    #[arg(long)]
    sweep_weights: bool,
    /// Directory for sweep label maps.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    run: RunFlags,
}

fn init_threads() -> Result<(), commands::CliError> {
    let Ok(raw) = std::env::var("OCTD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        commands::CliError::usage(format!("OCTD_THREADS must be an integer, got {raw:?}"))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| commands::CliError::internal(e.into()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Phantom(a) => commands::phantom(a),
        Command::Despeckle(a) => commands::despeckle(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Compare(a) => commands::compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("octd: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
