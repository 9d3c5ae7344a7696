//! Command-line front end for symmetry-driven focus detection.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};
use symfocus::report::ReportFormat;

use crate::commands::GenParams;
use crate::config::{Overrides, PipelineConfig};
use crate::error::CliError;

/// Finds the asymmetric focus in axial brain scans by symmetry-driven
/// clustering.
#[derive(Parser)]
#[command(name = "symfocus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cluster a scan's bright pixels and emit the selected model
    Segment(SegmentArgs),
    /// Estimate the sagittal midline and write the asymmetry map
    Analyze(AnalyzeArgs),
    /// Compare a test scan's channel totals against a baseline
    Report(ReportArgs),
    /// Generate or score synthetic phantom batches
    #[command(subcommand)]
    Phantom(PhantomCmd),
    /// Run detection end to end and write all artifacts
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Input scan (.pgm, .png, .dcm, .dicom)
    input: PathBuf,
    /// Write the model JSON here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Clustering seed
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest cluster count to try (at least 2)
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest cluster count to try
    #[arg(long)]
    k_max: Option<usize>,
    /// Intensity floor separating tissue from background
    #[arg(long)]
    background_threshold: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input scan (.pgm, .png, .dcm, .dicom)
    input: PathBuf,
    /// Directory receiving midline.json and asymmetry.pgm
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// JSON config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Intensity floor separating tissue from background
    #[arg(long)]
    background_threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for ReportFormat {
    fn from(f: OutputFormat) -> ReportFormat {
        match f {
            OutputFormat::Csv => ReportFormat::Csv,
            OutputFormat::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Test scan to summarize
    test: PathBuf,
    /// Baseline scan the ratios are taken against
    #[arg(long, value_name = "FILE")]
    baseline: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Lower edge of the expected intensity band
    #[arg(long)]
    band_lo: Option<f64>,
    /// Upper edge of the expected intensity band
    #[arg(long)]
    band_hi: Option<f64>,
}

#[derive(Subcommand)]
enum PhantomCmd {
    /// Write a seeded batch of phantoms and their ground truth
    Gen(PhantomGenArgs),
    /// Detect over a generated batch and score it against its ground truth
    Eval(PhantomEvalArgs),
}

#[derive(Args)]
struct PhantomGenArgs {
    /// Directory receiving specs.json and the phantom PGMs
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of phantoms; even indices are clean, odd ones lesioned
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Base seed for the batch
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pixel noise spread
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Fractional intensity drop inside a lesion, in [0, 1]
    #[arg(long, default_value_t = 0.4)]
    contrast: f64,
    /// Lesion radius in pixels, in [4, 30]
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Subtract a fixed amount inside the lesion instead of scaling
    #[arg(long)]
    additive: bool,
}

#[derive(Args)]
struct PhantomEvalArgs {
    /// Directory holding specs.json and the phantom PGMs
    dir: PathBuf,
    /// Write the accuracy JSON here instead of DIR/accuracy.json
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Clustering seed
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest cluster count to try (at least 2)
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest cluster count to try
    #[arg(long)]
    k_max: Option<usize>,
    /// Mean cluster asymmetry required to report a side
    #[arg(long)]
    tau_a: Option<f64>,
    /// Intensity floor separating tissue from background
    #[arg(long)]
    background_threshold: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Input scan (.pgm, .png, .dcm, .dicom)
    input: PathBuf,
    /// Directory receiving all artifacts
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// JSON config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Clustering seed
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest cluster count to try (at least 2)
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest cluster count to try
    #[arg(long)]
    k_max: Option<usize>,
    /// Mean cluster asymmetry required to report a side
    #[arg(long)]
    tau_a: Option<f64>,
    /// Out-of-band pixel share tolerated before the scan is flagged
    #[arg(long)]
    tau_b: Option<f64>,
    /// Intensity floor separating tissue from background
    #[arg(long)]
    background_threshold: Option<f64>,
    /// Lower edge of the expected intensity band
    #[arg(long)]
    band_lo: Option<f64>,
    /// Upper edge of the expected intensity band
    #[arg(long)]
    band_hi: Option<f64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Segment(a) => {
            let cfg = PipelineConfig::load(
                a.config.as_deref(),
                &Overrides {
                    seed: a.seed,
                    k_min: a.k_min,
                    k_max: a.k_max,
                    background_threshold: a.background_threshold,
                    ..Overrides::default()
                },
            )?;
            commands::segment(&a.input, a.out.as_deref(), &cfg)
        }
        Cmd::Analyze(a) => {
            let cfg = PipelineConfig::load(
                a.config.as_deref(),
                &Overrides { background_threshold: a.background_threshold, ..Overrides::default() },
            )?;
            commands::analyze(&a.input, &a.out, &cfg)
        }
        Cmd::Report(a) => {
            let cfg = PipelineConfig::load(
                a.config.as_deref(),
                &Overrides { band_lo: a.band_lo, band_hi: a.band_hi, ..Overrides::default() },
            )?;
            commands::report(&a.test, &a.baseline, a.format.into(), a.out.as_deref(), &cfg)
        }
        Cmd::Phantom(PhantomCmd::Gen(a)) => commands::phantom_gen(
            &a.out,
            &GenParams {
                count: a.count,
                seed: a.seed,
                sigma: a.sigma,
                contrast: a.contrast,
                radius: a.radius,
                additive: a.additive,
            },
        ),
        Cmd::Phantom(PhantomCmd::Eval(a)) => {
            let cfg = PipelineConfig::load(
                a.config.as_deref(),
                &Overrides {
                    seed: a.seed,
                    k_min: a.k_min,
                    k_max: a.k_max,
                    tau_a: a.tau_a,
                    background_threshold: a.background_threshold,
                    ..Overrides::default()
                },
            )?;
            commands::phantom_eval(&a.dir, a.out.as_deref(), &cfg)
        }
        Cmd::Pipeline(a) => {
            let cfg = PipelineConfig::load(
                a.config.as_deref(),
                &Overrides {
                    seed: a.seed,
                    k_min: a.k_min,
                    k_max: a.k_max,
                    tau_a: a.tau_a,
                    tau_b: a.tau_b,
                    background_threshold: a.background_threshold,
                    band_lo: a.band_lo,
                    band_hi: a.band_hi,
                },
            )?;
            commands::pipeline(&a.input, &a.out, &cfg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}
