//! Thin command-line wrapper around the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lprank::dataset::{generate_synthetic, save_dataset, SyntheticSpec};
use lprank::harness::{
    run_ablation, run_experiment, sweep_fps, sweep_tau, trace_rank_accuracy, ExperimentConfig,
};
use lprank::ssl::Method;
use lprank::Error;

#[derive(Parser)]
#[command(
    name = "lprank",
    about = "Semi-supervised video-quality regression experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest CSV.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of train/test splits.
    #[arg(long)]
    seeds: Option<usize>,
    /// Labelled-set sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<usize>>,
    /// Methods to run, comma separated (supervised,lpr,pl,mt,ns,fmstar).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Parallel runs; 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

impl CommonArgs {
    fn experiment(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(manifest) = &self.manifest {
            cfg.manifest = Some(manifest.clone());
            cfg.synthetic = None;
        }
        if let Some(seeds) = self.seeds {
            cfg.num_splits = seeds;
        }
        if let Some(labels) = &self.labels {
            cfg.labels = labels.clone();
        }
        if let Some(methods) = &self.methods {
            cfg.methods = methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<Vec<_>, Error>>()?;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate the requested methods over the split grid.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the pseudo-rank gate threshold (LPR only).
    SweepTau {
        #[command(flatten)]
        common: CommonArgs,
        /// Thresholds to evaluate, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.3")]
        taus: Vec<f64>,
    },
    /// Sweep the strong-augmentation frame rate (LPR only).
    SweepFps {
        #[command(flatten)]
        common: CommonArgs,
        /// Frame rates to evaluate, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
        fps: Vec<f64>,
    },
    /// Run the five-variant component ablation.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Log median pseudo-rank accuracy at every refresh.
    TraceRankAcc {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a synthetic dataset and write it as feature files.
    SynthGen {
        /// Output directory for manifest and feature files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1200)]
        videos: usize,
        #[arg(long, default_value_t = 32)]
        frame_dim: usize,
        #[arg(long, default_value_t = 8)]
        video_dim: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Clip duration in seconds.
        #[arg(long, default_value_t = 8.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { common } => {
            let cfg = common.experiment()?;
            let rows = run_experiment(&cfg, &common.out)?;
            println!(
                "wrote {} run rows to {}",
                rows.len(),
                common.out.join("results.csv").display()
            );
        }
        Command::SweepTau { common, taus } => {
            let cfg = common.experiment()?;
            let curve = sweep_tau(&cfg, &taus, &common.out)?;
            println!(
                "wrote {} sweep points to {}",
                curve.len(),
                common.out.join("sweep_tau.csv").display()
            );
        }
        Command::SweepFps { common, fps } => {
            let cfg = common.experiment()?;
            let curve = sweep_fps(&cfg, &fps, &common.out)?;
            println!(
                "wrote {} sweep points to {}",
                curve.len(),
                common.out.join("sweep_fps.csv").display()
            );
        }
        Command::Ablate { common } => {
            let cfg = common.experiment()?;
            let rows = run_ablation(&cfg, &common.out)?;
            println!(
                "wrote {} ablation rows to {}",
                rows.len(),
                common.out.join("ablation.csv").display()
            );
        }
        Command::TraceRankAcc { common } => {
            let cfg = common.experiment()?;
            let trace = trace_rank_accuracy(&cfg, &common.out)?;
            println!(
                "wrote {} trace points to {}",
                trace.len(),
                common.out.join("rank_accuracy.csv").display()
            );
        }
        Command::SynthGen {
            out,
            videos,
            frame_dim,
            video_dim,
            fps,
            duration,
            noise,
            seed,
        } => {
            let spec = SyntheticSpec {
                n_videos: videos,
                frame_dim,
                video_dim,
                fps,
                duration,
                noise_scale: noise,
                seed,
            };
            let records = generate_synthetic(&spec)?;
            let manifest = save_dataset(&records, &out)?;
            println!("wrote {} videos to {}", records.len(), manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::UnknownMethod(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
