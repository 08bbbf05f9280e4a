use beamtrack_cli::commands::{
    cmd_eval, cmd_mc, cmd_odometry, cmd_run, cmd_simulate, cmd_track, PoseSource,
};
use beamtrack_cli::config::RunConfig;
use beamtrack_cli::exit_code;
use beamtrack::error::Error;
use beamtrack::tracker::InnovationMode;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, ValueEnum)]
#[clap(rename_all = "kebab-case")]
enum InnovationArg {
    Ekf,
    PaperLiteral,
}

impl From<InnovationArg> for InnovationMode {
    fn from(v: InnovationArg) -> Self {
        match v {
            InnovationArg::Ekf => InnovationMode::Ekf,
            InnovationArg::PaperLiteral => InnovationMode::PaperLiteral,
        }
    }
}

/// Radar-odometry-aided mmWave beam tracking workbench.
#[derive(Parser)]
#[command(name = "beamtrack", version, about)]
struct Cli {
    /// Configuration file (JSON); defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic world into scan files and a ground-truth CSV.
    Simulate {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a trajectory from a directory of scan files.
    Odometry {
        /// Directory of .rscn scan files (lexicographic order).
        #[arg(long)]
        scans: PathBuf,
        /// Output trajectory CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track the channel along a trajectory.
    Track {
        /// Ground-truth trajectory CSV.
        #[arg(long)]
        gt: PathBuf,
        /// Estimated trajectory CSV (pose source `odometry`).
        #[arg(long)]
        est: Option<PathBuf>,
        /// Where the tracker's pose estimates come from.
        #[arg(long, value_enum, default_value_t = PoseSource::GtNoise)]
        pose_source: PoseSource,
        /// Innovation form of the posterior update.
        #[arg(long, value_enum)]
        innovation: Option<InnovationArg>,
        /// Output directory (timeline.csv, tracking_report.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an estimated trajectory against ground truth.
    Eval {
        /// Estimated trajectory CSV.
        #[arg(long)]
        est: PathBuf,
        /// Ground-truth trajectory CSV.
        #[arg(long)]
        gt: PathBuf,
        /// Output report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo aggregation of gt-noise tracking replicates.
    Mc {
        /// Number of independent replicates.
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        /// Output report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full chain: simulate, odometry, track, eval.
    Run {
        /// Output directory for all artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Where the tracker's pose estimates come from.
        #[arg(long, value_enum, default_value_t = PoseSource::Odometry)]
        pose_source: PoseSource,
        /// Innovation form of the posterior update.
        #[arg(long, value_enum)]
        innovation: Option<InnovationArg>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate { out } => {
            let summary = cmd_simulate(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary"));
        }
        Command::Odometry { scans, out } => {
            let summary = cmd_odometry(&scans, &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary"));
        }
        Command::Track {
            gt,
            est,
            pose_source,
            innovation,
            out,
        } => {
            if let Some(mode) = innovation {
                cfg.tracker.innovation = mode.into();
            }
            let summary = cmd_track(&gt, pose_source, est.as_deref(), &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary"));
        }
        Command::Eval { est, gt, out } => {
            let report = cmd_eval(&est, &gt, &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
        }
        Command::Mc { replicates, out } => {
            let report = cmd_mc(&cfg, replicates, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
        }
        Command::Run {
            out,
            pose_source,
            innovation,
        } => {
            if let Some(mode) = innovation {
                cfg.tracker.innovation = mode.into();
            }
            let summary = cmd_run(&cfg, &out, pose_source)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary"));
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(exit_code(&err));
    }
}
