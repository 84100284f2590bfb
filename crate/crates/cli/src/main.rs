//! `camsim`: command-line front end of the CAM similarity-search simulator.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use camsim::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "camsim",
    version,
    about = "Behavioral CAM similarity-search simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Configuration override, e.g. `--set array.rows=256`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Write the JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed of every random stream in the run.
    #[arg(long, global = true, env = "CAMSIM_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the built-in technology profiles or print one.
    Profiles {
        /// Print this profile in profile-file syntax.
        #[arg(long, value_name = "NAME")]
        dump: Option<String>,
    },
    /// Fixed-radius search on one array configuration.
    Search(SearchArgs),
    /// Minimum detectable distance table as CSV.
    Mdd(MddArgs),
    /// Delay-separation points, or skew against array height with `--skew`.
    Curve(CurveArgs),
    /// Table of search quality, energy and delay across array sizes and mitigations.
    Sweep(SweepArgs),
    /// Search a categorical CSV dataset with its own rows as queries.
    Dataset(DatasetArgs),
    /// Candidate generation for next-item recommendation.
    Recsys(RecsysArgs),
    /// Fit profile parameters to skew or energy targets.
    Calibrate {
        #[command(subcommand)]
        target: CalibrateTarget,
    },
}

#[derive(Args, Debug, Default)]
pub struct SearchArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub mitigation: Option<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// ideal, fixed or matched.
    #[arg(long)]
    pub clock: Option<String>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    /// Stored bit vectors (text or packed `.bin`).
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Query bit vectors, same formats as `--data`.
    #[arg(long, value_name = "PATH")]
    pub queries_file: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Write one JSON line per query and trial.
    #[arg(long, value_name = "PATH")]
    pub outcomes: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct MddArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub mitigation: Option<String>,
    #[arg(long)]
    pub hmax: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct CurveArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Emit skew percentage against row count instead.
    #[arg(long)]
    pub skew: bool,
    /// Row counts of the skew curve.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    #[arg(long)]
    pub hdist: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub profile: Option<String>,
    /// Row counts, e.g. `64,128,256`.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    /// Mitigations, e.g. `baseline,s2x,clkmatch`.
    #[arg(long, value_delimiter = ',')]
    pub mitigations: Vec<String>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct DatasetArgs {
    /// CSV with a header row; a synthetic housing table when omitted.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub mitigations: Vec<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct RecsysArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub mitigations: Vec<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Item embeddings (CSV or little-endian f32 `.bin`).
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Test instances as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub instances: Option<PathBuf>,
    /// Number of synthetic test instances.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum CalibrateTarget {
    /// Solve for searchline RC or IR drop from a skew target.
    Skew {
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        /// Delay increase from nearest to farthest row, percent.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        hdist: Option<usize>,
        /// rc or ir (default: ir for SOT, rc otherwise).
        #[arg(long)]
        mechanism: Option<String>,
        /// Write the fitted profile here.
        #[arg(long, value_name = "PATH")]
        write: Option<PathBuf>,
    },
    /// Linear energy-per-search fit.
    Energy {
        /// `rows:pJ` pairs, e.g. `64:1.88,128:3.55,256:7.16`.
        #[arg(long, value_delimiter = ',')]
        points: Vec<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::UnknownProfile(_)
        | Error::ProfileSyntax { .. }
        | Error::InvalidProfile { .. }
        | Error::Precondition(_) => 2,
        Error::Io { .. }
        | Error::WidthMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::ValueOutOfRange { .. }
        | Error::Data(_) => 3,
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| info.payload().downcast_ref::<String>().cloned())
            .unwrap_or_default();
        let at = info
            .location()
            .map(|l| format!(" at {}:{}", l.file(), l.line()))
            .unwrap_or_default();
        eprintln!("camsim: internal error{at}: {}", msg.replace('\n', " "));
    }));
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("camsim: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("camsim: {}", e.to_string().replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(4),
    }
}
