//! Command-line front end: subcommand grammar, config resolution, exit
//! codes and the drivers shared with the acceptance suite.

pub mod benchmark;
pub mod checks;
pub mod commands;
pub mod config;
pub mod exit;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rrcnn_core::kv::KvMap;
use rrcnn_core::{Error, Result};

use config::{Layers, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "rrcnn", version, about = "Recurrent-residual networks for SAR deforestation change detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene, its labels and a provenance record.
    Synth(RunArgs),
    /// Train one checkpoint per selected fold.
    Train(RunArgs),
    /// Predict the test tiles of each selected fold and assemble the mosaic.
    Predict(RunArgs),
    /// Score stored predictions: confusion CSV, report and change map.
    Evaluate(RunArgs),
    /// Render the change map of a stored prediction mosaic.
    Render(RenderArgs),
    /// Parameter counts of every architecture against the published ones.
    Params(ParamsArgs),
    /// Finite-difference gradient checks of every layer and architecture.
    Gradcheck(GradcheckArgs),
    /// Multitemporal versus bitemporal comparison on synthetic scenes.
    Benchmark(BenchmarkArgs),
}

/// Options shared by the pipeline commands. Named flags are shortcuts for
/// `--set`; when both are given the named flag wins.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key = value file layered over the defaults.
    #[arg(long, short = 'c', value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub arch: Option<String>,
    /// bitemporal or multitemporal.
    #[arg(long)]
    pub mode: Option<String>,
    /// Fold index or "all".
    #[arg(long)]
    pub fold: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Single-threaded numerics and zeroed timings, for byte-identical reruns.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// PNG path; defaults to `<out>/changemap.png`.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamsArgs {
    /// Also write params.csv and reconciliation.md here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the full reconciliation report.
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// One architecture; all six when omitted.
    #[arg(long)]
    pub arch: Option<String>,
    /// Divide every layer width by this factor.
    #[arg(long, default_value_t = 4)]
    pub width_divisor: usize,
    #[arg(long, default_value_t = checks::NETWORK_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Skip the per-layer suite.
    #[arg(long)]
    pub no_layers: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated scene seeds.
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Comma-separated architectures; all six when omitted.
    #[arg(long, value_delimiter = ',')]
    pub archs: Vec<String>,
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, default_value_t = 4)]
    pub width_divisor: usize,
    #[arg(long, default_value_t = 20)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub recovery_db: f64,
    /// Training window stride in pixels.
    #[arg(long, default_value_t = 16)]
    pub train_stride: usize,
    #[arg(long, default_value = "benchmark")]
    pub out: PathBuf,
}

impl RunArgs {
    /// Flag layer: `--set` pairs first, then the named shortcuts.
    pub fn flag_layer(&self) -> Result<KvMap> {
        let mut m = KvMap::new();
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
            let parsed = KvMap::parse(&format!("{} = {}", k.trim(), v.trim()))?;
            m.overlay(&parsed);
        }
        let named = [
            ("arch", self.arch.clone()),
            ("mode", self.mode.clone()),
            ("fold", self.fold.clone()),
            ("seed", self.seed.map(|s| s.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("threads", self.threads.map(|t| t.to_string())),
            ("deterministic", self.deterministic.then(|| "true".to_string())),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                m.set(k, v);
            }
        }
        Ok(m)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            config::require_file(path, "config file")?;
        }
        config::resolve(&Layers {
            file: self.config.clone(),
            env: Layers::env_from_process(),
            flags: self.flag_layer()?,
        })
    }
}

/// Parse `args` and run the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return exit::SUCCESS;
            }
            eprint!("{e}");
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            eprintln!("{}", exit::reason_line(exit::USAGE, "usage", &first));
            return exit::USAGE;
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            let (code, kind) = exit::classify(&e);
            eprintln!("{}", exit::reason_line(code, kind, &e.to_string()));
            code
        }
    }
}
