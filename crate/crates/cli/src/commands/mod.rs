mod pipeline;
pub mod reports;

pub use pipeline::CONFUSION_HEADER;

use rrcnn_core::par;
use rrcnn_core::Result;

use crate::config::RunConfig;
use crate::Command;

/// Thread and determinism settings take effect before any numerics run.
fn apply_runtime(cfg: &RunConfig) {
    if cfg.deterministic {
        par::set_deterministic(true);
    }
    if cfg.threads > 0 && !par::init_threads(cfg.threads) {
        eprintln!("note: thread count {} not applied (pool already running or sequential build)", cfg.threads);
    }
}

pub fn dispatch(command: &Command) -> Result<()> {
    let pipeline = |args: &crate::RunArgs| -> Result<RunConfig> {
        let cfg = args.resolve()?;
        apply_runtime(&cfg);
        Ok(cfg)
    };
    match command {
        Command::Synth(a) => pipeline::synth(&pipeline(a)?),
        Command::Train(a) => pipeline::train(&pipeline(a)?),
        Command::Predict(a) => pipeline::predict(&pipeline(a)?),
        Command::Evaluate(a) => pipeline::evaluate(&pipeline(a)?),
        Command::Render(a) => pipeline::render(&pipeline(&a.run)?, a.output.as_deref()),
        Command::Params(a) => reports::params(a),
        Command::Gradcheck(a) => reports::gradcheck(a),
        Command::Benchmark(a) => reports::benchmark(a),
    }
}
