//! Command-line front end: one subcommand per pipeline stage plus an
//! end-to-end `pipeline` driven by a JSON config.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use cli::{Cli, Command};
pub use config::{PipelineConfig, StreamConfig, StreamSource};
pub use error::{CliError, ExitKind};
pub use pipeline::{run_pipeline, PipelineOptions, PipelineOutcome};

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::GenSynth(a) => commands::gen_synth(a, quiet),
        Command::Encode(a) => commands::encode(a),
        Command::TrainSvm(a) => commands::train_svm(a),
        Command::Predict(a) => commands::predict(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Eval(a) => commands::eval(a, quiet),
        Command::Pipeline(a) => commands::pipeline(a, quiet),
    }
}
