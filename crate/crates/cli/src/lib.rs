//! Command-line front end for the feature-weighted elastic net.

pub mod args;
pub mod commands;
pub mod document;
pub mod error;

pub use args::{Cli, Command};
pub use document::ModelDocument;
pub use error::{CliError, CliResult};

/// Run a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Cv(a) => commands::cv(a),
        Command::Predict(a) => commands::predict(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Multitask(a) => commands::multitask(a),
        Command::Weights(a) => commands::weights(a),
    }
}
