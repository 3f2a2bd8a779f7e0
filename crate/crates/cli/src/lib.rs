//! Config-driven front end for geomech.

pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod verify;

use std::io::Write;

use clap::{Parser, Subcommand};

pub use error::CliError;
pub use model::Model;

#[derive(Debug, Parser)]
#[command(name = "geomech", version, about = "Geometric Lagrangian mechanics on chart-described manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print metric, Christoffel symbols and every applicable field at a state.
    Derive {
        /// Config file, or the name of a bundled config.
        #[arg(long)]
        config: String,
        /// "q1,..,qn;qdot1,..,qdotn"; defaults to the integration start.
        #[arg(long)]
        state: Option<String>,
    },
    /// Integrate and write the trajectory as CSV.
    Simulate {
        #[arg(long)]
        config: String,
    },
    /// Check the identities and invariants that apply to the config.
    Verify {
        #[arg(long)]
        config: String,
    },
    /// Classify the configured reference frame.
    Frame {
        #[arg(long)]
        config: String,
    },
    /// List the bundled configs, or print one.
    Configs {
        name: Option<String>,
    },
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Derive { config, state } => {
            let model = Model::load(config)?;
            let state = match (state, &model.integration) {
                (Some(s), _) => model.parse_state(s)?,
                (None, Some(i)) => i.state0.clone(),
                (None, None) => return Err(CliError::config("--state", None, "no --state given and the config has no integration start")),
            };
            commands::derive(&model, &state, out)
        }
        Command::Simulate { config } => commands::simulate(&Model::load(config)?, out),
        Command::Verify { config } => verify::verify(&Model::load(config)?, out),
        Command::Frame { config } => commands::frame(&Model::load(config)?, out),
        Command::Configs { name: None } => {
            for (n, _) in config::BUNDLED {
                writeln!(out, "{n}")?;
            }
            Ok(())
        }
        Command::Configs { name: Some(n) } => match config::bundled(n) {
            Some(text) => Ok(write!(out, "{text}")?),
            None => Err(CliError::config(n, None, "not a bundled config")),
        },
    }
}
