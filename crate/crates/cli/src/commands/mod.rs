//! Subcommand definitions and dispatch.

mod embed;
mod evaluate;
mod score;
mod synth;
mod train;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use siamrae_core::siamese::LossKind;

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "siamrae",
    version,
    about = "Siamese recurrent autoencoder embeddings for phone segments, \
             with cosine-distance detection of atypical pronunciations"
)]
pub struct Cli {
    /// Cap worker threads for embedding extraction (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic segment corpus.
    Synth(synth::SynthArgs),
    /// Train a Siamese recurrent autoencoder.
    Train(train::TrainArgs),
    /// Extract embeddings for a segment set.
    Embed(embed::EmbedArgs),
    /// Score test segments against a reference pool.
    Score(score::ScoreArgs),
    /// Compute average precision and precision-recall reports.
    Evaluate(evaluate::EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Contrastive,
    Triplet,
}

impl From<LossArg> for LossKind {
    fn from(v: LossArg) -> Self {
        match v {
            LossArg::Contrastive => LossKind::Contrastive,
            LossArg::Triplet => LossKind::Triplet,
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if cli.threads > 0 {
        // Ignore "already initialized" when run() is invoked twice in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Train(args) => train::run(args),
        Command::Embed(args) => embed::run(args),
        Command::Score(args) => score::run(args),
        Command::Evaluate(args) => evaluate::run(args),
    }
}

/// Wrapper serialized as `config.resolved.toml` next to every output.
#[derive(Debug, Serialize)]
pub(crate) struct Resolved<T: Serialize> {
    pub tool_version: String,
    pub command: String,
    #[serde(flatten)]
    pub body: T,
}

pub(crate) fn write_resolved_config<T: Serialize>(
    out_dir: &std::path::Path,
    command: &str,
    body: T,
) -> CliResult<()> {
    let resolved = Resolved {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        body,
    };
    let text = toml::to_string(&resolved)
        .map_err(|e| crate::CliError::Data(anyhow::anyhow!("serializing config: {e}")))?;
    std::fs::write(out_dir.join("config.resolved.toml"), text)?;
    Ok(())
}

pub(crate) fn ensure_out_dir(path: &PathBuf) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}
