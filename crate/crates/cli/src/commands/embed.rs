//! `siamrae embed`: extract L2-normalized embeddings for a segment set.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{ensure_out_dir, write_resolved_config};
use crate::error::CliResult;
use crate::formats::{load_checkpoint, save_embeddings};
use crate::inputs::SegmentSource;

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ResolvedEmbed {
    checkpoint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
    n_segments: usize,
    embedding_dim: usize,
}

pub fn run(args: EmbedArgs) -> CliResult<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let fbank = checkpoint.fbank.clone().unwrap_or_default();
    let source = SegmentSource {
        features: args.features.clone(),
        manifest: args.manifest.clone(),
    };
    let segments = source.load_normalized(
        args.audio_dir.as_deref(),
        &fbank,
        checkpoint.normalizer.as_ref(),
        "",
    )?;

    let model = &checkpoint.model;
    let embeddings = segments
        .par_iter()
        .map(|seg| model.encode(&seg.frames))
        .collect::<Result<Vec<_>, _>>()?;

    let ids: Vec<String> = segments.iter().map(|s| s.segment_id.clone()).collect();
    let labels: Vec<String> = segments.iter().map(|s| s.label.clone()).collect();
    ensure_out_dir(&args.out_dir)?;
    save_embeddings(&args.out_dir.join("embeddings.bin"), &ids, &labels, &embeddings)?;
    write_resolved_config(
        &args.out_dir,
        "embed",
        ResolvedEmbed {
            checkpoint: args.checkpoint.display().to_string(),
            features: args.features.as_ref().map(|p| p.display().to_string()),
            manifest: args.manifest.as_ref().map(|p| p.display().to_string()),
            n_segments: segments.len(),
            embedding_dim: model.config().embedding_dim,
        },
    )?;
    println!(
        "embedded {} segments into {}",
        segments.len(),
        args.out_dir.join("embeddings.bin").display()
    );
    Ok(())
}
