//! `siamrae score`: score test segments against a reference pool and apply
//! the decision threshold. Emits one JSON record per segment.

use std::io::Write as _;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use siamrae_core::detection::{classify, score_segment, Decision, ReferencePool};

use crate::commands::{ensure_out_dir, write_resolved_config};
use crate::error::{CliError, CliResult};
use crate::formats::{load_checkpoint, load_pool, save_pool};
use crate::inputs::SegmentSource;

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Test segments (features container).
    #[arg(long)]
    pub test_features: Option<PathBuf>,
    /// Test segments (manifest; requires --audio-dir).
    #[arg(long)]
    pub test_manifest: Option<PathBuf>,

    /// Persisted reference pool.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Reference segments to build the pool from (features container).
    #[arg(long)]
    pub reference_features: Option<PathBuf>,
    /// Reference segments to build the pool from (manifest).
    #[arg(long)]
    pub reference_manifest: Option<PathBuf>,

    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Decision threshold in [-1, 1]; without it only scores are reported.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Persist the freshly built pool as pool.bin.
    #[arg(long)]
    pub save_pool: bool,
}

#[derive(Debug, Serialize)]
struct ResolvedScore {
    checkpoint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    n_test_segments: usize,
    n_references: usize,
}

pub fn run(args: ScoreArgs) -> CliResult<()> {
    if let Some(tau) = args.threshold {
        if !(-1.0..=1.0).contains(&tau) {
            return Err(CliError::usage("--threshold must lie in [-1, 1]"));
        }
    }
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let fbank = checkpoint.fbank.clone().unwrap_or_default();
    let model = &checkpoint.model;

    let test_source = SegmentSource {
        features: args.test_features.clone(),
        manifest: args.test_manifest.clone(),
    };
    let test = test_source.load_normalized(
        args.audio_dir.as_deref(),
        &fbank,
        checkpoint.normalizer.as_ref(),
        "test-",
    )?;

    let reference_source = SegmentSource {
        features: args.reference_features.clone(),
        manifest: args.reference_manifest.clone(),
    };
    let pool: ReferencePool = match (&args.pool, &reference_source) {
        (Some(path), s) if s.features.is_none() && s.manifest.is_none() => {
            if args.save_pool {
                return Err(CliError::usage("--save-pool only applies when building a pool"));
            }
            load_pool(path)?
        }
        (None, s) if s.features.is_some() || s.manifest.is_some() => {
            let refs = s.load_normalized(
                args.audio_dir.as_deref(),
                &fbank,
                checkpoint.normalizer.as_ref(),
                "reference-",
            )?;
            ReferencePool::build(model, &refs)?
        }
        _ => {
            return Err(CliError::usage(
                "give either --pool or reference segments (--reference-features / --reference-manifest)",
            ))
        }
    };

    let mut results = test
        .par_iter()
        .map(|seg| score_segment(model, seg, &pool, &seg.label))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(tau) = args.threshold {
        results = results
            .into_iter()
            .map(|r| classify(r, tau))
            .collect::<Result<Vec<_>, _>>()?;
    }

    ensure_out_dir(&args.out_dir)?;
    let report_path = args.out_dir.join("report.jsonl");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&report_path)?);
    for r in &results {
        let line = serde_json::to_string(r).map_err(|e| CliError::Data(anyhow::anyhow!("{e}")))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;

    if args.save_pool {
        save_pool(&args.out_dir.join("pool.bin"), &pool)?;
    }
    write_resolved_config(
        &args.out_dir,
        "score",
        ResolvedScore {
            checkpoint: args.checkpoint.display().to_string(),
            pool: args.pool.as_ref().map(|p| p.display().to_string()),
            threshold: args.threshold,
            n_test_segments: test.len(),
            n_references: pool.len(),
        },
    )?;

    let typical = results
        .iter()
        .filter(|r| r.decision == Some(Decision::Typical))
        .count();
    match args.threshold {
        Some(tau) => println!(
            "scored {} segments against {} references (tau {tau}): {typical} typical, {} disordered",
            test.len(),
            pool.len(),
            test.len() - typical
        ),
        None => println!(
            "scored {} segments against {} references (no threshold applied)",
            test.len(),
            pool.len()
        ),
    }
    Ok(())
}
