//! `siamrae evaluate`: AP and precision-recall reports, either from a file
//! of scored pairs or by running the same-different experiment with a model
//! and two segment sets.

use std::io::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use siamrae_core::eval::{
    average_precision, pr_curve, report_from_scored, score_same_different_pairs, ApReport,
    PrPoint, ScoredPair,
};

use crate::commands::{ensure_out_dir, write_resolved_config};
use crate::error::{CliError, CliResult};
use crate::formats::load_checkpoint;
use crate::inputs::SegmentSource;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Pre-scored pairs as JSON lines: {"pair_id", "score", "label"}.
    #[arg(long)]
    pub scores: Option<PathBuf>,

    /// Model checkpoint for the same-different experiment.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub eval_features: Option<PathBuf>,
    #[arg(long)]
    pub eval_manifest: Option<PathBuf>,
    #[arg(long)]
    pub reference_features: Option<PathBuf>,
    #[arg(long)]
    pub reference_manifest: Option<PathBuf>,
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Pairing seed for the same-different experiment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct ResolvedEvaluate {
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<String>,
    seed: u64,
    n_pairs: usize,
}

fn write_reports(
    out_dir: &PathBuf,
    report: &ApReport,
    curve: &[PrPoint],
) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Data(anyhow::anyhow!("{e}")))?;
    std::fs::write(out_dir.join("ap_report.json"), json)?;

    let mut table = String::new();
    table.push_str(&format!(
        "{:<16} {:>8} {:>10} {:>8}\n",
        "class", "pairs", "positives", "AP"
    ));
    for (class, ap) in &report.per_class {
        table.push_str(&format!("{class:<16} {:>8} {:>10} {ap:>8.4}\n", "-", "-"));
    }
    table.push_str(&format!(
        "{:<16} {:>8} {:>10} {:>8.4}\n",
        "pooled", report.n_pairs, report.n_positive, report.pooled
    ));
    std::fs::write(out_dir.join("ap_report.txt"), table)?;

    let mut pr = std::io::BufWriter::new(std::fs::File::create(out_dir.join("pr_curve.tsv"))?);
    writeln!(pr, "threshold\tprecision\trecall")?;
    for p in curve {
        writeln!(pr, "{}\t{}\t{}", p.threshold, p.precision, p.recall)?;
    }
    pr.flush()?;
    Ok(())
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let scored: Vec<(String, ScoredPair)> = match (&args.scores, &args.checkpoint) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            let mut out = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let pair: ScoredPair = serde_json::from_str(line).map_err(|e| {
                    CliError::Data(anyhow::anyhow!("scores line {}: {e}", lineno + 1))
                })?;
                out.push((String::new(), pair));
            }
            out
        }
        (None, Some(ckpt_path)) => {
            let checkpoint = load_checkpoint(ckpt_path)?;
            let fbank = checkpoint.fbank.clone().unwrap_or_default();
            let eval_source = SegmentSource {
                features: args.eval_features.clone(),
                manifest: args.eval_manifest.clone(),
            };
            let reference_source = SegmentSource {
                features: args.reference_features.clone(),
                manifest: args.reference_manifest.clone(),
            };
            let eval_segments = eval_source.load_normalized(
                args.audio_dir.as_deref(),
                &fbank,
                checkpoint.normalizer.as_ref(),
                "eval-",
            )?;
            let reference_segments = reference_source.load_normalized(
                args.audio_dir.as_deref(),
                &fbank,
                checkpoint.normalizer.as_ref(),
                "reference-",
            )?;
            score_same_different_pairs(
                &checkpoint.model,
                &eval_segments,
                &reference_segments,
                args.seed,
            )?
        }
        _ => {
            return Err(CliError::usage(
                "give either --scores or --checkpoint with eval/reference segments",
            ))
        }
    };

    let pairs_only: Vec<ScoredPair> = scored.iter().map(|(_, p)| p.clone()).collect();
    let per_class_known = scored.iter().any(|(c, _)| !c.is_empty());
    let report = if per_class_known {
        report_from_scored(scored)?
    } else {
        ApReport {
            pooled: average_precision(&pairs_only)?,
            per_class: Vec::new(),
            n_pairs: pairs_only.len(),
            n_positive: pairs_only.iter().filter(|p| p.label).count(),
        }
    };
    let curve = pr_curve(&pairs_only)?;

    ensure_out_dir(&args.out_dir)?;
    write_reports(&args.out_dir, &report, &curve)?;
    write_resolved_config(
        &args.out_dir,
        "evaluate",
        ResolvedEvaluate {
            scores: args.scores.as_ref().map(|p| p.display().to_string()),
            checkpoint: args.checkpoint.as_ref().map(|p| p.display().to_string()),
            seed: args.seed,
            n_pairs: report.n_pairs,
        },
    )?;

    println!(
        "AP = {:.6} over {} pairs ({} positive)",
        report.pooled, report.n_pairs, report.n_positive
    );
    for (class, ap) in &report.per_class {
        println!("  {class}: AP = {ap:.6}");
    }
    Ok(())
}
