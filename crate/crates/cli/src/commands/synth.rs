//! `siamrae synth`: generate a synthetic labeled corpus as one combined
//! feature container plus one container per segment.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use siamrae_core::features::{synth_corpus, SynthConfig};

use crate::commands::{ensure_out_dir, write_resolved_config};
use crate::error::CliResult;
use crate::formats::save_features;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub segments_per_class: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Shortest segment length in frames.
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Longest segment length in frames.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Scale of the per-class trajectory templates.
    #[arg(long)]
    pub separation: Option<f64>,
    /// Standard deviation of the additive frame noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthFile {
    n_classes: Option<usize>,
    segments_per_class: Option<usize>,
    feature_dim: Option<usize>,
    length_range: Option<(usize, usize)>,
    class_separation: Option<f64>,
    noise_std: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ResolvedSynth {
    synth: SynthConfig,
    out_dir: String,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let file: SynthFile = match &args.config {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| crate::CliError::usage(format!("bad config file: {e}")))?,
        None => SynthFile::default(),
    };
    let defaults = SynthConfig::default();
    let length_range = (
        args.min_len
            .or(file.length_range.map(|r| r.0))
            .unwrap_or(defaults.length_range.0),
        args.max_len
            .or(file.length_range.map(|r| r.1))
            .unwrap_or(defaults.length_range.1),
    );
    let cfg = SynthConfig {
        n_classes: args.classes.or(file.n_classes).unwrap_or(defaults.n_classes),
        segments_per_class: args
            .segments_per_class
            .or(file.segments_per_class)
            .unwrap_or(defaults.segments_per_class),
        feature_dim: args
            .feature_dim
            .or(file.feature_dim)
            .unwrap_or(defaults.feature_dim),
        length_range,
        class_separation: args
            .separation
            .or(file.class_separation)
            .unwrap_or(defaults.class_separation),
        noise_std: args.noise.or(file.noise_std).unwrap_or(defaults.noise_std),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };

    let corpus = synth_corpus(&cfg)?;
    ensure_out_dir(&args.out_dir)?;
    let seg_dir = args.out_dir.join("segments");
    std::fs::create_dir_all(&seg_dir)?;
    for seg in &corpus {
        save_features(
            &seg_dir.join(format!("{}.bin", seg.segment_id)),
            std::slice::from_ref(seg),
        )?;
    }
    save_features(&args.out_dir.join("corpus.bin"), &corpus)?;
    write_resolved_config(
        &args.out_dir,
        "synth",
        ResolvedSynth {
            synth: cfg.clone(),
            out_dir: args.out_dir.display().to_string(),
        },
    )?;
    println!(
        "wrote {} segments ({} classes) to {}",
        corpus.len(),
        cfg.n_classes,
        args.out_dir.display()
    );
    Ok(())
}
