//! `siamrae train`: fit the normalizer, train the Siamese RAE, and emit the
//! checkpoint, per-epoch history, and the resolved config.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};

use siamrae_core::features::{apply_normalizer_all, fit_normalizer, FbankConfig};
use siamrae_core::rae::{ModelConfig, RaeModel};
use siamrae_core::siamese::{train_observed, EpochStats, LossKind, TrainConfig};

use crate::commands::{ensure_out_dir, write_resolved_config, LossArg};
use crate::error::{CliError, CliResult};
use crate::formats::{load_checkpoint, save_checkpoint};
use crate::inputs::SegmentSource;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML config file with `[model]`, `[train]`, and `[fbank]` sections;
    /// command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Training segments as a feature container.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Training segments as a manifest (requires --audio-dir).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Margin; defaults to 0.9 for contrastive, 0.25 for triplet.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Weight w of the reconstruction term in the combined objective.
    #[arg(long)]
    pub loss_weight: Option<f64>,
    /// Training pairs (or triplets) initiated per segment.
    #[arg(long)]
    pub pairs_per_segment: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Bidirectional encoder.
    #[arg(long)]
    pub bidirectional: bool,
    /// Reconstruct targets in reversed time order.
    #[arg(long)]
    pub reverse_decode: bool,

    /// Correspondence training: same-class pairs reconstruct each other.
    /// Requires --warm-start with a pretrained standard model.
    #[arg(long)]
    pub correspondence: bool,
    /// Checkpoint to continue from; the model shape comes from it.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Write a checkpoint after every epoch, not just the final one.
    #[arg(long)]
    pub save_all_epochs: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    model: ModelFile,
    train: TrainSection,
    fbank: Option<FbankConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelFile {
    feature_dim: Option<usize>,
    hidden_units: Option<usize>,
    num_layers: Option<usize>,
    embedding_dim: Option<usize>,
    bidirectional: Option<bool>,
    reverse_decode: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    loss: Option<LossKind>,
    margin: Option<f64>,
    loss_weight: Option<f64>,
    pairs_per_segment: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    weight_decay: Option<f64>,
    epochs: Option<usize>,
    correspondence: Option<bool>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ResolvedTrain {
    model: ModelConfig,
    train: TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    fbank: Option<FbankConfig>,
    inputs: ResolvedInputs,
}

#[derive(Debug, Serialize)]
struct ResolvedInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warm_start: Option<String>,
    n_segments: usize,
}

#[derive(Debug, Serialize)]
struct HistoryRecord {
    #[serde(flatten)]
    stats: EpochStats,
    wall_seconds: f64,
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let file: TrainFile = match &args.config {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| CliError::usage(format!("bad config file: {e}")))?,
        None => TrainFile::default(),
    };

    // Training recipe: defaults <- file <- flags.
    let loss: LossKind = args
        .loss
        .map(Into::into)
        .or(file.train.loss)
        .unwrap_or(LossKind::Contrastive);
    let base = match loss {
        LossKind::Contrastive => TrainConfig::contrastive(),
        LossKind::Triplet => TrainConfig::triplet(),
    };
    let correspondence =
        args.correspondence || file.train.correspondence.unwrap_or(base.correspondence);
    let train_cfg = TrainConfig {
        loss,
        margin: args.margin.or(file.train.margin).unwrap_or(base.margin),
        loss_weight: args
            .loss_weight
            .or(file.train.loss_weight)
            .unwrap_or(base.loss_weight),
        pairs_per_segment: args
            .pairs_per_segment
            .or(file.train.pairs_per_segment)
            .unwrap_or(base.pairs_per_segment),
        batch_size: args
            .batch_size
            .or(file.train.batch_size)
            .unwrap_or(base.batch_size),
        learning_rate: args
            .lr
            .or(file.train.learning_rate)
            .unwrap_or(base.learning_rate),
        weight_decay: args
            .weight_decay
            .or(file.train.weight_decay)
            .unwrap_or(base.weight_decay),
        epochs: args.epochs.or(file.train.epochs).unwrap_or(base.epochs),
        correspondence,
        seed: args.seed.or(file.train.seed).unwrap_or(base.seed),
    };
    if train_cfg.correspondence && args.warm_start.is_none() {
        return Err(CliError::usage(
            "--correspondence requires --warm-start with a pretrained standard model",
        ));
    }

    // Inputs.
    let fbank = file.fbank.clone().unwrap_or_default();
    let source = SegmentSource {
        features: args.features.clone(),
        manifest: args.manifest.clone(),
    };
    let raw_segments = source.load(args.audio_dir.as_deref(), &fbank, "")?;
    if raw_segments.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no training segments")));
    }

    // Normalizer is fit on the training set only and frozen.
    let normalizer = fit_normalizer(&raw_segments)?;
    let segments = apply_normalizer_all(&normalizer, &raw_segments)?;
    let data_dim = segments[0].feature_dim();

    // Model: warm start dictates the shape; otherwise resolve and init.
    let mut model = match &args.warm_start {
        Some(path) => {
            if args.hidden.is_some()
                || args.layers.is_some()
                || args.embedding_dim.is_some()
                || args.bidirectional
            {
                return Err(CliError::usage(
                    "model shape flags conflict with --warm-start (the checkpoint defines the model)",
                ));
            }
            load_checkpoint(path)?.model
        }
        None => {
            let defaults = ModelConfig::default();
            let cfg = ModelConfig {
                feature_dim: file.model.feature_dim.unwrap_or(data_dim),
                hidden_units: args
                    .hidden
                    .or(file.model.hidden_units)
                    .unwrap_or(defaults.hidden_units),
                num_layers: args
                    .layers
                    .or(file.model.num_layers)
                    .unwrap_or(defaults.num_layers),
                embedding_dim: args
                    .embedding_dim
                    .or(file.model.embedding_dim)
                    .unwrap_or(defaults.embedding_dim),
                bidirectional: args.bidirectional
                    || file.model.bidirectional.unwrap_or(defaults.bidirectional),
                reverse_decode: args.reverse_decode
                    || file.model.reverse_decode.unwrap_or(defaults.reverse_decode),
            };
            RaeModel::init(cfg, train_cfg.seed)?
        }
    };
    if model.config().feature_dim != data_dim {
        return Err(CliError::Data(anyhow::anyhow!(
            "model expects {}-dim features but the data has {}",
            model.config().feature_dim,
            data_dim
        )));
    }

    ensure_out_dir(&args.out_dir)?;
    write_resolved_config(
        &args.out_dir,
        "train",
        ResolvedTrain {
            model: model.config().clone(),
            train: train_cfg.clone(),
            fbank: args.manifest.is_some().then(|| fbank.clone()),
            inputs: ResolvedInputs {
                features: args.features.as_ref().map(|p| p.display().to_string()),
                manifest: args.manifest.as_ref().map(|p| p.display().to_string()),
                warm_start: args.warm_start.as_ref().map(|p| p.display().to_string()),
                n_segments: segments.len(),
            },
        },
    )?;

    let history_path = args.out_dir.join("history.jsonl");
    let mut history_file = std::io::BufWriter::new(std::fs::File::create(&history_path)?);
    let fbank_for_ckpt = args.manifest.is_some().then_some(&fbank);
    let mut epoch_start = Instant::now();
    let mut observer_error: Option<CliError> = None;
    let out_dir = args.out_dir.clone();
    let save_all = args.save_all_epochs;

    let result = train_observed(&mut model, &segments, &train_cfg, |model, stats| {
        if observer_error.is_some() {
            return;
        }
        let wall_seconds = epoch_start.elapsed().as_secs_f64();
        epoch_start = Instant::now();
        let record = HistoryRecord {
            stats: *stats,
            wall_seconds,
        };
        let write = (|| -> CliResult<()> {
            let line = serde_json::to_string(&record)
                .map_err(|e| CliError::Data(anyhow::anyhow!("{e}")))?;
            writeln!(history_file, "{line}")?;
            if save_all {
                save_checkpoint(
                    &out_dir.join(format!("checkpoint_epoch_{:03}.bin", stats.epoch)),
                    model,
                    Some(&normalizer),
                    fbank_for_ckpt,
                )?;
            }
            Ok(())
        })();
        if let Err(e) = write {
            observer_error = Some(e);
        }
        println!(
            "epoch {:>3}: total {:.6}  siamese {:.6}  mse {:.6}  ({wall_seconds:.1}s)",
            stats.epoch, stats.loss_total, stats.loss_siamese, stats.loss_mse
        );
    });
    if let Some(e) = observer_error {
        return Err(e);
    }
    result?;
    history_file.flush()?;

    save_checkpoint(
        &args.out_dir.join("checkpoint_final.bin"),
        &model,
        Some(&normalizer),
        fbank_for_ckpt,
    )?;
    println!(
        "trained {} epochs; checkpoint at {}",
        train_cfg.epochs,
        args.out_dir.join("checkpoint_final.bin").display()
    );
    Ok(())
}
