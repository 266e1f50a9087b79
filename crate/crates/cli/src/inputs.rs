//! Segment input resolution shared by the subcommands: either a feature
//! container or a manifest plus an audio directory.

use std::path::{Path, PathBuf};

use siamrae_core::features::{apply_normalizer_all, FbankConfig, Normalizer, SegmentFeatures};

use crate::error::{CliError, CliResult};
use crate::formats::load_features;
use crate::manifest::{load_manifest, FeatureStore};

/// One group of input flags (`--features` vs `--manifest` + `--audio-dir`).
#[derive(Debug, Clone, Default)]
pub struct SegmentSource {
    pub features: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl SegmentSource {
    /// Load segments, computing filterbanks when a manifest is given.
    /// `prefix` is the flag-group prefix used in usage errors (empty for
    /// `--features`, `"test-"` for `--test-features`, and so on).
    pub fn load(
        &self,
        audio_dir: Option<&Path>,
        fbank: &FbankConfig,
        prefix: &str,
    ) -> CliResult<Vec<SegmentFeatures>> {
        match (&self.features, &self.manifest) {
            (Some(path), None) => Ok(load_features(path)?),
            (None, Some(path)) => {
                let dir = audio_dir.ok_or_else(|| {
                    CliError::usage(format!("--{prefix}manifest requires --audio-dir"))
                })?;
                let store = FeatureStore::from_audio_dir(dir, fbank)?;
                Ok(load_manifest(path, &store)?)
            }
            (Some(_), Some(_)) => Err(CliError::usage(format!(
                "give either --{prefix}features or --{prefix}manifest, not both"
            ))),
            (None, None) => Err(CliError::usage(format!(
                "one of --{prefix}features or --{prefix}manifest is required"
            ))),
        }
    }

    /// Load and z-score with a frozen normalizer when one is present.
    pub fn load_normalized(
        &self,
        audio_dir: Option<&Path>,
        fbank: &FbankConfig,
        normalizer: Option<&Normalizer>,
        prefix: &str,
    ) -> CliResult<Vec<SegmentFeatures>> {
        let segments = self.load(audio_dir, fbank, prefix)?;
        match normalizer {
            Some(norm) => Ok(apply_normalizer_all(norm, &segments)?),
            None => Ok(segments),
        }
    }
}
