//! Segment manifests: tab-separated text, one record per line, fields
//! `(audio_id, segment_id, speaker_id, phone_label, start_seconds,
//! end_seconds)`. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use siamrae_core::features::{compute_fbank, frame_span, FbankConfig, SegmentFeatures};
use siamrae_core::Mat;

use crate::wav::read_wav;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub audio_id: String,
    pub segment_id: String,
    pub speaker_id: String,
    pub label: String,
    pub start_seconds: f64,
    pub end_seconds: f64,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            bail!(
                "manifest line {}: expected 6 tab-separated fields, found {}",
                lineno + 1,
                fields.len()
            );
        }
        let start_seconds: f64 = fields[4]
            .parse()
            .with_context(|| format!("manifest line {}: bad start time", lineno + 1))?;
        let end_seconds: f64 = fields[5]
            .parse()
            .with_context(|| format!("manifest line {}: bad end time", lineno + 1))?;
        rows.push(ManifestRow {
            audio_id: fields[0].to_string(),
            segment_id: fields[1].to_string(),
            speaker_id: fields[2].to_string(),
            label: fields[3].to_string(),
            start_seconds,
            end_seconds,
        });
    }
    Ok(rows)
}

/// Utterance-level features keyed by audio id, plus the hop they were
/// computed at.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    pub utterances: BTreeMap<String, Mat>,
    pub hop_seconds: f64,
}

impl FeatureStore {
    /// Compute filterbank features for every `*.wav` under `dir` (file stem
    /// becomes the audio id).
    pub fn from_audio_dir(dir: &Path, cfg: &FbankConfig) -> Result<Self> {
        let mut paths: Vec<_> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            bail!("no .wav files under {}", dir.display());
        }
        let mut utterances = BTreeMap::new();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .with_context(|| format!("bad file name {}", path.display()))?
                .to_string();
            let signal = read_wav(&path)?;
            let features = compute_fbank(&signal, cfg)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            utterances.insert(id, features);
        }
        Ok(Self {
            utterances,
            hop_seconds: cfg.hop_seconds(),
        })
    }
}

/// Slice one segment per manifest row out of the feature store. Order
/// preserving, and total: any bad row aborts the whole load.
pub fn load_manifest(path: &Path, store: &FeatureStore) -> Result<Vec<SegmentFeatures>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = parse_manifest(&text)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let utterance = store
            .utterances
            .get(&row.audio_id)
            .with_context(|| format!("segment {}: unknown audio id {}", row.segment_id, row.audio_id))?;
        let (start, end) = frame_span(
            row.start_seconds,
            row.end_seconds,
            store.hop_seconds,
            utterance.rows(),
        )
        .map_err(|e| anyhow::anyhow!("segment {}: {e}", row.segment_id))?;
        out.push(SegmentFeatures {
            frames: utterance.slice_rows(start, end),
            label: row.label,
            segment_id: row.segment_id,
            speaker_id: row.speaker_id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use siamrae_core::features::AudioSignal;

    #[test]
    fn parses_and_slices_by_span() {
        let dir = tempfile::tempdir().unwrap();
        // 1 s of noise-free tone at 16 kHz -> 98 frames at 25 ms / 10 ms.
        let samples: Vec<f64> = (0..16_000)
            .map(|i| 0.4 * (2.0 * std::f64::consts::PI * 500.0 * i as f64 / 16_000.0).sin())
            .collect();
        crate::wav::write_wav(
            &dir.path().join("utt1.wav"),
            &AudioSignal::new(samples, 16_000).unwrap(),
        )
        .unwrap();
        let store = FeatureStore::from_audio_dir(dir.path(), &FbankConfig::default()).unwrap();
        assert_eq!(store.utterances["utt1"].rows(), 98);

        let manifest = dir.path().join("m.tsv");
        std::fs::write(
            &manifest,
            "# comment\nutt1\tseg_f_1\tspk1\tf\t0.10\t0.25\nutt1\tseg_s_1\tspk1\ts\t0.30\t0.40\n",
        )
        .unwrap();
        let segments = load_manifest(&manifest, &store).unwrap();
        assert_eq!(segments.len(), 2);
        assert_eq!(segments[0].len(), 15); // [0.10, 0.25) at 10 ms hop
        assert_eq!(segments[0].label, "f");
        assert_eq!(segments[1].len(), 10);
    }

    #[test]
    fn bad_rows_abort() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![0.1; 16_000];
        crate::wav::write_wav(
            &dir.path().join("utt1.wav"),
            &AudioSignal::new(samples, 16_000).unwrap(),
        )
        .unwrap();
        let store = FeatureStore::from_audio_dir(dir.path(), &FbankConfig::default()).unwrap();

        for bad in [
            "utt1\ts\tv\tf\t0.25\t0.10\n",  // end <= start
            "utt1\ts\tv\tf\t0.10\t99.0\n",  // beyond utterance
            "nope\ts\tv\tf\t0.10\t0.20\n",  // unknown audio id
            "utt1\ts\tv\tf\t0.10\n",        // wrong field count
        ] {
            let manifest = dir.path().join("m.tsv");
            std::fs::write(&manifest, bad).unwrap();
            assert!(load_manifest(&manifest, &store).is_err(), "accepted: {bad}");
        }
    }
}
