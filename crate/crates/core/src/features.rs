//! Acoustic features: log Mel-filterbank extraction, global mean/variance
//! normalization, synthetic labeled corpora, and frame-span arithmetic for
//! manifest-driven segment slicing.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math;
use crate::rng;

/// A mono audio signal with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio samples"));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be > 0".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A variable-length sequence of per-frame feature vectors with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    /// `T x F`: one row per frame.
    pub frames: Mat,
    /// Phone-class identifier.
    pub label: String,
    pub segment_id: String,
    pub speaker_id: String,
}

impl SegmentFeatures {
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.frames.cols()
    }
}

/// Log Mel-filterbank settings.
///
/// Defaults: 25 ms Hamming window, 10 ms hop, 40 triangular Mel filters from
/// 20 Hz to Nyquist, natural-log energies floored at `1e-10`. No
/// pre-emphasis. The DFT length is the window length rounded up to a power
/// of two.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FbankConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub num_filters: usize,
    pub low_hz: f64,
    /// Upper band edge; `None` means Nyquist.
    pub high_hz: Option<f64>,
    pub log_floor: f64,
}

impl Default for FbankConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            num_filters: 40,
            low_hz: 20.0,
            high_hz: None,
            log_floor: 1e-10,
        }
    }
}

impl FbankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::InvalidConfig("window/hop must be positive".into()));
        }
        if self.num_filters == 0 {
            return Err(Error::InvalidConfig("num_filters must be >= 1".into()));
        }
        if self.low_hz < 0.0 {
            return Err(Error::InvalidConfig("low_hz must be >= 0".into()));
        }
        if self.log_floor <= 0.0 {
            return Err(Error::InvalidConfig("log_floor must be > 0".into()));
        }
        Ok(())
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_ms / 1000.0
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * math::log10(1.0 + hz / 700.0)
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular Mel filterbank: `num_filters x (n_fft/2 + 1)` weights, HTK-style
/// Mel scale, unit-peak triangles.
fn mel_filterbank(
    num_filters: usize,
    n_fft: usize,
    sample_rate: f64,
    low_hz: f64,
    high_hz: f64,
) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let mel_low = hz_to_mel(low_hz);
    let mel_high = hz_to_mel(high_hz);
    // num_filters + 2 edge points, evenly spaced in Mel.
    let points: Vec<f64> = (0..num_filters + 2)
        .map(|i| {
            let mel = mel_low + (mel_high - mel_low) * i as f64 / (num_filters + 1) as f64;
            mel_to_hz(mel)
        })
        .collect();
    let bin_hz = |k: usize| k as f64 * sample_rate / n_fft as f64;

    let mut bank = vec![vec![0.0; n_bins]; num_filters];
    for (m, filt) in bank.iter_mut().enumerate() {
        let (left, center, right) = (points[m], points[m + 1], points[m + 2]);
        for (k, w) in filt.iter_mut().enumerate() {
            let f = bin_hz(k);
            if f > left && f < right {
                *w = if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                };
            }
        }
    }
    bank
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * math::cos(2.0 * core::f64::consts::PI * n as f64 / (len - 1) as f64))
        .collect()
}

fn next_pow2(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

/// Log Mel-filterbank features, one row per complete frame.
///
/// `T = floor((len - window) / hop) + 1`; trailing samples that do not fill a
/// window are dropped. Deterministic.
pub fn compute_fbank(signal: &AudioSignal, cfg: &FbankConfig) -> Result<Mat> {
    cfg.validate()?;
    let sr = signal.sample_rate as f64;
    let win = (cfg.window_ms / 1000.0 * sr) as usize;
    let hop = (cfg.hop_ms / 1000.0 * sr) as usize;
    if win == 0 || hop == 0 {
        return Err(Error::InvalidConfig("window/hop shorter than one sample".into()));
    }
    if signal.samples.len() < win {
        return Err(Error::InvalidSpan(format!(
            "signal of {} samples is shorter than one {}-sample window",
            signal.samples.len(),
            win
        )));
    }
    let nyquist = sr / 2.0;
    let high = cfg.high_hz.unwrap_or(nyquist);
    if !(cfg.low_hz < high && high <= nyquist) {
        return Err(Error::InvalidConfig(format!(
            "filter band [{}, {high}] invalid for Nyquist {nyquist}",
            cfg.low_hz
        )));
    }

    let n_fft = next_pow2(win);
    let n_bins = n_fft / 2 + 1;
    let window = hamming(win);
    let bank = mel_filterbank(cfg.num_filters, n_fft, sr, cfg.low_hz, high);

    let n_frames = (signal.samples.len() - win) / hop + 1;
    let mut out = Mat::zeros(n_frames, cfg.num_filters);

    // Direct DFT of the windowed frame, zero-padded to n_fft.
    let mut power = vec![0.0; n_bins];
    for t in 0..n_frames {
        let frame = &signal.samples[t * hop..t * hop + win];
        for (k, p) in power.iter_mut().enumerate() {
            let step = 2.0 * core::f64::consts::PI * k as f64 / n_fft as f64;
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, (&s, &w)) in frame.iter().zip(window.iter()).enumerate() {
                let phase = step * n as f64;
                let v = s * w;
                re += v * math::cos(phase);
                im -= v * math::sin(phase);
            }
            *p = re * re + im * im;
        }
        let row = out.row_mut(t);
        for (m, filt) in bank.iter().enumerate() {
            let energy = math::dot(filt, &power);
            row[m] = math::ln(if energy > cfg.log_floor {
                energy
            } else {
                cfg.log_floor
            });
        }
    }
    Ok(out)
}

/// Global per-dimension statistics for z-scoring features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations are floored here so constant dimensions stay usable.
pub const STD_FLOOR: f64 = 1e-8;

/// Mean and population standard deviation over all frames of all segments.
///
/// Fit this on the training split only and reuse the frozen result
/// everywhere else.
pub fn fit_normalizer(segments: &[SegmentFeatures]) -> Result<Normalizer> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("normalizer fit set"));
    }
    let dim = segments[0].feature_dim();
    let mut count = 0usize;
    let mut mean = vec![0.0; dim];
    for seg in segments {
        if seg.feature_dim() != dim {
            return Err(Error::DimensionMismatch {
                what: "normalizer fit features",
                expected: dim,
                actual: seg.feature_dim(),
            });
        }
        for row in seg.frames.iter_rows() {
            math::add_acc(&mut mean, row);
            count += 1;
        }
    }
    if count < 2 {
        return Err(Error::EmptyInput("normalizer fit needs at least 2 frames"));
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut var = vec![0.0; dim];
    for seg in segments {
        for row in seg.frames.iter_rows() {
            for (j, &x) in row.iter().enumerate() {
                let d = x - mean[j];
                var[j] += d * d;
            }
        }
    }
    let std = var
        .iter()
        .map(|v| {
            let s = math::sqrt(v / count as f64);
            if s > STD_FLOOR {
                s
            } else {
                STD_FLOOR
            }
        })
        .collect();
    Ok(Normalizer { mean, std })
}

/// `(x - mean) / std` per frame; labels and ids are preserved.
pub fn apply_normalizer(norm: &Normalizer, segment: &SegmentFeatures) -> Result<SegmentFeatures> {
    if segment.feature_dim() != norm.mean.len() {
        return Err(Error::DimensionMismatch {
            what: "normalizer apply",
            expected: norm.mean.len(),
            actual: segment.feature_dim(),
        });
    }
    let mut frames = segment.frames.clone();
    for r in 0..frames.rows() {
        let row = frames.row_mut(r);
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - norm.mean[j]) / norm.std[j];
        }
    }
    Ok(SegmentFeatures {
        frames,
        label: segment.label.clone(),
        segment_id: segment.segment_id.clone(),
        speaker_id: segment.speaker_id.clone(),
    })
}

/// Convenience: normalize a whole set.
pub fn apply_normalizer_all(
    norm: &Normalizer,
    segments: &[SegmentFeatures],
) -> Result<Vec<SegmentFeatures>> {
    segments.iter().map(|s| apply_normalizer(norm, s)).collect()
}

/// Synthetic corpus settings.
///
/// Each class gets a trajectory template: `SYNTH_ANCHORS` anchor vectors of
/// i.i.d. standard normals scaled by `class_separation`, joined by linear
/// interpolation. A segment of length `T` (uniform in `length_range`)
/// samples the template polyline at `T` evenly spaced positions and adds
/// i.i.d. Gaussian noise with deviation `noise_std`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub segments_per_class: usize,
    pub feature_dim: usize,
    /// Inclusive `[T_min, T_max]`.
    pub length_range: (usize, usize),
    pub class_separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

/// Anchor points per class template.
pub const SYNTH_ANCHORS: usize = 4;

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 8,
            segments_per_class: 200,
            feature_dim: 40,
            length_range: (10, 30),
            class_separation: 1.0,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig("n_classes must be >= 2".into()));
        }
        if self.segments_per_class == 0 {
            return Err(Error::InvalidConfig("segments_per_class must be >= 1".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be >= 1".into()));
        }
        let (lo, hi) = self.length_range;
        if lo < 1 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "length_range [{lo}, {hi}] must satisfy 1 <= T_min <= T_max"
            )));
        }
        if self.class_separation < 0.0 || self.noise_std < 0.0 {
            return Err(Error::InvalidConfig(
                "class_separation and noise_std must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluate a template polyline of `anchors` rows at fraction `u` in `[0,1]`.
fn polyline_at(anchors: &Mat, u: f64, out: &mut [f64]) {
    let n = anchors.rows();
    if n == 1 {
        out.copy_from_slice(anchors.row(0));
        return;
    }
    let pos = u * (n - 1) as f64;
    let lo = math::floor(pos) as usize;
    let lo = lo.min(n - 2);
    let frac = pos - lo as f64;
    let (a, b) = (anchors.row(lo), anchors.row(lo + 1));
    for (j, o) in out.iter_mut().enumerate() {
        *o = a[j] + frac * (b[j] - a[j]);
    }
}

/// Labeled synthetic corpus, deterministic for a given config.
///
/// Classes are labeled `c0..c{n-1}`; segment ids are `c{class}_s{index}`.
/// Draw order is fixed (per class: anchors, then per segment: length then
/// noise), so equal configs give byte-identical corpora.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<Vec<SegmentFeatures>> {
    cfg.validate()?;
    let mut rng = rng::rng_from_seed(cfg.seed);
    let (t_min, t_max) = cfg.length_range;
    let mut out = Vec::with_capacity(cfg.n_classes * cfg.segments_per_class);
    for class in 0..cfg.n_classes {
        let mut anchors = Mat::zeros(SYNTH_ANCHORS, cfg.feature_dim);
        for r in 0..SYNTH_ANCHORS {
            let row = anchors.row_mut(r);
            for v in row.iter_mut() {
                *v = cfg.class_separation * rng::gaussian(&mut rng);
            }
        }
        for s in 0..cfg.segments_per_class {
            let len = rng.gen_range(t_min..=t_max);
            let mut frames = Mat::zeros(len, cfg.feature_dim);
            for t in 0..len {
                let u = if len == 1 {
                    0.0
                } else {
                    t as f64 / (len - 1) as f64
                };
                polyline_at(&anchors, u, frames.row_mut(t));
                if cfg.noise_std > 0.0 {
                    let row = frames.row_mut(t);
                    for v in row.iter_mut() {
                        *v += cfg.noise_std * rng::gaussian(&mut rng);
                    }
                }
            }
            out.push(SegmentFeatures {
                frames,
                label: format!("c{class}"),
                segment_id: format!("c{class}_s{s}"),
                speaker_id: format!("synth{}", s % 10),
            });
        }
    }
    Ok(out)
}

/// Map a `[start, end)` span in seconds to frame indices at the given hop,
/// by nearest-frame rounding, and bound-check against the utterance length.
pub fn frame_span(
    start_seconds: f64,
    end_seconds: f64,
    hop_seconds: f64,
    total_frames: usize,
) -> Result<(usize, usize)> {
    if !(hop_seconds > 0.0) {
        return Err(Error::InvalidConfig("hop must be positive".into()));
    }
    if !(start_seconds >= 0.0 && end_seconds.is_finite() && start_seconds.is_finite()) {
        return Err(Error::InvalidSpan(format!(
            "span [{start_seconds}, {end_seconds}) is not a valid time range"
        )));
    }
    if end_seconds <= start_seconds {
        return Err(Error::InvalidSpan(format!(
            "end {end_seconds} must be after start {start_seconds}"
        )));
    }
    let start = math::round(start_seconds / hop_seconds) as usize;
    let end = math::round(end_seconds / hop_seconds) as usize;
    if end > total_frames {
        return Err(Error::InvalidSpan(format!(
            "span ends at frame {end} but the utterance has {total_frames} frames"
        )));
    }
    if end <= start {
        return Err(Error::InvalidSpan(format!(
            "span [{start_seconds}, {end_seconds}) rounds to an empty frame range"
        )));
    }
    Ok((start, end))
}

/// Resample a frame sequence to `new_len` rows by linear interpolation over
/// the row index. Used for template-space alignment of unequal-length
/// segments.
pub fn resample_rows(frames: &Mat, new_len: usize) -> Mat {
    assert!(new_len >= 1 && frames.rows() >= 1);
    let old = frames.rows();
    let mut out = Mat::zeros(new_len, frames.cols());
    for t in 0..new_len {
        let u = if new_len == 1 {
            0.0
        } else {
            t as f64 / (new_len - 1) as f64
        };
        let pos = u * (old - 1) as f64;
        let lo = (math::floor(pos) as usize).min(old.saturating_sub(2));
        if old == 1 {
            out.row_mut(t).copy_from_slice(frames.row(0));
            continue;
        }
        let frac = pos - lo as f64;
        let (a, b) = (frames.row(lo), frames.row(lo + 1));
        let row = out.row_mut(t);
        for j in 0..frames.cols() {
            row[j] = a[j] + frac * (b[j] - a[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, seconds: f64, sr: u32) -> AudioSignal {
        let n = (seconds * sr as f64) as usize;
        let samples = (0..n)
            .map(|i| 0.5 * math::sin(2.0 * core::f64::consts::PI * freq * i as f64 / sr as f64))
            .collect();
        AudioSignal::new(samples, sr).unwrap()
    }

    #[test]
    fn frame_count_arithmetic() {
        // 0.105 s at 16 kHz, 25 ms window, 10 ms hop -> 9 complete frames.
        let signal = AudioSignal::new(vec![0.0; 1680], 16_000).unwrap();
        let fb = compute_fbank(&signal, &FbankConfig::default()).unwrap();
        assert_eq!(fb.rows(), 9);
        assert_eq!(fb.cols(), 40);
    }

    #[test]
    fn silence_gives_constant_floor_rows() {
        let signal = AudioSignal::new(vec![0.0; 1680], 16_000).unwrap();
        let fb = compute_fbank(&signal, &FbankConfig::default()).unwrap();
        let first = fb.row(0).to_vec();
        for t in 0..fb.rows() {
            assert_eq!(fb.row(t), &first[..]);
        }
        assert!((first[0] - math::ln(1e-10)).abs() < 1e-12);
    }

    #[test]
    fn too_short_signal_is_an_error() {
        let signal = AudioSignal::new(vec![0.1; 100], 16_000).unwrap();
        assert!(compute_fbank(&signal, &FbankConfig::default()).is_err());
    }

    #[test]
    fn sine_energy_lands_in_the_right_filter() {
        // Independent oracle: rebuild the Mel band edges directly and check
        // the argmax filter's band covers the tone frequency.
        let cfg = FbankConfig::default();
        let signal = sine(1000.0, 0.2, 16_000);
        let fb = compute_fbank(&signal, &cfg).unwrap();
        let mid = fb.rows() / 2;
        let row = fb.row(mid);
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;

        let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
        let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let (lo, hi) = (mel(20.0), mel(8000.0));
        let edge = |i: usize| inv(lo + (hi - lo) * i as f64 / 41.0);
        let (left, right) = (edge(argmax), edge(argmax + 2));
        assert!(
            left < 1000.0 && 1000.0 < right,
            "argmax filter {argmax} spans [{left:.1}, {right:.1}] Hz"
        );
    }

    #[test]
    fn amplitude_scaling_shifts_log_energies() {
        let cfg = FbankConfig::default();
        let base = sine(700.0, 0.15, 16_000);
        let scaled = AudioSignal::new(
            base.samples.iter().map(|s| s * 0.25).collect(),
            base.sample_rate,
        )
        .unwrap();
        let a = compute_fbank(&base, &cfg).unwrap();
        let b = compute_fbank(&scaled, &cfg).unwrap();
        let shift = math::ln(0.25 * 0.25);
        for t in 0..a.rows() {
            for j in 0..a.cols() {
                let got = b.at(t, j) - a.at(t, j);
                // Only meaningful above the log floor.
                if a.at(t, j) > math::ln(1e-10) + 1.0 && b.at(t, j) > math::ln(1e-10) + 1.0 {
                    assert!((got - shift).abs() < 1e-6, "t={t} j={j} got {got} want {shift}");
                }
            }
        }
    }

    fn seg(rows: &[Vec<f64>], label: &str, id: &str) -> SegmentFeatures {
        SegmentFeatures {
            frames: Mat::from_rows(rows),
            label: label.into(),
            segment_id: id.into(),
            speaker_id: "spk".into(),
        }
    }

    #[test]
    fn normalizer_two_point_example() {
        let s = seg(&[vec![0.0, 0.0], vec![2.0, 2.0]], "a", "s1");
        let norm = fit_normalizer(&[s]).unwrap();
        assert_eq!(norm.mean, vec![1.0, 1.0]);
        assert_eq!(norm.std, vec![1.0, 1.0]); // population std
    }

    #[test]
    fn normalizer_constant_column_floored() {
        let s = seg(&[vec![3.0, 1.0], vec![3.0, 2.0]], "a", "s1");
        let norm = fit_normalizer(&[s.clone()]).unwrap();
        assert_eq!(norm.std[0], STD_FLOOR);
        let z = apply_normalizer(&norm, &s).unwrap();
        assert!(z.frames.is_finite());
    }

    #[test]
    fn normalizer_matches_two_pass_oracle() {
        let mut rng = rng::rng_from_seed(11);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..5).map(|_| rng::gaussian(&mut rng) * 3.0 + 1.5).collect())
            .collect();
        let norm = fit_normalizer(&[seg(&rows, "a", "s")]).unwrap();

        // Independent two-pass computation, scalar loops.
        for j in 0..5 {
            let mean: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / 100.0;
            let var: f64 = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / 100.0;
            assert!((norm.mean[j] - mean).abs() < 1e-10);
            assert!((norm.std[j] - var.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_fit_output_zscores_the_fit_set() {
        let mut rng = rng::rng_from_seed(3);
        let segs: Vec<SegmentFeatures> = (0..4)
            .map(|i| {
                let rows: Vec<Vec<f64>> = (0..20)
                    .map(|_| (0..3).map(|_| rng::gaussian(&mut rng) * 2.0 - 1.0).collect())
                    .collect();
                seg(&rows, "a", &format!("s{i}"))
            })
            .collect();
        let norm = fit_normalizer(&segs).unwrap();
        let z = apply_normalizer_all(&norm, &segs).unwrap();
        let total: usize = z.iter().map(|s| s.len()).sum();
        for j in 0..3 {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for s in &z {
                for row in s.frames.iter_rows() {
                    sum += row[j];
                    sumsq += row[j] * row[j];
                }
            }
            let mean = sum / total as f64;
            let var = sumsq / total as f64 - mean * mean;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalizer_identity_and_zero_cases() {
        let norm = Normalizer {
            mean: vec![0.0, 0.0],
            std: vec![1.0, 1.0],
        };
        let s = seg(&[vec![0.5, -0.25]], "a", "s");
        assert_eq!(apply_normalizer(&norm, &s).unwrap().frames, s.frames);

        let norm2 = Normalizer {
            mean: vec![0.5, -0.25],
            std: vec![2.0, 2.0],
        };
        let z = apply_normalizer(&norm2, &s).unwrap();
        assert_eq!(z.frames.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn normalizer_round_trip() {
        let mut rng = rng::rng_from_seed(5);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng::gaussian(&mut rng)).collect())
            .collect();
        let s = seg(&rows, "a", "s");
        let norm = fit_normalizer(&[s.clone()]).unwrap();
        let z = apply_normalizer(&norm, &s).unwrap();
        for (t, row) in z.frames.iter_rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let back = v * norm.std[j] + norm.mean[j];
                assert!((back - s.frames.at(t, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthConfig {
            n_classes: 3,
            segments_per_class: 5,
            feature_dim: 6,
            length_range: (4, 9),
            class_separation: 1.0,
            noise_std: 0.5,
            seed: 7,
        };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
    }

    #[test]
    fn synth_noise_free_classes_are_templates() {
        // Fixed length so same-class segments sample identical positions.
        let cfg = SynthConfig {
            n_classes: 3,
            segments_per_class: 4,
            feature_dim: 5,
            length_range: (12, 12),
            class_separation: 2.0,
            noise_std: 0.0,
            seed: 21,
        };
        let corpus = synth_corpus(&cfg).unwrap();
        for a in &corpus {
            for b in &corpus {
                let dist: f64 = a
                    .frames
                    .as_slice()
                    .iter()
                    .zip(b.frames.as_slice())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if a.label == b.label {
                    assert!(dist < 1e-12, "{} vs {}: {dist}", a.segment_id, b.segment_id);
                } else {
                    assert!(dist > 1.0, "{} vs {}: {dist}", a.segment_id, b.segment_id);
                }
            }
        }
    }

    #[test]
    fn synth_varying_lengths_align_within_class() {
        let cfg = SynthConfig {
            n_classes: 3,
            segments_per_class: 6,
            feature_dim: 5,
            length_range: (8, 20),
            class_separation: 2.0,
            noise_std: 0.0,
            seed: 22,
        };
        let corpus = synth_corpus(&cfg).unwrap();
        let aligned_dist = |a: &SegmentFeatures, b: &SegmentFeatures| {
            let ra = resample_rows(&a.frames, 16);
            let rb = resample_rows(&b.frames, 16);
            let d: f64 = ra
                .as_slice()
                .iter()
                .zip(rb.as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            (d / 16.0).sqrt()
        };
        let mut within: f64 = 0.0;
        let mut across = f64::INFINITY;
        for a in &corpus {
            for b in &corpus {
                if a.segment_id == b.segment_id {
                    continue;
                }
                let d = aligned_dist(a, b);
                if a.label == b.label {
                    within = within.max(d);
                } else {
                    across = across.min(d);
                }
            }
        }
        // Resampling a polyline is not exact between grids, but within-class
        // residue must sit far below the class gap.
        assert!(
            within < 0.2 * across,
            "within {within} not well under across {across}"
        );
    }

    #[test]
    fn synth_lengths_within_range() {
        let cfg = SynthConfig {
            n_classes: 2,
            segments_per_class: 40,
            feature_dim: 3,
            length_range: (2, 5),
            class_separation: 1.0,
            noise_std: 0.1,
            seed: 9,
        };
        let corpus = synth_corpus(&cfg).unwrap();
        assert!(corpus.iter().all(|s| (2..=5).contains(&s.len())));
    }

    #[test]
    fn frame_span_examples() {
        // (0.10 s, 0.25 s) at 10 ms hop -> 15 frames.
        let (a, b) = frame_span(0.10, 0.25, 0.01, 100).unwrap();
        assert_eq!((a, b), (10, 25));
        assert_eq!(b - a, 15);

        assert!(frame_span(0.25, 0.10, 0.01, 100).is_err()); // end <= start
        assert!(frame_span(0.10, 2.0, 0.01, 100).is_err()); // beyond utterance
        assert!(frame_span(0.101, 0.102, 0.01, 100).is_err()); // rounds empty
    }

    #[test]
    fn resample_preserves_endpoints() {
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]);
        let r = resample_rows(&m, 5);
        assert_eq!(r.row(0), m.row(0));
        assert_eq!(r.row(4), m.row(2));
        assert_eq!(r.row(2), m.row(1)); // midpoint hits the middle row
    }
}
