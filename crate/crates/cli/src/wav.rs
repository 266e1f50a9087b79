//! Minimal RIFF/WAVE reader and writer for 16-bit PCM mono files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use siamrae_core::features::AudioSignal;

/// Read a mono 16-bit PCM WAV file; samples are scaled by `1/32768` into
/// `[-1, 1)`. Multi-channel files and non-PCM encodings are rejected.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let buf = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if buf.len() < 12 || &buf[0..4] != b"RIFF" || &buf[8..12] != b"WAVE" {
        bail!("{} is not a RIFF/WAVE file", path.display());
    }

    let mut pos = 12usize;
    let mut format: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= buf.len() {
        let id = &buf[pos..pos + 4];
        let size = u32::from_le_bytes(buf[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > buf.len() {
            bail!("{}: chunk {:?} overruns the file", path.display(), id);
        }
        let body = &buf[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    bail!("{}: fmt chunk too small", path.display());
                }
                format = Some((
                    u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    u16::from_le_bytes(body[14..16].try_into().unwrap()),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunk bodies are padded to even length.
        pos = body_start + size + (size & 1);
    }

    let (codec, channels, sample_rate, bits) =
        format.with_context(|| format!("{}: missing fmt chunk", path.display()))?;
    if codec != 1 {
        bail!("{}: unsupported encoding (WAV format tag {codec}, want PCM)", path.display());
    }
    if bits != 16 {
        bail!("{}: unsupported encoding ({bits}-bit, want 16-bit PCM)", path.display());
    }
    if channels != 1 {
        bail!("{}: unsupported channel count {channels} (mono only)", path.display());
    }
    let data = data.with_context(|| format!("{}: missing data chunk", path.display()))?;

    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0)
        .collect();
    AudioSignal::new(samples, sample_rate).map_err(|e| anyhow::anyhow!("{e}"))
}

/// Write a mono 16-bit PCM WAV file; samples clamp to `[-1, 1]`.
pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let n = signal.samples.len();
    let data_size = (n * 2) as u32;
    let byte_rate = signal.sample_rate * 2;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
