//! Audio ingestion and framing.
//!
//! Loads mono integer-PCM WAV files into normalized [`AudioClip`]s, applies
//! the first-order pre-emphasis filter and slices a clip into overlapping
//! analysis frames.

use std::io::{Read, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{source_id}: malformed RIFF/WAVE container: {reason}")]
    MalformedContainer { source_id: String, reason: String },
    #[error("{source_id}: unsupported encoding: {reason}")]
    UnsupportedEncoding { source_id: String, reason: String },
    #[error("{source_id}: audio contains no samples")]
    EmptyAudio { source_id: String },
    #[error("{source_id}: clip has {num_samples} samples, shorter than one {frame_len}-sample analysis frame")]
    ClipTooShort {
        source_id: String,
        num_samples: usize,
        frame_len: usize,
    },
    #[error("invalid audio parameter: {0}")]
    InvalidParameter(String),
    #[error("{source_id}: {source}")]
    Io {
        source_id: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mono utterance with samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: u32,
        source_id: impl Into<String>,
    ) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidParameter(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(AudioError::InvalidParameter(format!(
                "sample {bad} outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Framing parameters. Defaults: 25 ms frames every 10 ms, pre-emphasis 0.97.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub pre_emphasis: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            pre_emphasis: 0.97,
        }
    }
}

impl FrameConfig {
    /// Frame length and hop in samples at `sample_rate`, validated.
    pub fn lengths(&self, sample_rate: u32) -> Result<(usize, usize), AudioError> {
        if !(self.frame_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(AudioError::InvalidParameter(
                "frame_ms and hop_ms must be positive".into(),
            ));
        }
        if self.hop_ms > self.frame_ms {
            return Err(AudioError::InvalidParameter(format!(
                "hop_ms {} exceeds frame_ms {}",
                self.hop_ms, self.frame_ms
            )));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(AudioError::InvalidParameter(format!(
                "pre-emphasis {} outside [0, 1)",
                self.pre_emphasis
            )));
        }
        let sr = f64::from(sample_rate);
        let frame_len = (self.frame_ms * sr / 1000.0).round() as usize;
        let hop = (self.hop_ms * sr / 1000.0).round() as usize;
        if frame_len < 2 || hop == 0 {
            return Err(AudioError::InvalidParameter(format!(
                "{} ms frames at {sample_rate} Hz are shorter than 2 samples",
                self.frame_ms
            )));
        }
        Ok((frame_len, hop))
    }

    /// Frames per second produced by this configuration.
    pub fn frame_rate(&self, sample_rate: u32) -> Result<f64, AudioError> {
        let (_, hop) = self.lengths(sample_rate)?;
        Ok(f64::from(sample_rate) / hop as f64)
    }
}

/// Row-major `T x L` matrix of analysis frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    data: Vec<f64>,
    num_frames: usize,
    frame_len: usize,
    hop: usize,
    sample_rate: u32,
}

impl FrameMatrix {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_rate(&self) -> f64 {
        f64::from(self.sample_rate) / self.hop as f64
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.frame_len..(t + 1) * self.frame_len]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.frame_len)
    }
}

/// Reads a mono integer-PCM WAV file from disk.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let source_id = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| AudioError::Io {
        source_id: source_id.clone(),
        source,
    })?;
    read_wav(std::io::BufReader::new(file), source_id)
}

/// Reads a mono integer-PCM WAV stream; `source_id` labels the clip and errors.
pub fn read_wav<R: Read>(reader: R, source_id: impl Into<String>) -> Result<AudioClip, AudioError> {
    let source_id = source_id.into();
    let reader = hound::WavReader::new(reader).map_err(|e| wav_error(&source_id, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(AudioError::UnsupportedEncoding {
            source_id,
            reason: "floating-point samples".into(),
        });
    }
    if spec.channels != 1 {
        return Err(AudioError::UnsupportedEncoding {
            source_id,
            reason: format!("{} channels, expected mono", spec.channels),
        });
    }
    if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
        return Err(AudioError::UnsupportedEncoding {
            source_id,
            reason: format!("{}-bit samples", spec.bits_per_sample),
        });
    }
    let full_scale = 2f64.powi(i32::from(spec.bits_per_sample) - 1);
    let samples = reader
        .into_samples::<i32>()
        .map(|s| s.map(|v| f64::from(v) / full_scale))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| wav_error(&source_id, e))?;
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio { source_id });
    }
    Ok(AudioClip {
        samples,
        sample_rate: spec.sample_rate,
        source_id,
    })
}

fn wav_error(source_id: &str, err: hound::Error) -> AudioError {
    let source_id = source_id.to_string();
    match err {
        // hound reports short reads as synthetic (non-OS) io errors
        hound::Error::IoError(source)
            if source.kind() == std::io::ErrorKind::UnexpectedEof
                || (source.raw_os_error().is_none()
                    && source.kind() == std::io::ErrorKind::Other) =>
        {
            AudioError::MalformedContainer {
                source_id,
                reason: "truncated data".into(),
            }
        }
        hound::Error::IoError(source) => AudioError::Io { source_id, source },
        hound::Error::Unsupported => AudioError::UnsupportedEncoding {
            source_id,
            reason: "non-PCM or unsupported WAVE format".into(),
        },
        other => AudioError::MalformedContainer {
            source_id,
            reason: other.to_string(),
        },
    }
}

/// Writes `clip` as 16-bit mono PCM. Samples are clamped to `[-1, 1]` and
/// rounded to the nearest code.
pub fn write_wav_pcm16<W: Write + Seek>(clip: &AudioClip, writer: W) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut out = hound::WavWriter::new(writer, spec).map_err(|e| wav_error(&clip.source_id, e))?;
    for &s in &clip.samples {
        let code = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.write_sample(code)
            .map_err(|e| wav_error(&clip.source_id, e))?;
    }
    out.finalize().map_err(|e| wav_error(&clip.source_id, e))
}

/// First-order pre-emphasis `y[t] = x[t] - alpha * x[t-1]`, `y[0] = x[0]`.
///
/// The output may exceed unit magnitude by up to `alpha`.
pub fn pre_emphasize(clip: &AudioClip, alpha: f64) -> Result<AudioClip, AudioError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(AudioError::InvalidParameter(format!(
            "pre-emphasis {alpha} outside [0, 1)"
        )));
    }
    let x = &clip.samples;
    let mut samples = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        samples.push(first);
        samples.extend(x.windows(2).map(|w| w[1] - alpha * w[0]));
    }
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
        source_id: clip.source_id.clone(),
    })
}

/// Slices `clip` into frames of `round(frame_ms * sr / 1000)` samples every
/// `round(hop_ms * sr / 1000)` samples. Trailing samples that do not fill a
/// whole frame are dropped. Pre-emphasis is not applied here.
pub fn frame_signal(clip: &AudioClip, cfg: &FrameConfig) -> Result<FrameMatrix, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyAudio {
            source_id: clip.source_id.clone(),
        });
    }
    let (frame_len, hop) = cfg.lengths(clip.sample_rate)?;
    let n = clip.len();
    if n < frame_len {
        return Err(AudioError::ClipTooShort {
            source_id: clip.source_id.clone(),
            num_samples: n,
            frame_len,
        });
    }
    let num_frames = (n - frame_len) / hop + 1;
    let mut data = Vec::with_capacity(num_frames * frame_len);
    for t in 0..num_frames {
        data.extend_from_slice(&clip.samples[t * hop..t * hop + frame_len]);
    }
    Ok(FrameMatrix {
        data,
        num_frames,
        frame_len,
        hop,
        sample_rate: clip.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn clip(samples: Vec<f64>, sr: u32) -> AudioClip {
        AudioClip::new(samples, sr, "test").unwrap()
    }

    fn wav_bytes(spec: hound::WavSpec, samples: &[i32]) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
        for &s in samples {
            match spec.bits_per_sample {
                8 => w.write_sample(s as i8).unwrap(),
                16 => w.write_sample(s as i16).unwrap(),
                _ => w.write_sample(s).unwrap(),
            }
        }
        w.finalize().unwrap();
        buf.into_inner()
    }

    fn mono(bits: u16, sr: u32) -> hound::WavSpec {
        hound::WavSpec {
            channels: 1,
            sample_rate: sr,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        }
    }

    #[test]
    fn pcm16_half_scale() {
        let bytes = wav_bytes(mono(16, 16000), &[16384, -32768, 0]);
        let c = read_wav(Cursor::new(bytes), "x.wav").unwrap();
        assert_eq!(c.sample_rate(), 16000);
        assert_eq!(c.samples(), &[0.5, -1.0, 0.0]);
        assert_eq!(c.source_id(), "x.wav");
    }

    #[test]
    fn other_bit_depths_normalize() {
        for (bits, v) in [(8u16, 64i32), (24, 1 << 22), (32, 1 << 30)] {
            let bytes = wav_bytes(mono(bits, 8000), &[v]);
            let c = read_wav(Cursor::new(bytes), "x").unwrap();
            assert_eq!(c.samples(), &[0.5], "{bits}-bit");
        }
    }

    #[test]
    fn stereo_is_unsupported() {
        let mut spec = mono(16, 16000);
        spec.channels = 2;
        let bytes = wav_bytes(spec, &[1, 2, 3, 4]);
        let err = read_wav(Cursor::new(bytes), "s.wav").unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedEncoding { .. }), "{err}");
    }

    #[test]
    fn float_is_unsupported() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut buf = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        let err = read_wav(Cursor::new(buf.into_inner()), "f").unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedEncoding { .. }));
    }

    #[test]
    fn one_second_of_silence() {
        let bytes = wav_bytes(mono(16, 8000), &vec![0; 8000]);
        let c = read_wav(Cursor::new(bytes), "z").unwrap();
        assert_eq!(c.len(), 8000);
        assert!(c.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn empty_and_garbage() {
        let bytes = wav_bytes(mono(16, 8000), &[]);
        assert!(matches!(
            read_wav(Cursor::new(bytes), "e").unwrap_err(),
            AudioError::EmptyAudio { .. }
        ));
        let err = read_wav(Cursor::new(b"RIFX\0\0\0\0junkjunk".to_vec()), "g").unwrap_err();
        assert!(matches!(err, AudioError::MalformedContainer { .. }), "{err}");
    }

    #[test]
    fn truncated_data_chunk() {
        let mut bytes = wav_bytes(mono(16, 8000), &[1, 2, 3, 4, 5, 6]);
        bytes.truncate(bytes.len() - 3);
        let err = read_wav(Cursor::new(bytes), "t").unwrap_err();
        assert!(matches!(err, AudioError::MalformedContainer { .. }), "{err}");
    }

    #[test]
    fn pcm16_write_read() {
        let c = clip(vec![0.0, 0.5, -0.25, 1.0, -1.0], 22050);
        let mut buf = Cursor::new(Vec::new());
        write_wav_pcm16(&c, &mut buf).unwrap();
        let back = read_wav(Cursor::new(buf.into_inner()), "test").unwrap();
        assert_eq!(back.sample_rate(), 22050);
        for (a, b) in c.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0 + 1e-12);
        }
    }

    #[test]
    fn clip_rejects_out_of_range() {
        assert!(AudioClip::new(vec![1.5], 8000, "x").is_err());
        assert!(AudioClip::new(vec![0.1], 0, "x").is_err());
    }

    #[test]
    fn pre_emphasis_closed_forms() {
        let x = clip(vec![0.3, -0.2, 0.9], 8000);
        assert_eq!(pre_emphasize(&x, 0.0).unwrap(), x);

        let c = 0.4;
        let y = pre_emphasize(&clip(vec![c; 10], 8000), 0.97).unwrap();
        assert_eq!(y.samples()[0], c);
        for &v in &y.samples()[1..] {
            assert!((v - 0.03 * c).abs() < 1e-15);
        }

        let y = pre_emphasize(&clip(vec![1.0, 0.0, 0.0], 8000), 0.5).unwrap();
        assert_eq!(y.samples(), &[1.0, -0.5, 0.0]);

        assert!(pre_emphasize(&x, 1.0).is_err());
    }

    #[test]
    fn frame_counts() {
        let f = frame_signal(&clip(vec![0.0; 16000], 16000), &FrameConfig::default()).unwrap();
        assert_eq!((f.frame_len(), f.hop()), (400, 160));
        assert_eq!(f.num_frames(), (16000 - 400) / 160 + 1);
        assert_eq!(f.num_frames(), 98);

        let f = frame_signal(&clip(vec![0.0; 400], 16000), &FrameConfig::default()).unwrap();
        assert_eq!(f.num_frames(), 1);

        let err = frame_signal(&clip(vec![0.0; 399], 16000), &FrameConfig::default()).unwrap_err();
        assert!(matches!(err, AudioError::ClipTooShort { frame_len: 400, .. }));
    }

    #[test]
    fn frame_config_validation() {
        let bad = FrameConfig {
            frame_ms: 10.0,
            hop_ms: 25.0,
            ..FrameConfig::default()
        };
        assert!(bad.lengths(16000).is_err());
        let tiny = FrameConfig {
            frame_ms: 0.1,
            hop_ms: 0.1,
            ..FrameConfig::default()
        };
        assert!(tiny.lengths(8000).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn consecutive_frames_overlap(
                samples in prop::collection::vec(-1.0f64..1.0, 480..2000),
                frame_ms in 5.0f64..30.0,
                hop_frac in 0.1f64..1.0,
            ) {
                let cfg = FrameConfig { frame_ms, hop_ms: frame_ms * hop_frac, pre_emphasis: 0.97 };
                let c = clip(samples, 16000);
                let f = frame_signal(&c, &cfg).unwrap();
                let (l, h) = (f.frame_len(), f.hop());
                prop_assert_eq!(f.num_frames(), (c.len() - l) / h + 1);
                for t in 0..f.num_frames().saturating_sub(1) {
                    prop_assert_eq!(&f.frame(t)[h..], &f.frame(t + 1)[..l - h]);
                }
                prop_assert_eq!(f.clone(), frame_signal(&c, &cfg).unwrap());
            }

            #[test]
            fn pre_emphasis_inverts(
                samples in prop::collection::vec(-1.0f64..1.0, 1..500),
                alpha in 0.0f64..0.999,
            ) {
                let x = clip(samples, 8000);
                let y = pre_emphasize(&x, alpha).unwrap();
                prop_assert_eq!(y.len(), x.len());
                let xs = x.samples();
                let ys = y.samples();
                prop_assert_eq!(ys[0], xs[0]);
                for t in 1..xs.len() {
                    let back = ys[t] + alpha * xs[t - 1];
                    prop_assert!((back - xs[t]).abs() < 1e-12);
                }
            }
        }
    }
}
