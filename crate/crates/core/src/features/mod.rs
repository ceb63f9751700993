//! Frame-level acoustic features.
//!
//! The default stack per frame is 13 cepstra (log energy in place of c0),
//! their regression deltas and the deltas of those deltas: 39 values. Static
//! cepstra are mean-normalized per utterance before the deltas are taken.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError, FrameConfig, FrameMatrix};

pub mod dynamics;
pub mod file;
pub mod prosody;
pub mod spectral;

pub use dynamics::{cepstral_mean_normalize, delta, delta_1d};
pub use prosody::{
    autocorrelation_pitch, energy_features, lowpass_contour, median_filter, pitch_features,
    prosody_features, EnergyFeatures, PitchEstimate, PitchFeatures, ProsodyConfig, ProsodyVector,
};
pub use spectral::{
    build_mel_filterbank, hamming_window, hz_to_mel, mel_to_hz, mfcc_frame, power_spectrum, Dct,
    MelFilterbank, PowerSpectrum,
};

/// Floor applied to every energy before a logarithm (full scale is 1.0).
pub const ENERGY_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("invalid feature parameter: {0}")]
    InvalidParameter(String),
    #[error("mel filter {filter} collapses onto FFT bin {bin}; increase the FFT size or reduce the filter count")]
    DegenerateBand { filter: usize, bin: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("frame energy below the silence floor")]
    SilentFrame,
    #[error("non-finite feature value at frame {frame}, dimension {dim}")]
    NonFinite { frame: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mfcc39,
    Prosody,
    Combined,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Mfcc39 => "mfcc39",
            FeatureKind::Prosody => "prosody",
            FeatureKind::Combined => "combined",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mfcc39" => Ok(FeatureKind::Mfcc39),
            "prosody" => Ok(FeatureKind::Prosody),
            "combined" => Ok(FeatureKind::Combined),
            other => Err(FeatureError::InvalidParameter(format!(
                "unknown feature kind {other:?}"
            ))),
        }
    }
}

/// `T x D` sequence of finite feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    num_frames: usize,
    dim: usize,
    frame_rate: f64,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn from_rows(
        rows: &[Vec<f64>],
        dim: usize,
        frame_rate: f64,
        kind: FeatureKind,
    ) -> Result<Self, FeatureError> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(FeatureError::LengthMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim, frame_rate, kind)
    }

    pub fn from_flat(
        data: Vec<f64>,
        dim: usize,
        frame_rate: f64,
        kind: FeatureKind,
    ) -> Result<Self, FeatureError> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(FeatureError::InvalidParameter(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                frame: i / dim,
                dim: i % dim,
            });
        }
        Ok(Self {
            num_frames: data.len() / dim,
            data,
            dim,
            frame_rate,
            kind,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Per-dimension mean over frames.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = self.num_frames.max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Cepstral analysis settings, including the mel filterbank layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub num_filters: usize,
    pub fmin_hz: f64,
    /// Upper band edge; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub num_ceps: usize,
    /// Sinusoidal lifter length; 0 disables liftering.
    pub lifter_len: usize,
    /// Power applied to the log mel energies (sign kept) when greater than 1.
    pub log_power_exponent: f64,
    /// Keep the DCT c0; when false, c0 is replaced by the log frame energy.
    pub include_c0: bool,
    pub delta_window: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            num_filters: 26,
            fmin_hz: 0.0,
            fmax_hz: None,
            num_ceps: 13,
            lifter_len: 22,
            log_power_exponent: 1.0,
            include_c0: false,
            delta_window: 2,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.num_ceps == 0 || self.num_ceps > self.num_filters {
            return Err(FeatureError::InvalidParameter(format!(
                "num_ceps {} must be in 1..={}",
                self.num_ceps, self.num_filters
            )));
        }
        if !(self.log_power_exponent >= 1.0 && self.log_power_exponent.is_finite()) {
            return Err(FeatureError::InvalidParameter(format!(
                "log_power_exponent {} must be >= 1",
                self.log_power_exponent
            )));
        }
        if self.delta_window == 0 {
            return Err(FeatureError::InvalidParameter("delta_window must be >= 1".into()));
        }
        Ok(())
    }

    /// Output dimension of the static + delta + acceleration stack.
    pub fn stacked_dim(&self) -> usize {
        3 * self.num_ceps
    }
}

/// Complete front-end configuration for one feature stream.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub frame: FrameConfig,
    pub mfcc: MfccConfig,
    pub prosody: ProsodyConfig,
    /// Append the 11 prosody tracks to the cepstral stack.
    pub prosody_enabled: bool,
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.mfcc.stacked_dim() + if self.prosody_enabled { ProsodyVector::DIM } else { 0 }
    }
}

/// Per-utterance cepstral analyser with the FFT plan, filterbank and DCT built once.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    frame: FrameConfig,
    cfg: MfccConfig,
    sample_rate: u32,
    window: Vec<f64>,
    spectrum: PowerSpectrum,
    bank: MelFilterbank,
    dct: Dct,
    lifter: Vec<f64>,
}

impl MfccExtractor {
    pub fn new(frame: FrameConfig, cfg: MfccConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        cfg.validate()?;
        let (frame_len, _) = frame.lengths(sample_rate)?;
        let fft_size = frame_len.next_power_of_two();
        let fmax = cfg.fmax_hz.unwrap_or(f64::from(sample_rate) / 2.0);
        let bank = build_mel_filterbank(cfg.num_filters, fft_size, sample_rate, cfg.fmin_hz, fmax)?;
        Ok(Self {
            frame,
            cfg,
            sample_rate,
            window: hamming_window(frame_len)?,
            spectrum: PowerSpectrum::new(fft_size)?,
            dct: Dct::new(cfg.num_filters),
            lifter: spectral::lifter_weights(cfg.num_ceps, cfg.lifter_len),
            bank,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    /// Static cepstra per frame, before mean normalization.
    pub fn static_cepstra(&self, clip: &AudioClip) -> Result<(Vec<Vec<f64>>, f64), FeatureError> {
        if clip.sample_rate() != self.sample_rate {
            return Err(FeatureError::InvalidParameter(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.sample_rate,
                clip.sample_rate()
            )));
        }
        let emphasized = audio::pre_emphasize(clip, self.frame.pre_emphasis)?;
        let frames = audio::frame_signal(&emphasized, &self.frame)?;
        let mut windowed = vec![0.0; frames.frame_len()];
        let statics = frames
            .frames()
            .map(|frame| {
                for ((w, x), h) in windowed.iter_mut().zip(frame).zip(&self.window) {
                    *w = x * h;
                }
                let power = self.spectrum.compute(&windowed)?;
                let mut c =
                    spectral::mfcc_frame_with(&power, &self.bank, &self.dct, &self.lifter, &self.cfg)?;
                if !self.cfg.include_c0 {
                    let energy: f64 = frame.iter().map(|x| x * x).sum();
                    c[0] = energy.max(ENERGY_FLOOR).ln();
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>, FeatureError>>()?;
        Ok((statics, frames.frame_rate()))
    }

    /// `[statics | deltas | accelerations]` per frame.
    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix, FeatureError> {
        let (statics, frame_rate) = self.static_cepstra(clip)?;
        let rows = stack_dynamics(&statics, self.cfg.delta_window);
        FeatureMatrix::from_rows(&rows, self.cfg.stacked_dim(), frame_rate, FeatureKind::Mfcc39)
    }
}

/// Mean-normalizes `statics` and appends first and second regression deltas.
pub fn stack_dynamics(statics: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let normalized = cepstral_mean_normalize(statics);
    let d1 = delta(&normalized, window);
    let d2 = delta(&d1, window);
    normalized
        .into_iter()
        .zip(d1)
        .zip(d2)
        .map(|((mut s, a), b)| {
            s.extend(a);
            s.extend(b);
            s
        })
        .collect()
}

/// The 39-dimensional cepstral stack for one clip.
pub fn extract_mfcc39(
    clip: &AudioClip,
    frame_cfg: &FrameConfig,
    cfg: &MfccConfig,
) -> Result<FeatureMatrix, FeatureError> {
    MfccExtractor::new(*frame_cfg, *cfg, clip.sample_rate())?.extract(clip)
}

/// Prosody tracks of the raw (not pre-emphasized) signal as a feature matrix.
pub fn extract_prosody(
    clip: &AudioClip,
    frame_cfg: &FrameConfig,
    cfg: &ProsodyConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let frames: FrameMatrix = audio::frame_signal(clip, frame_cfg)?;
    let p = prosody_features(&frames, cfg)?;
    FeatureMatrix::from_rows(&p.rows(), ProsodyVector::DIM, frames.frame_rate(), FeatureKind::Prosody)
}

/// Feature stream selected by `cfg`: the cepstral stack, optionally followed
/// by the prosody tracks.
pub fn extract_features(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    let mfcc = extract_mfcc39(clip, &cfg.frame, &cfg.mfcc)?;
    if !cfg.prosody_enabled {
        return Ok(mfcc);
    }
    let prosody = extract_prosody(clip, &cfg.frame, &cfg.prosody)?;
    debug_assert_eq!(mfcc.num_frames(), prosody.num_frames());
    let rows: Vec<Vec<f64>> = mfcc
        .rows()
        .zip(prosody.rows())
        .map(|(a, b)| a.iter().chain(b).copied().collect())
        .collect();
    FeatureMatrix::from_rows(&rows, cfg.dim(), mfcc.frame_rate(), FeatureKind::Combined)
}
