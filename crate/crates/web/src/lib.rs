//! Browser bindings for the feature front end.
//!
//! Three operations are exported: a mel filterbank as a dense matrix, a
//! synthesized utterance with its cepstra and pitch track, and re-smoothing
//! of that pitch track with user-chosen median width and contour cutoff.

use emorec::audio::{frame_signal, AudioClip, FrameConfig};
use emorec::classifier::EmotionLabel;
use emorec::corpus::{render_utterance, Gender, SynthProfile};
use emorec::features::{
    build_mel_filterbank, energy_features, extract_mfcc39, lowpass_contour, median_filter, pitch_features,
    FeatureConfig,
};
use wasm_bindgen::prelude::*;

// Errors cross into JS as thrown strings, which keeps the functions callable
// from native tests.
fn msg<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Row-major `num_filters x (fft_size / 2 + 1)` filter weights.
#[wasm_bindgen]
pub fn mel_filterbank(
    num_filters: usize,
    fft_size: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<Vec<f64>, String> {
    let fb = build_mel_filterbank(num_filters, fft_size, sample_rate, fmin, fmax).map_err(msg)?;
    Ok(fb.dense().concat())
}

/// One synthetic utterance and the tracks computed from it.
#[wasm_bindgen]
pub struct Utterance {
    clip: AudioClip,
    mfcc: Vec<f64>,
    mfcc_dim: usize,
    num_frames: usize,
    frame_rate: f64,
    log_energy: Vec<f64>,
    lag: Vec<f64>,
    voiced: Vec<bool>,
}

#[wasm_bindgen]
impl Utterance {
    /// Renders `label`/`gender` with `seed` and runs the default front end.
    #[wasm_bindgen(constructor)]
    pub fn new(label: &str, gender: &str, seed: u32, duration_s: f64) -> Result<Utterance, String> {
        let label: EmotionLabel = label.parse().map_err(msg)?;
        let gender: Gender = gender.parse()?;
        let clip = render_utterance(&SynthProfile::for_label(label), gender, duration_s, 16_000, u64::from(seed))
            .map_err(msg)?;
        Self::analyze(clip)
    }

    fn analyze(clip: AudioClip) -> Result<Utterance, String> {
        let cfg = FeatureConfig::default();
        let mfcc = extract_mfcc39(&clip, &cfg.frame, &cfg.mfcc).map_err(msg)?;
        let frames = frame_signal(&clip, &FrameConfig::default()).map_err(msg)?;
        let energy = energy_features(&frames, cfg.prosody.contour_cutoff_hz, cfg.prosody.delta_window)
            .map_err(msg)?;
        let pitch = pitch_features(&frames, &cfg.prosody).map_err(msg)?;
        Ok(Utterance {
            mfcc_dim: mfcc.dim(),
            num_frames: mfcc.num_frames(),
            frame_rate: mfcc.frame_rate(),
            mfcc: mfcc.as_flat().to_vec(),
            log_energy: energy.log_energy,
            lag: pitch.lag,
            voiced: pitch.voiced,
            clip,
        })
    }

    pub fn samples(&self) -> Vec<f32> {
        self.clip.samples().iter().map(|&s| s as f32).collect()
    }

    #[wasm_bindgen(getter)]
    pub fn sample_rate(&self) -> u32 {
        self.clip.sample_rate()
    }

    #[wasm_bindgen(getter)]
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    #[wasm_bindgen(getter)]
    pub fn mfcc_dim(&self) -> usize {
        self.mfcc_dim
    }

    #[wasm_bindgen(getter)]
    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    /// Row-major `num_frames x mfcc_dim` cepstral stack.
    pub fn mfcc(&self) -> Vec<f64> {
        self.mfcc.clone()
    }

    pub fn log_energy(&self) -> Vec<f64> {
        self.log_energy.clone()
    }

    /// Raw pitch per frame in Hz; NaN where the frame was silent.
    pub fn pitch_hz(&self) -> Vec<f64> {
        let sr = f64::from(self.clip.sample_rate());
        self.lag
            .iter()
            .zip(&self.voiced)
            .map(|(&l, &v)| if v { sr / l } else { f64::NAN })
            .collect()
    }

    /// Syllabic pitch contour in Hz after a median of odd `median_width`
    /// frames and a zero-phase low-pass at `cutoff_hz`.
    pub fn pitch_contour(&self, median_width: usize, cutoff_hz: f64) -> Result<Vec<f64>, String> {
        let median = median_filter(&self.lag, median_width).map_err(msg)?;
        let smooth = lowpass_contour(&median, cutoff_hz, self.frame_rate).map_err(msg)?;
        let sr = f64::from(self.clip.sample_rate());
        Ok(smooth.into_iter().map(|l| sr / l).collect())
    }
}
