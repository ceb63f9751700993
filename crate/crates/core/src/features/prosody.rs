//! Energy and pitch prosody tracks.
//!
//! Both come in two time scales: instantaneous values taken per frame, and a
//! syllabic contour obtained by low-pass filtering the frame-rate sequence.
//! Pitch is the lag of the normalized-autocorrelation maximum, taken without
//! smoothing; the syllabic pitch contour is median filtered first.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dynamics::delta_1d;
use super::{FeatureError, ENERGY_FLOOR};
use crate::audio::FrameMatrix;

/// Fraction of the global autocorrelation maximum a local peak must reach to
/// be taken as the period. Integer lags that land exactly on a multiple of a
/// fractional period otherwise beat the period itself.
pub const PITCH_PEAK_THRESHOLD: f64 = 0.9;

/// Lag assumed before the first voiced frame, as a frequency.
pub const DEFAULT_PITCH_HZ: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProsodyConfig {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub contour_cutoff_hz: f64,
    pub median_width: usize,
    pub delta_window: usize,
}

impl Default for ProsodyConfig {
    fn default() -> Self {
        Self {
            f_lo_hz: 60.0,
            f_hi_hz: 400.0,
            contour_cutoff_hz: 8.0,
            median_width: 5,
            delta_window: 2,
        }
    }
}

/// Per-frame energy tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyFeatures {
    pub log_energy: Vec<f64>,
    pub d_log_energy: Vec<f64>,
    pub dd_log_energy: Vec<f64>,
    pub contour: Vec<f64>,
    pub d_contour_energy: Vec<f64>,
    pub dd_contour_energy: Vec<f64>,
}

/// Per-frame pitch tracks. `lag` is the raw estimate in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchFeatures {
    pub lag: Vec<f64>,
    pub voiced: Vec<bool>,
    pub ac_max: Vec<f64>,
    pub d_ac_max: Vec<f64>,
    pub dd_ac_max: Vec<f64>,
    pub d_log_lag: Vec<f64>,
    pub dd_log_lag: Vec<f64>,
    pub median_lag: Vec<f64>,
    pub contour_lag: Vec<f64>,
    pub d_contour_lag: Vec<f64>,
    pub dd_contour_lag: Vec<f64>,
}

/// The eleven prosody components, one value per frame each.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyVector {
    pub d_log_energy: Vec<f64>,
    pub dd_log_energy: Vec<f64>,
    pub d_contour_energy: Vec<f64>,
    pub dd_contour_energy: Vec<f64>,
    pub ac_max: Vec<f64>,
    pub d_ac_max: Vec<f64>,
    pub dd_ac_max: Vec<f64>,
    pub d_log_lag: Vec<f64>,
    pub dd_log_lag: Vec<f64>,
    pub d_contour_lag: Vec<f64>,
    pub dd_contour_lag: Vec<f64>,
}

impl ProsodyVector {
    pub const DIM: usize = 11;

    pub fn num_frames(&self) -> usize {
        self.ac_max.len()
    }

    fn columns(&self) -> [&[f64]; Self::DIM] {
        [
            &self.d_log_energy,
            &self.dd_log_energy,
            &self.d_contour_energy,
            &self.dd_contour_energy,
            &self.ac_max,
            &self.d_ac_max,
            &self.dd_ac_max,
            &self.d_log_lag,
            &self.dd_log_lag,
            &self.d_contour_lag,
            &self.dd_contour_lag,
        ]
    }

    /// Frame-major rows in the field order above.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let cols = self.columns();
        (0..self.num_frames())
            .map(|t| cols.iter().map(|c| c[t]).collect())
            .collect()
    }
}

/// Result of one autocorrelation search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchEstimate {
    pub lag: usize,
    pub ac_max: f64,
}

/// Median over a centred window of odd `width`, replicating edge values.
pub fn median_filter(seq: &[f64], width: usize) -> Result<Vec<f64>, FeatureError> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(FeatureError::InvalidParameter(format!(
            "median width {width} must be odd and >= 1"
        )));
    }
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    let half = width / 2;
    let last = seq.len() - 1;
    let mut window = vec![0.0; width];
    Ok((0..seq.len())
        .map(|t| {
            for (j, w) in window.iter_mut().enumerate() {
                let idx = (t + j).saturating_sub(half).min(last);
                *w = seq[idx];
            }
            window.sort_by(f64::total_cmp);
            window[half]
        })
        .collect())
}

/// Zero-phase single-pole low-pass: one causal pass then one anti-causal pass
/// of `y = (1 - a) x + a y_prev` with `a = exp(-2 pi cutoff / frame_rate)`.
/// Each pass starts from its first input so a constant passes unchanged.
pub fn lowpass_contour(seq: &[f64], cutoff_hz: f64, frame_rate: f64) -> Result<Vec<f64>, FeatureError> {
    if !(cutoff_hz > 0.0 && cutoff_hz < frame_rate / 2.0) {
        return Err(FeatureError::InvalidParameter(format!(
            "contour cutoff {cutoff_hz} Hz must lie in (0, {}) at {frame_rate} frames/s",
            frame_rate / 2.0
        )));
    }
    let a = (-2.0 * PI * cutoff_hz / frame_rate).exp();
    let smooth = |input: &mut dyn Iterator<Item = f64>| -> Vec<f64> {
        let mut prev = None;
        input
            .map(|x| {
                let y = match prev {
                    None => x,
                    Some(p) => (1.0 - a) * x + a * p,
                };
                prev = Some(y);
                y
            })
            .collect()
    };
    let forward = smooth(&mut seq.iter().copied());
    let mut out = smooth(&mut forward.iter().rev().copied());
    out.reverse();
    Ok(out)
}

/// Per-frame log mean energy and its instantaneous and syllabic derivatives.
pub fn energy_features(
    frames: &FrameMatrix,
    contour_cutoff_hz: f64,
    delta_window: usize,
) -> Result<EnergyFeatures, FeatureError> {
    let log_energy: Vec<f64> = frames
        .frames()
        .map(|f| {
            let mean = f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64;
            mean.max(ENERGY_FLOOR).ln()
        })
        .collect();
    let d_log_energy = delta_1d(&log_energy, delta_window);
    let dd_log_energy = delta_1d(&d_log_energy, delta_window);
    let contour = lowpass_contour(&log_energy, contour_cutoff_hz, frames.frame_rate())?;
    let d_contour_energy = delta_1d(&contour, delta_window);
    let dd_contour_energy = delta_1d(&d_contour_energy, delta_window);
    Ok(EnergyFeatures {
        log_energy,
        d_log_energy,
        dd_log_energy,
        contour,
        d_contour_energy,
        dd_contour_energy,
    })
}

/// Lag bounds `[ceil(sr / f_hi), floor(sr / f_lo)]`, checked against the frame.
fn lag_range(frame_len: usize, sample_rate: u32, f_lo: f64, f_hi: f64) -> Result<(usize, usize), FeatureError> {
    if !(f_lo > 0.0 && f_lo < f_hi) {
        return Err(FeatureError::InvalidParameter(format!(
            "pitch range [{f_lo}, {f_hi}] Hz is empty"
        )));
    }
    let sr = f64::from(sample_rate);
    let lo = ((sr / f_hi).ceil() as usize).max(1);
    let hi = (sr / f_lo).floor() as usize;
    if lo > hi || hi >= frame_len {
        return Err(FeatureError::InvalidParameter(format!(
            "lag window [{lo}, {hi}] does not fit a {frame_len}-sample frame"
        )));
    }
    Ok((lo, hi))
}

/// Normalized autocorrelation over the overlap for each lag in `[lo, hi]`.
fn normalized_autocorrelation(x: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi)
        .map(|tau| {
            let (a, b) = (&x[..x.len() - tau], &x[tau..]);
            let mut num = 0.0;
            let mut ea = 0.0;
            let mut eb = 0.0;
            for (&u, &v) in a.iter().zip(b) {
                num += u * v;
                ea += u * u;
                eb += v * v;
            }
            let den = (ea * eb).sqrt();
            if den < ENERGY_FLOOR {
                0.0
            } else {
                (num / den).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

/// Pitch lag of one frame as the position of the normalized-autocorrelation
/// maximum in `[sr/f_hi, sr/f_lo]`.
///
/// Local peaks reaching [`PITCH_PEAK_THRESHOLD`] of the maximum count as ties
/// with it, and the smallest such lag is returned.
pub fn autocorrelation_pitch(
    frame: &[f64],
    sample_rate: u32,
    f_lo: f64,
    f_hi: f64,
) -> Result<PitchEstimate, FeatureError> {
    let (lo, hi) = lag_range(frame.len(), sample_rate, f_lo, f_hi)?;
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if energy < ENERGY_FLOOR {
        return Err(FeatureError::SilentFrame);
    }
    let ac = normalized_autocorrelation(frame, lo, hi);
    let best = ac.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = if best > 0.0 { PITCH_PEAK_THRESHOLD * best } else { best };
    let is_peak = |i: usize| {
        let left = i == 0 || ac[i] >= ac[i - 1];
        let right = i + 1 == ac.len() || ac[i] >= ac[i + 1];
        left && right
    };
    let idx = (0..ac.len())
        .find(|&i| ac[i] >= threshold && is_peak(i))
        .or_else(|| ac.iter().position(|&v| v == best))
        .unwrap_or(0);
    Ok(PitchEstimate {
        lag: lo + idx,
        ac_max: ac[idx],
    })
}

/// Instantaneous and syllabic pitch tracks for every frame.
///
/// Silent frames record `ac_max = 0` and repeat the previous lag (initially
/// `sr / 150`).
pub fn pitch_features(frames: &FrameMatrix, cfg: &ProsodyConfig) -> Result<PitchFeatures, FeatureError> {
    lag_range(frames.frame_len(), frames.sample_rate(), cfg.f_lo_hz, cfg.f_hi_hz)?;
    let mut prev_lag = f64::from(frames.sample_rate()) / DEFAULT_PITCH_HZ;
    let t_len = frames.num_frames();
    let mut lag = Vec::with_capacity(t_len);
    let mut ac_max = Vec::with_capacity(t_len);
    let mut voiced = Vec::with_capacity(t_len);
    for frame in frames.frames() {
        match autocorrelation_pitch(frame, frames.sample_rate(), cfg.f_lo_hz, cfg.f_hi_hz) {
            Ok(est) => {
                prev_lag = est.lag as f64;
                lag.push(prev_lag);
                ac_max.push(est.ac_max);
                voiced.push(true);
            }
            Err(FeatureError::SilentFrame) => {
                lag.push(prev_lag);
                ac_max.push(0.0);
                voiced.push(false);
            }
            Err(e) => return Err(e),
        }
    }
    let w = cfg.delta_window;
    let log_lag: Vec<f64> = lag.iter().map(|l| l.ln()).collect();
    let d_log_lag = delta_1d(&log_lag, w);
    let dd_log_lag = delta_1d(&d_log_lag, w);
    let d_ac_max = delta_1d(&ac_max, w);
    let dd_ac_max = delta_1d(&d_ac_max, w);
    let median_lag = median_filter(&lag, cfg.median_width)?;
    let contour_lag = lowpass_contour(&median_lag, cfg.contour_cutoff_hz, frames.frame_rate())?;
    let d_contour_lag = delta_1d(&contour_lag, w);
    let dd_contour_lag = delta_1d(&d_contour_lag, w);
    Ok(PitchFeatures {
        lag,
        voiced,
        ac_max,
        d_ac_max,
        dd_ac_max,
        d_log_lag,
        dd_log_lag,
        median_lag,
        contour_lag,
        d_contour_lag,
        dd_contour_lag,
    })
}

/// Energy and pitch tracks assembled into a [`ProsodyVector`].
pub fn prosody_features(frames: &FrameMatrix, cfg: &ProsodyConfig) -> Result<ProsodyVector, FeatureError> {
    let e = energy_features(frames, cfg.contour_cutoff_hz, cfg.delta_window)?;
    let p = pitch_features(frames, cfg)?;
    Ok(ProsodyVector {
        d_log_energy: e.d_log_energy,
        dd_log_energy: e.dd_log_energy,
        d_contour_energy: e.d_contour_energy,
        dd_contour_energy: e.dd_contour_energy,
        ac_max: p.ac_max,
        d_ac_max: p.d_ac_max,
        dd_ac_max: p.dd_ac_max,
        d_log_lag: p.d_log_lag,
        dd_log_lag: p.dd_log_lag,
        d_contour_lag: p.d_contour_lag,
        dd_contour_lag: p.dd_contour_lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{frame_signal, AudioClip, FrameConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sawtooth(f0: f64, sr: u32, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let ph = (i as f64 * f0 / f64::from(sr)).fract();
                amp * (2.0 * ph - 1.0)
            })
            .collect()
    }

    fn frames_of(samples: Vec<f64>, sr: u32) -> FrameMatrix {
        let clip = AudioClip::new(samples, sr, "t").unwrap();
        frame_signal(&clip, &FrameConfig::default()).unwrap()
    }

    #[test]
    fn median_cases() {
        let x = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(median_filter(&x, 1).unwrap(), x.to_vec());
        assert_eq!(
            median_filter(&[1.0, 1.0, 9.0, 1.0, 1.0], 3).unwrap(),
            vec![1.0; 5]
        );
        let mono: Vec<f64> = (0..10).map(|v| v as f64 * 1.5).collect();
        assert_eq!(median_filter(&mono, 5).unwrap(), mono);
        assert!(median_filter(&x, 4).is_err());
        assert!(median_filter(&x, 0).is_err());
    }

    #[test]
    fn median_removes_lag_spike() {
        let mut lag = vec![80.0; 11];
        lag[5] = 160.0;
        assert_eq!(median_filter(&lag, 5).unwrap(), vec![80.0; 11]);
    }

    #[test]
    fn lowpass_constant_and_impulse() {
        let c = lowpass_contour(&[2.5; 50], 8.0, 100.0).unwrap();
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-10));

        let mut imp = vec![0.0; 81];
        imp[40] = 1.0;
        let y = lowpass_contour(&imp, 8.0, 100.0).unwrap();
        let peak = (0..81).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
        assert_eq!(peak, 40);
        for d in 1..30 {
            assert!((y[40 - d] - y[40 + d]).abs() < 1e-9, "asymmetric at {d}");
        }
    }

    #[test]
    fn lowpass_attenuates_nyquist() {
        // steady-state gain per pass is (1 - a) / (1 + a); two passes ~0.061
        let a = (-2.0 * PI * 8.0 / 100.0f64).exp();
        let expected = ((1.0 - a) / (1.0 + a)).powi(2);
        assert!(expected < 0.15);
        let x: Vec<f64> = (0..400).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = lowpass_contour(&x, 8.0, 100.0).unwrap();
        let mid = y[100..300].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(mid < 0.15, "{mid}");
        assert!((mid - expected).abs() < 1e-6, "{mid} vs {expected}");
        assert!(lowpass_contour(&x, 60.0, 100.0).is_err());
    }

    #[test]
    fn sawtooth_pitch() {
        let x = sawtooth(200.0, 16000, 400, 0.5);
        let est = autocorrelation_pitch(&x, 16000, 60.0, 400.0).unwrap();
        assert!((est.lag as i64 - 80).abs() <= 1, "{est:?}");
        assert!(est.ac_max > 0.9);
    }

    #[test]
    fn noise_is_less_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise: Vec<f64> = (0..400).map(|_| rng.random_range(-0.5..0.5)).collect();
        let n = autocorrelation_pitch(&noise, 16000, 60.0, 400.0).unwrap();
        let s = autocorrelation_pitch(&sawtooth(200.0, 16000, 400, 0.5), 16000, 60.0, 400.0).unwrap();
        assert!(n.ac_max < s.ac_max);
        assert!(n.ac_max < 0.6, "{n:?}");
    }

    #[test]
    fn silent_frame() {
        assert!(matches!(
            autocorrelation_pitch(&[0.0; 400], 16000, 60.0, 400.0),
            Err(FeatureError::SilentFrame)
        ));
        assert!(autocorrelation_pitch(&[0.1; 100], 16000, 60.0, 400.0).is_err());
    }

    #[test]
    fn constant_amplitude_energy() {
        let f = frames_of(sawtooth(150.0, 16000, 16000, 0.3), 16000);
        let e = energy_features(&f, 8.0, 2).unwrap();
        let t = f.num_frames();
        for &v in &e.d_log_energy[2..t - 2] {
            assert!(v.abs() < 0.02, "{v}");
        }
    }

    #[test]
    fn growing_amplitude_energy_slope() {
        // amplitude multiplies by r each frame: log mean energy climbs 2 ln r per frame
        let sr = 16000;
        let hop = 160.0;
        let r: f64 = 1.02;
        let x: Vec<f64> = (0..16000)
            .map(|i| {
                let amp = 0.01 * r.powf(i as f64 / hop);
                amp * (2.0 * PI * 1000.0 * i as f64 / f64::from(sr)).sin()
            })
            .collect();
        let f = frames_of(x, sr);
        let e = energy_features(&f, 8.0, 2).unwrap();
        let slope = 2.0 * r.ln();
        for &v in &e.d_log_energy[2..f.num_frames() - 2] {
            assert!((v - slope).abs() < 1e-3 * slope.max(1.0), "{v} vs {slope}");
        }
    }

    #[test]
    fn silence_energy() {
        let f = frames_of(vec![0.0; 8000], 16000);
        let e = energy_features(&f, 8.0, 2).unwrap();
        assert!(e.log_energy.iter().all(|&v| v == ENERGY_FLOOR.ln()));
        assert!(e.d_log_energy.iter().chain(&e.dd_contour_energy).all(|&v| v == 0.0));
        let p = pitch_features(&f, &ProsodyConfig::default()).unwrap();
        assert!(p.ac_max.iter().all(|&v| v == 0.0));
        assert!(p.lag.iter().all(|&l| (l - 16000.0 / 150.0).abs() < 1e-12));
    }

    #[test]
    fn constant_pitch_log_lag_flat() {
        let f = frames_of(sawtooth(125.0, 16000, 16000, 0.4), 16000);
        let p = pitch_features(&f, &ProsodyConfig::default()).unwrap();
        let t = f.num_frames();
        for &v in &p.d_log_lag[2..t - 2] {
            assert!(v.abs() < 1e-9);
        }
        assert!(p.voiced.iter().all(|&v| v));
    }

    #[test]
    fn lag_doubling_step() {
        // the log-lag difference across a doubling is ln 2 exactly
        let lag = [80.0f64, 80.0, 160.0, 160.0];
        let log_lag: Vec<f64> = lag.iter().map(|l| l.ln()).collect();
        assert!((log_lag[2] - log_lag[1] - 2f64.ln()).abs() < 1e-12);
        // with a window of 1 the delta at the step sees half of it from each side
        let d = delta_1d(&log_lag, 1);
        assert!((d[1] - 2f64.ln() / 2.0).abs() < 1e-12);
        assert!((d[2] - 2f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn prosody_rows_shape() {
        let f = frames_of(sawtooth(180.0, 16000, 8000, 0.4), 16000);
        let p = prosody_features(&f, &ProsodyConfig::default()).unwrap();
        let rows = p.rows();
        assert_eq!(rows.len(), f.num_frames());
        assert!(rows.iter().all(|r| r.len() == ProsodyVector::DIM));
        assert!(rows.iter().flatten().all(|v| v.is_finite()));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ac_max_in_bounds(x in prop::collection::vec(-1.0f64..1.0, 400)) {
                if let Ok(est) = autocorrelation_pitch(&x, 16000, 60.0, 400.0) {
                    prop_assert!(est.ac_max >= -1.0 - 1e-9 && est.ac_max <= 1.0 + 1e-9);
                    prop_assert!((40..=266).contains(&est.lag));
                }
            }
        }
    }
}
