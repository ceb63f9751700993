//! Short-time spectral analysis: window, power spectrum, mel filterbank, DCT
//! and the per-frame cepstrum.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FeatureError, MfccConfig, ENERGY_FLOOR};

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi n / (len - 1))`.
pub fn hamming_window(len: usize) -> Result<Vec<f64>, FeatureError> {
    if len < 2 {
        return Err(FeatureError::InvalidParameter(format!(
            "window length {len} < 2"
        )));
    }
    let denom = (len - 1) as f64;
    Ok((0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect())
}

/// Reusable FFT plan producing one-sided power spectra of length `fft_size / 2 + 1`.
#[derive(Clone)]
pub struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
}

impl std::fmt::Debug for PowerSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PowerSpectrum")
            .field("fft_size", &self.fft_size)
            .finish()
    }
}

impl PowerSpectrum {
    pub fn new(fft_size: usize) -> Result<Self, FeatureError> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(FeatureError::InvalidParameter(format!(
                "fft size {fft_size} is not a power of two >= 2"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Ok(Self { fft, fft_size })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `|X_k|^2` for `k = 0..=fft_size/2`, zero-padding `frame` to the FFT size.
    pub fn compute(&self, frame: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if frame.len() > self.fft_size {
            return Err(FeatureError::InvalidParameter(format!(
                "frame of {} samples exceeds fft size {}",
                frame.len(),
                self.fft_size
            )));
        }
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.fft_size)
            .collect();
        self.fft.process(&mut buf);
        Ok(buf[..self.num_bins()].iter().map(|c| c.norm_sqr()).collect())
    }
}

/// One-shot power spectrum; see [`PowerSpectrum`] to reuse the plan.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>, FeatureError> {
    PowerSpectrum::new(fft_size)?.compute(frame)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centres equally spaced on the mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    num_filters: usize,
    fft_size: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
    /// `(start_bin, weights)` per filter; weights are zero outside this span.
    filters: Vec<(usize, Vec<f64>)>,
    edge_bins: Vec<usize>,
}

impl MelFilterbank {
    pub fn num_filters(&self) -> usize {
        self.num_filters
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn band(&self) -> (f64, f64) {
        (self.fmin, self.fmax)
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// FFT bin of each filter's peak.
    pub fn center_bins(&self) -> Vec<usize> {
        self.edge_bins[1..=self.num_filters].to_vec()
    }

    /// Dense `num_filters x (fft_size/2 + 1)` weight row for filter `i`.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.num_bins()];
        let (start, w) = &self.filters[i];
        row[*start..*start + w.len()].copy_from_slice(w);
        row
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.num_filters).map(|i| self.dense_row(i)).collect()
    }

    /// Filter outputs `sum_k w_ik * power[k]`.
    pub fn apply(&self, power: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if power.len() != self.num_bins() {
            return Err(FeatureError::LengthMismatch {
                expected: self.num_bins(),
                got: power.len(),
            });
        }
        Ok(self
            .filters
            .iter()
            .map(|(start, w)| {
                w.iter()
                    .zip(&power[*start..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect())
    }
}

/// Builds `num_filters` triangles between `fmin` and `fmax`. Edge `i` maps to
/// FFT bin `floor((fft_size + 1) * hz / sample_rate)`; triangle `i` rises from
/// edge `i` to a unit peak at edge `i + 1` and falls to zero at edge `i + 2`.
pub fn build_mel_filterbank(
    num_filters: usize,
    fft_size: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<MelFilterbank, FeatureError> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if num_filters == 0 {
        return Err(FeatureError::InvalidParameter("num_filters must be >= 1".into()));
    }
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(FeatureError::InvalidParameter(format!(
            "band [{fmin}, {fmax}] Hz must satisfy 0 <= fmin < fmax <= {nyquist}"
        )));
    }
    if fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(FeatureError::InvalidParameter(format!(
            "fft size {fft_size} is not a power of two >= 2"
        )));
    }
    let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let step = (mel_hi - mel_lo) / (num_filters + 1) as f64;
    let last_bin = fft_size / 2;
    let edge_bins: Vec<usize> = (0..num_filters + 2)
        .map(|i| {
            let hz = mel_to_hz(mel_lo + step * i as f64);
            let bin = ((fft_size + 1) as f64 * hz / f64::from(sample_rate)).floor() as usize;
            bin.min(last_bin)
        })
        .collect();
    if let Some(i) = edge_bins.windows(2).position(|w| w[0] == w[1]) {
        return Err(FeatureError::DegenerateBand {
            filter: i.min(num_filters - 1),
            bin: edge_bins[i],
        });
    }
    let filters = edge_bins
        .windows(3)
        .map(|e| {
            let (lo, c, hi) = (e[0], e[1], e[2]);
            let w = (lo..=hi)
                .map(|k| {
                    if k <= c {
                        (k - lo) as f64 / (c - lo) as f64
                    } else {
                        (hi - k) as f64 / (hi - c) as f64
                    }
                })
                .collect();
            (lo, w)
        })
        .collect();
    Ok(MelFilterbank {
        num_filters,
        fft_size,
        sample_rate,
        fmin,
        fmax,
        filters,
        edge_bins,
    })
}

/// Orthonormal DCT-II as a dense `size x size` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dct {
    size: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(size: usize) -> Self {
        let n = size as f64;
        let mut basis = Vec::with_capacity(size * size);
        for k in 0..size {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            basis.extend(
                (0..size).map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n).cos()),
            );
        }
        Self { size, basis }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// First `count` DCT-II coefficients of `x`.
    pub fn forward(&self, x: &[f64], count: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.size);
        self.basis
            .chunks_exact(self.size)
            .take(count)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Transpose of the basis (DCT-III); inverts [`Dct::forward`] with `count == size`.
    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (row, &ck) in self.basis.chunks_exact(self.size).zip(c) {
            for (o, &b) in out.iter_mut().zip(row) {
                *o += ck * b;
            }
        }
        out
    }
}

/// `(1 + (L/2) sin(pi n / L))` for `n = 0..num_ceps`.
pub fn lifter_weights(num_ceps: usize, lifter_len: usize) -> Vec<f64> {
    if lifter_len == 0 {
        return vec![1.0; num_ceps];
    }
    let l = lifter_len as f64;
    (0..num_ceps)
        .map(|n| 1.0 + l / 2.0 * (PI * n as f64 / l).sin())
        .collect()
}

/// Floored natural log, optionally raised to `exponent` with sign kept.
pub(crate) fn compressed_log(energy: f64, exponent: f64) -> f64 {
    let m = energy.max(ENERGY_FLOOR).ln();
    if exponent > 1.0 {
        m.signum() * m.abs().powf(exponent)
    } else {
        m
    }
}

/// Cepstrum of one power spectrum: mel pooling, floored log, DCT-II, lifter.
pub fn mfcc_frame(
    power_spec: &[f64],
    bank: &MelFilterbank,
    cfg: &MfccConfig,
) -> Result<Vec<f64>, FeatureError> {
    let dct = Dct::new(bank.num_filters());
    mfcc_frame_with(power_spec, bank, &dct, &lifter_weights(cfg.num_ceps, cfg.lifter_len), cfg)
}

pub(crate) fn mfcc_frame_with(
    power_spec: &[f64],
    bank: &MelFilterbank,
    dct: &Dct,
    lifter: &[f64],
    cfg: &MfccConfig,
) -> Result<Vec<f64>, FeatureError> {
    if cfg.num_ceps > bank.num_filters() {
        return Err(FeatureError::InvalidParameter(format!(
            "num_ceps {} exceeds {} mel filters",
            cfg.num_ceps,
            bank.num_filters()
        )));
    }
    let mel: Vec<f64> = bank
        .apply(power_spec)?
        .into_iter()
        .map(|e| compressed_log(e, cfg.log_power_exponent))
        .collect();
    let mut c = dct.forward(&mel, cfg.num_ceps);
    for (v, w) in c.iter_mut().zip(lifter) {
        *v *= w;
    }
    Ok(c)
}
