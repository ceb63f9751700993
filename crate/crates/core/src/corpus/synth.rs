//! Seeded synthetic utterances: a jittered pulse train through a cascade of
//! formant resonators, gated into syllables, shaped by a per-label envelope
//! and mixed with white noise.

use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{save_manifest, CorpusError, Gender, Split, UtteranceRecord};
use crate::audio::{write_wav_pcm16, AudioClip};
use crate::classifier::EmotionLabel;
use crate::rng::derive_seed;

/// Female voices use the profile pitch scaled by this factor.
pub const FEMALE_F0_FACTOR: f64 = 1.7;

pub const MANIFEST_NAME: &str = "manifest.csv";

const TEST_FRACTION: f64 = 0.2;
const SPEAKERS_PER_GENDER: usize = 5;
const SPLIT_STREAM: u64 = u64::MAX;
const PEAK_LEVEL: f64 = 0.6;
const RAMP_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    Flat,
    Rising,
    Falling,
    Tremolo,
}

impl Envelope {
    /// Gain at relative position `x` in [0, 1] of an utterance lasting `secs`.
    fn gain(self, x: f64, secs: f64) -> f64 {
        match self {
            Envelope::Flat => 1.0,
            Envelope::Rising => 0.25 + 0.75 * x,
            Envelope::Falling => 1.0 - 0.75 * x,
            Envelope::Tremolo => 0.6 + 0.4 * (2.0 * PI * 6.0 * x * secs).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProfile {
    pub label: EmotionLabel,
    /// Male base pitch.
    pub f0_hz: f64,
    /// Relative standard deviation of each pitch period.
    pub f0_jitter: f64,
    pub formant_centers: Vec<f64>,
    pub amplitude_envelope: Envelope,
    /// Noise standard deviation relative to the voiced peak level.
    pub noise_floor: f64,
}

impl SynthProfile {
    pub fn for_label(label: EmotionLabel) -> Self {
        let (f0_hz, f0_jitter, formant_centers, amplitude_envelope, noise_floor) = match label {
            EmotionLabel::Anger => (150.0, 0.06, vec![750.0, 1250.0, 2600.0], Envelope::Falling, 0.06),
            EmotionLabel::Surprise => (220.0, 0.02, vec![450.0, 1900.0, 2900.0], Envelope::Rising, 0.01),
            EmotionLabel::Happiness => (200.0, 0.02, vec![650.0, 1700.0], Envelope::Tremolo, 0.02),
            EmotionLabel::Sadness => (100.0, 0.01, vec![350.0, 850.0, 2300.0], Envelope::Falling, 0.005),
            EmotionLabel::Neutral => (120.0, 0.015, vec![550.0, 1100.0, 2450.0], Envelope::Flat, 0.01),
        };
        Self {
            label,
            f0_hz,
            f0_jitter,
            formant_centers,
            amplitude_envelope,
            noise_floor,
        }
    }
}

/// Corpus size and rendering settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub utterances_per_label_per_gender: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            utterances_per_label_per_gender: 20,
            duration_s: 1.5,
            sample_rate: 16_000,
        }
    }
}

impl SynthOptions {
    fn validate(&self) -> Result<(), CorpusError> {
        if !(self.duration_s >= 1.0 && self.duration_s.is_finite()) {
            return Err(CorpusError::InvalidParameter(format!(
                "duration must be at least 1 s, got {}",
                self.duration_s
            )));
        }
        if self.sample_rate < 8000 {
            return Err(CorpusError::InvalidParameter(format!(
                "sample rate must be at least 8000 Hz, got {}",
                self.sample_rate
            )));
        }
        if self.utterances_per_label_per_gender == 0 {
            return Err(CorpusError::InvalidParameter("need at least one utterance per cell".into()));
        }
        Ok(())
    }
}

/// Syllable gate: 1 inside syllables, 0 in pauses, raised-cosine edges.
fn syllable_gate(rng: &mut ChaCha8Rng, n: usize, sr: f64) -> Vec<f64> {
    let mut gate = vec![0.0; n];
    let ramp = (RAMP_S * sr) as usize;
    let mut start = (rng.random_range(0.03..0.08) * sr) as usize;
    while start < n {
        let len = (rng.random_range(0.15..0.30) * sr) as usize;
        let end = (start + len).min(n);
        for (i, g) in gate[start..end].iter_mut().enumerate() {
            let edge = i.min(end - start - 1 - i);
            *g = if edge < ramp {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
        }
        start = end + (rng.random_range(0.05..0.12) * sr) as usize;
    }
    gate
}

/// Two-pole resonator at `freq` with a bandwidth growing with frequency.
fn resonate(x: &mut [f64], freq: f64, sr: f64) {
    let bw = 60.0 + 0.06 * freq;
    let r = (-PI * bw / sr).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / sr).cos();
    let a2 = -r * r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = (1.0 - r) * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Renders one utterance. The output depends only on the arguments.
pub fn render_utterance(
    profile: &SynthProfile,
    gender: Gender,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<AudioClip, CorpusError> {
    if !(duration_s > 0.0) || sample_rate == 0 {
        return Err(CorpusError::InvalidParameter("duration and sample rate must be positive".into()));
    }
    let sr = f64::from(sample_rate);
    let n = (duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let gender_factor = match gender {
        Gender::Male => 1.0,
        Gender::Female => FEMALE_F0_FACTOR,
    };
    let f0 = profile.f0_hz * gender_factor * (1.0 + rng.random_range(-0.05..0.05));
    let formants: Vec<f64> = profile
        .formant_centers
        .iter()
        .map(|f| (f * (1.0 + rng.random_range(-0.03..0.03))).min(0.45 * sr))
        .collect();

    let mut signal = vec![0.0; n];
    let base_period = sr / f0;
    let mut pos = rng.random_range(0.0..base_period);
    while (pos as usize) < n {
        signal[pos as usize] = 1.0;
        let period = base_period * (1.0 + profile.f0_jitter * unit.sample(&mut rng));
        pos += period.max(sr / 1000.0);
    }
    for &f in &formants {
        resonate(&mut signal, f, sr);
    }

    let gate = syllable_gate(&mut rng, n, sr);
    for (i, (s, g)) in signal.iter_mut().zip(&gate).enumerate() {
        *s *= g * profile.amplitude_envelope.gain(i as f64 / n as f64, duration_s);
    }
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        signal.iter_mut().for_each(|s| *s *= PEAK_LEVEL / peak);
    }
    let noise_sd = profile.noise_floor * PEAK_LEVEL;
    for s in signal.iter_mut() {
        *s = (*s + noise_sd * unit.sample(&mut rng)).clamp(-1.0, 1.0);
    }
    let id = format!("synth:{}:{}:{seed:016x}", profile.label, gender);
    Ok(AudioClip::new(signal, sample_rate, id)?)
}

fn utterance_seed(seed: u64, label: EmotionLabel, gender: Gender, index: usize) -> u64 {
    derive_seed(seed, &[label.index() as u64, gender as u64, index as u64])
}

/// Writes a stratified synthetic corpus and its manifest into `out_dir`,
/// which must be absent or empty. Returns the manifest records.
pub fn generate_synthetic_corpus(opts: &SynthOptions, out_dir: &Path) -> Result<Vec<UtteranceRecord>, CorpusError> {
    opts.validate()?;
    let io = |source| CorpusError::Io {
        path: out_dir.to_owned(),
        source,
    };
    if out_dir.exists() && fs::read_dir(out_dir).map_err(io)?.next().is_some() {
        return Err(CorpusError::OutputNotEmpty(out_dir.to_owned()));
    }
    fs::create_dir_all(out_dir).map_err(io)?;

    let per_cell = opts.utterances_per_label_per_gender;
    let test_count = (per_cell as f64 * TEST_FRACTION).round() as usize;
    let mut jobs = Vec::new();
    for label in EmotionLabel::ALL {
        for gender in Gender::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                opts.seed,
                &[label.index() as u64, gender as u64, SPLIT_STREAM],
            ));
            let test = sample(&mut rng, per_cell, test_count).into_vec();
            for index in 0..per_cell {
                let split = if test.contains(&index) { Split::Test } else { Split::Train };
                jobs.push((label, gender, index, split));
            }
        }
    }

    let render = |&(label, gender, index, _): &(EmotionLabel, Gender, usize, Split)| {
        render_utterance(
            &SynthProfile::for_label(label),
            gender,
            opts.duration_s,
            opts.sample_rate,
            utterance_seed(opts.seed, label, gender, index),
        )
    };
    #[cfg(feature = "parallel")]
    let clips: Vec<_> = jobs.par_iter().map(render).collect();
    #[cfg(not(feature = "parallel"))]
    let clips: Vec<_> = jobs.iter().map(render).collect();

    let mut records = Vec::with_capacity(jobs.len());
    for ((label, gender, index, split), clip) in jobs.into_iter().zip(clips) {
        let clip = clip?;
        let name = format!("{label}_{gender}_{index:03}.wav");
        let path = out_dir.join(&name);
        let file = fs::File::create(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        write_wav_pcm16(&clip, BufWriter::new(file))?;
        let initial = &gender.as_str()[..1];
        records.push(UtteranceRecord {
            path: name,
            label,
            gender,
            speaker_id: format!("{initial}{:02}", index % SPEAKERS_PER_GENDER + 1),
            split,
        });
    }
    save_manifest(&records, out_dir.join(MANIFEST_NAME))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_differ_in_two_fields() {
        for a in EmotionLabel::ALL {
            for b in EmotionLabel::ALL {
                if a >= b {
                    continue;
                }
                let (p, q) = (SynthProfile::for_label(a), SynthProfile::for_label(b));
                let diffs = [
                    p.f0_hz != q.f0_hz,
                    p.f0_jitter != q.f0_jitter,
                    p.formant_centers != q.formant_centers,
                    p.amplitude_envelope != q.amplitude_envelope,
                    p.noise_floor != q.noise_floor,
                ];
                assert!(diffs.iter().filter(|d| **d).count() >= 2, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rendering_is_deterministic_and_bounded() {
        let p = SynthProfile::for_label(EmotionLabel::Anger);
        let a = render_utterance(&p, Gender::Female, 1.0, 16000, 7).unwrap();
        let b = render_utterance(&p, Gender::Female, 1.0, 16000, 7).unwrap();
        let c = render_utterance(&p, Gender::Female, 1.0, 16000, 8).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
        assert_eq!(a.len(), 16000);
        assert!(a.samples().iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn rejects_bad_options() {
        let dir = tempfile::tempdir().unwrap();
        for opts in [
            SynthOptions { duration_s: 0.5, ..Default::default() },
            SynthOptions { sample_rate: 4000, ..Default::default() },
            SynthOptions { utterances_per_label_per_gender: 0, ..Default::default() },
        ] {
            assert!(matches!(
                generate_synthetic_corpus(&opts, &dir.path().join("x")),
                Err(CorpusError::InvalidParameter(_))
            ));
        }
        fs::write(dir.path().join("keep.txt"), "x").unwrap();
        assert!(matches!(
            generate_synthetic_corpus(&SynthOptions::default(), dir.path()),
            Err(CorpusError::OutputNotEmpty(_))
        ));
        assert_eq!(fs::read_to_string(dir.path().join("keep.txt")).unwrap(), "x");
    }
}
