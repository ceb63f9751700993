//! One HMM per emotion; an utterance goes to the model under which it is
//! most likely.

use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{load_wav, AudioClip};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{filter_corpus, Gender, UtteranceRecord};
use crate::features::{extract_features, FeatureConfig, FeatureError, FeatureMatrix};
use crate::hmm::{baum_welch, forward_log, init_model, HmmError, HmmModel, TrainReport};
use crate::rng::derive_seed;

mod bundle;
mod confusion;
mod label;

pub use bundle::{load_bundle, save_bundle, BUNDLE_MANIFEST};
pub use confusion::ConfusionMatrix;
pub use label::{EmotionLabel, UnknownLabel};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("no training data for {0}")]
    MissingClass(EmotionLabel),
    #[error("{source_id}: {source}")]
    Feature { source_id: String, source: FeatureError },
    #[error("{label} model: {source}")]
    Hmm { label: EmotionLabel, source: HmmError },
    #[error("model set: {0}")]
    InvalidModelSet(String),
    #[error("test set is empty after filtering")]
    EmptyTestSet,
    #[error("no test utterances for {0}")]
    EmptyRow(EmotionLabel),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("bundle file {file}: {reason}")]
    BundleIntegrity { file: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Trained models for all five labels plus the configuration they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionModelSet {
    models: Vec<HmmModel>,
    config: RunConfig,
    corpus_digest: String,
}

impl EmotionModelSet {
    /// `models` are given in [`EmotionLabel::ALL`] order.
    pub fn new(models: Vec<HmmModel>, config: RunConfig, corpus_digest: String) -> Result<Self, ClassifierError> {
        if models.len() != EmotionLabel::ALL.len() {
            return Err(ClassifierError::InvalidModelSet(format!(
                "expected {} models, got {}",
                EmotionLabel::ALL.len(),
                models.len()
            )));
        }
        let dim = config.features.dim();
        for (label, m) in EmotionLabel::ALL.into_iter().zip(&models) {
            if m.feature_dim() != dim {
                return Err(ClassifierError::InvalidModelSet(format!(
                    "{label} model has dimension {}, feature configuration gives {dim}",
                    m.feature_dim()
                )));
            }
        }
        Ok(Self {
            models,
            config,
            corpus_digest,
        })
    }

    pub fn model(&self, label: EmotionLabel) -> &HmmModel {
        &self.models[label.index()]
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.config.features
    }

    pub fn corpus_digest(&self) -> &str {
        &self.corpus_digest
    }
}

/// Result of scoring one utterance against every model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBreakdown {
    /// Total log-likelihood per label, in [`EmotionLabel::ALL`] order.
    pub log_likelihoods: [f64; 5],
    pub num_frames: usize,
    pub decision: EmotionLabel,
    /// Best minus second-best log-likelihood.
    pub margin: f64,
}

impl ScoreBreakdown {
    /// Picks the maximum; ties go to the earlier label.
    pub fn from_scores(log_likelihoods: [f64; 5], num_frames: usize) -> Self {
        let mut best = 0;
        for (i, &v) in log_likelihoods.iter().enumerate() {
            if v > log_likelihoods[best] {
                best = i;
            }
        }
        let runner_up = log_likelihoods
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            log_likelihoods,
            num_frames,
            decision: EmotionLabel::ALL[best],
            margin: log_likelihoods[best] - runner_up,
        }
    }

    pub fn score(&self, label: EmotionLabel) -> f64 {
        self.log_likelihoods[label.index()]
    }

    /// Log-likelihoods divided by the frame count.
    pub fn per_frame(&self) -> [f64; 5] {
        self.log_likelihoods.map(|v| v / self.num_frames as f64)
    }

    /// `decision=<label> ll_<label>=<r> ... margin=<r>`
    pub fn decision_line(&self) -> String {
        let mut s = format!("decision={}", self.decision);
        for l in EmotionLabel::ALL {
            s.push_str(&format!(" ll_{l}={:.6}", self.score(l)));
        }
        s.push_str(&format!(" margin={:.6}", self.margin));
        s
    }
}

fn features_of(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix, ClassifierError> {
    extract_features(clip, cfg).map_err(|source| ClassifierError::Feature {
        source_id: clip.source_id().to_owned(),
        source,
    })
}

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Trains one model per label on that label's clips only.
///
/// Each label's initialisation seed is derived from `config.seed` and the
/// label, so the result does not depend on training order.
pub fn train_model_set(
    training: &[(EmotionLabel, AudioClip)],
    config: &RunConfig,
    corpus_digest: &str,
) -> Result<(EmotionModelSet, Vec<TrainReport>), ClassifierError> {
    config.validate()?;
    if let Some(missing) = EmotionLabel::ALL
        .into_iter()
        .find(|l| !training.iter().any(|(t, _)| t == l))
    {
        return Err(ClassifierError::MissingClass(missing));
    }
    let features = par_map(training, |(label, clip)| {
        features_of(clip, &config.features).map(|fm| (*label, fm))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let h = &config.hmm;
    let trained = par_map(&EmotionLabel::ALL, |&label| {
        let data: Vec<FeatureMatrix> = features
            .iter()
            .filter(|(l, _)| *l == label)
            .map(|(_, fm)| fm.clone())
            .collect();
        let seed = derive_seed(config.seed, &[label.index() as u64]);
        let wrap = |source| ClassifierError::Hmm { label, source };
        let init = init_model(h.num_states, h.num_mixtures, h.topology, &data, seed).map_err(wrap)?;
        baum_welch(&init, &data, &h.train_options()).map_err(wrap)
    });
    let mut models = Vec::with_capacity(trained.len());
    let mut reports = Vec::with_capacity(trained.len());
    for r in trained {
        let (m, rep) = r?;
        models.push(m);
        reports.push(rep);
    }
    Ok((EmotionModelSet::new(models, *config, corpus_digest.to_owned())?, reports))
}

/// Scores precomputed features against all five models.
pub fn classify_features(set: &EmotionModelSet, fm: &FeatureMatrix) -> Result<ScoreBreakdown, ClassifierError> {
    let mut scores = [0.0; 5];
    for (label, s) in EmotionLabel::ALL.into_iter().zip(scores.iter_mut()) {
        *s = forward_log(set.model(label), fm).map_err(|source| ClassifierError::Hmm { label, source })?;
    }
    Ok(ScoreBreakdown::from_scores(scores, fm.num_frames()))
}

pub fn classify(set: &EmotionModelSet, clip: &AudioClip) -> Result<ScoreBreakdown, ClassifierError> {
    let fm = features_of(clip, set.feature_config())?;
    classify_features(set, &fm)
}

/// An utterance that could not be scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub rejected: Vec<Rejection>,
}

/// Classifies every record (optionally only one gender) and tallies the
/// outcomes. Audio paths are resolved against `base_dir`. Utterances that
/// fail to load or extract are listed in `rejected`, never counted.
pub fn evaluate(
    set: &EmotionModelSet,
    records: &[UtteranceRecord],
    base_dir: &Path,
    gender: Option<Gender>,
) -> Result<Evaluation, ClassifierError> {
    let selected = filter_corpus(records, gender, None, None);
    if selected.is_empty() {
        return Err(ClassifierError::EmptyTestSet);
    }
    let outcomes = par_map(&selected, |r| {
        let clip = load_wav(r.resolve(base_dir)).map_err(|e| e.to_string())?;
        classify(set, &clip).map(|s| s.decision).map_err(|e| e.to_string())
    });
    let mut matrix = ConfusionMatrix::new();
    let mut rejected = Vec::new();
    for (r, outcome) in selected.iter().zip(outcomes) {
        match outcome {
            Ok(decision) => matrix.record(r.label, decision),
            Err(reason) => rejected.push(Rejection {
                path: r.path.clone(),
                reason,
            }),
        }
    }
    Ok(Evaluation { matrix, rejected })
}
