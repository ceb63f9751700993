//! Synthetic corpus properties and a small train/evaluate run.

use std::collections::BTreeMap;
use std::path::Path;

use emorec::audio::load_wav;
use emorec::classifier::{
    classify, evaluate, load_bundle, save_bundle, train_model_set, ClassifierError, EmotionLabel,
};
use emorec::config::RunConfig;
use emorec::corpus::{
    corpus_digest, filter_corpus, generate_synthetic_corpus, load_manifest, Gender, Split, SynthOptions,
    UtteranceRecord, MANIFEST_NAME,
};
use emorec::features::{FeatureConfig, MfccExtractor};

fn make_corpus(dir: &Path, seed: u64, per_cell: usize) -> Vec<UtteranceRecord> {
    let opts = SynthOptions {
        seed,
        utterances_per_label_per_gender: per_cell,
        ..SynthOptions::default()
    };
    generate_synthetic_corpus(&opts, dir).unwrap()
}

#[test]
fn generated_corpus_is_stratified_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let recs = make_corpus(a.path(), 3, 5);
    make_corpus(b.path(), 3, 5);
    assert_eq!(recs.len(), 50);
    assert_eq!(load_manifest(a.path().join(MANIFEST_NAME)).unwrap(), recs);
    for label in EmotionLabel::ALL {
        for gender in Gender::ALL {
            let cell = filter_corpus(&recs, Some(gender), None, Some(label));
            assert_eq!(filter_corpus(&cell, None, Some(Split::Test), None).len(), 1);
            assert_eq!(filter_corpus(&cell, None, Some(Split::Train), None).len(), 4);
        }
    }
    for name in recs.iter().map(|r| r.path.as_str()).chain([MANIFEST_NAME]) {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

/// Mean of the static cepstra (before mean normalization) of one file.
fn mean_cepstrum(path: &Path) -> Vec<f64> {
    let clip = load_wav(path).unwrap();
    let cfg = FeatureConfig::default();
    let ex = MfccExtractor::new(cfg.frame, cfg.mfcc, clip.sample_rate()).unwrap();
    let (statics, _) = ex.static_cepstra(&clip).unwrap();
    let mut m = vec![0.0; statics[0].len()];
    for row in &statics {
        for (a, v) in m.iter_mut().zip(row) {
            *a += v / statics.len() as f64;
        }
    }
    m
}

#[test]
fn labels_are_separable_by_mean_cepstrum() {
    let dir = tempfile::tempdir().unwrap();
    let recs = make_corpus(dir.path(), 11, 20);
    // one diagonal Gaussian per label over per-utterance mean vectors
    let mut groups: BTreeMap<EmotionLabel, Vec<Vec<f64>>> = BTreeMap::new();
    for r in filter_corpus(&recs, None, Some(Split::Train), None) {
        groups.entry(r.label).or_default().push(mean_cepstrum(&r.resolve(dir.path())));
    }
    let fits: Vec<(EmotionLabel, Vec<f64>, Vec<f64>)> = groups
        .into_iter()
        .map(|(label, xs)| {
            let d = xs[0].len();
            let n = xs.len() as f64;
            let mu: Vec<f64> = (0..d).map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / n).collect();
            let var: Vec<f64> = (0..d)
                .map(|k| (xs.iter().map(|x| (x[k] - mu[k]).powi(2)).sum::<f64>() / n).max(1e-6))
                .collect();
            (label, mu, var)
        })
        .collect();
    let test = filter_corpus(&recs, None, Some(Split::Test), None);
    let correct = test
        .iter()
        .filter(|r| {
            let x = mean_cepstrum(&r.resolve(dir.path()));
            let best = fits
                .iter()
                .map(|(l, mu, var)| {
                    let ll: f64 = x
                        .iter()
                        .zip(mu)
                        .zip(var)
                        .map(|((x, m), v)| -0.5 * ((x - m).powi(2) / v + v.ln()))
                        .sum();
                    (*l, ll)
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            best == r.label
        })
        .count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc >= 0.6, "accuracy {acc}");
}

#[test]
fn train_classify_and_bundle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let recs = make_corpus(dir.path(), 5, 5);
    let train = filter_corpus(&recs, None, Some(Split::Train), None);
    let clips: Vec<_> = train
        .iter()
        .map(|r| (r.label, load_wav(r.resolve(dir.path())).unwrap()))
        .collect();
    let mut cfg = RunConfig::default();
    cfg.hmm.num_states = 3;
    cfg.hmm.num_mixtures = 2;
    cfg.hmm.max_iter = 10;
    let digest = corpus_digest(&train, dir.path()).unwrap();
    let (set, reports) = train_model_set(&clips, &cfg, &digest).unwrap();
    assert_eq!(reports.len(), 5);
    for label in EmotionLabel::ALL {
        assert_eq!(set.model(label).feature_dim(), 39);
    }

    let (again, _) = train_model_set(&clips, &cfg, &digest).unwrap();
    assert_eq!(set, again);

    let out = tempfile::tempdir().unwrap();
    save_bundle(&set, out.path()).unwrap();
    let loaded = load_bundle(out.path()).unwrap();
    let test = filter_corpus(&recs, None, Some(Split::Test), None);
    for r in &test {
        let clip = load_wav(r.resolve(dir.path())).unwrap();
        let a = classify(&set, &clip).unwrap();
        let b = classify(&loaded, &clip).unwrap();
        assert_eq!(a, b);
        let best = a.log_likelihoods.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.score(a.decision), best);
    }

    let all = evaluate(&set, &test, dir.path(), None).unwrap();
    let male = evaluate(&set, &test, dir.path(), Some(Gender::Male)).unwrap();
    let female = evaluate(&set, &test, dir.path(), Some(Gender::Female)).unwrap();
    assert_eq!(male.matrix + female.matrix, all.matrix);
    assert_eq!(all.matrix.total() as usize + all.rejected.len(), test.len());

    let model_path = out.path().join("sadness.hmm");
    let text = std::fs::read_to_string(&model_path).unwrap();
    std::fs::write(&model_path, &text[..text.len() / 2]).unwrap();
    match load_bundle(out.path()) {
        Err(ClassifierError::BundleIntegrity { file, .. }) => assert_eq!(file, model_path),
        other => panic!("expected integrity error, got {other:?}"),
    }
}

#[test]
fn missing_class_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let recs = make_corpus(dir.path(), 1, 1);
    let clips: Vec<_> = recs
        .iter()
        .filter(|r| r.label != EmotionLabel::Neutral)
        .map(|r| (r.label, load_wav(r.resolve(dir.path())).unwrap()))
        .collect();
    let err = train_model_set(&clips, &RunConfig::default(), "").unwrap_err();
    assert!(matches!(err, ClassifierError::MissingClass(EmotionLabel::Neutral)));
    assert!(err.to_string().contains("neutral"));
}

#[test]
fn missing_audio_is_rejected_not_counted() {
    let dir = tempfile::tempdir().unwrap();
    let recs = make_corpus(dir.path(), 2, 2);
    let clips: Vec<_> = recs
        .iter()
        .map(|r| (r.label, load_wav(r.resolve(dir.path())).unwrap()))
        .collect();
    let mut cfg = RunConfig::default();
    cfg.hmm.num_states = 2;
    cfg.hmm.num_mixtures = 1;
    cfg.hmm.max_iter = 3;
    let (set, _) = train_model_set(&clips, &cfg, "").unwrap();
    std::fs::remove_file(dir.path().join(&recs[0].path)).unwrap();
    let ev = evaluate(&set, &recs, dir.path(), None).unwrap();
    assert_eq!(ev.rejected.len(), 1);
    assert_eq!(ev.rejected[0].path, recs[0].path);
    assert_eq!(ev.matrix.total() as usize, recs.len() - 1);
    assert!(matches!(
        evaluate(&set, &[], dir.path(), None),
        Err(ClassifierError::EmptyTestSet)
    ));
}
