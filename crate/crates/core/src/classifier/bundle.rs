//! Model-set bundle: `<label>.hmm` for each label plus `bundle.toml`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassifierError, EmotionLabel, EmotionModelSet};
use crate::config::RunConfig;
use crate::corpus::hex;
use crate::hmm::file::{read_model, write_model};

pub const BUNDLE_MANIFEST: &str = "bundle.toml";
const FORMAT: &str = "emorec-bundle-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleManifest {
    format: String,
    labels: Vec<EmotionLabel>,
    seed: u64,
    corpus_digest: String,
    model_sha256: BTreeMap<String, String>,
    config: RunConfig,
}

fn model_file(label: EmotionLabel) -> String {
    format!("{label}.hmm")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ClassifierError> {
    fs::write(path, bytes).map_err(|source| ClassifierError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes `set` into `dir`, creating it if needed.
pub fn save_bundle(set: &EmotionModelSet, dir: &Path) -> Result<(), ClassifierError> {
    fs::create_dir_all(dir).map_err(|source| ClassifierError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut digests = BTreeMap::new();
    for label in EmotionLabel::ALL {
        let path = dir.join(model_file(label));
        let mut buf = Vec::new();
        write_model(set.model(label), &mut buf).map_err(|e| ClassifierError::BundleIntegrity {
            file: path.clone(),
            reason: e.to_string(),
        })?;
        digests.insert(label.to_string(), sha256_hex(&buf));
        write_file(&path, &buf)?;
    }
    let manifest = BundleManifest {
        format: FORMAT.into(),
        labels: EmotionLabel::ALL.to_vec(),
        seed: set.config().seed,
        corpus_digest: set.corpus_digest().to_owned(),
        model_sha256: digests,
        config: *set.config(),
    };
    let text = toml::to_string(&manifest).map_err(crate::config::ConfigError::from)?;
    write_file(&dir.join(BUNDLE_MANIFEST), text.as_bytes())
}

/// Reads a bundle, checking every model file against its recorded digest.
pub fn load_bundle(dir: &Path) -> Result<EmotionModelSet, ClassifierError> {
    let manifest_path = dir.join(BUNDLE_MANIFEST);
    let integrity = |file: &Path, reason: String| ClassifierError::BundleIntegrity {
        file: file.to_owned(),
        reason,
    };
    let text = fs::read_to_string(&manifest_path).map_err(|e| integrity(&manifest_path, e.to_string()))?;
    let manifest: BundleManifest = toml::from_str(&text).map_err(|e| integrity(&manifest_path, e.to_string()))?;
    if manifest.format != FORMAT {
        return Err(integrity(&manifest_path, format!("unsupported format {:?}", manifest.format)));
    }
    if manifest.labels != EmotionLabel::ALL {
        return Err(integrity(&manifest_path, "label list must be the five emotions in order".into()));
    }
    if manifest.seed != manifest.config.seed {
        return Err(integrity(&manifest_path, "seed disagrees with embedded config".into()));
    }
    manifest
        .config
        .validate()
        .map_err(|e| integrity(&manifest_path, e.to_string()))?;

    let mut models = Vec::with_capacity(EmotionLabel::ALL.len());
    for label in EmotionLabel::ALL {
        let path = dir.join(model_file(label));
        let bytes = fs::read(&path).map_err(|e| integrity(&path, e.to_string()))?;
        let want = manifest
            .model_sha256
            .get(label.as_str())
            .ok_or_else(|| integrity(&manifest_path, format!("no digest for {label}")))?;
        if &sha256_hex(&bytes) != want {
            return Err(integrity(&path, "sha256 digest does not match bundle manifest".into()));
        }
        models.push(read_model(bytes.as_slice()).map_err(|e| integrity(&path, e.to_string()))?);
    }
    EmotionModelSet::new(models, manifest.config, manifest.corpus_digest)
        .map_err(|e| integrity(&manifest_path, e.to_string()))
}
