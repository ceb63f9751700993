//! Utterance manifests and the synthetic stand-in corpus.
//!
//! A manifest is a CSV file with the header `path,label,gender,speaker_id,split`.
//! Paths are resolved relative to the directory holding the manifest.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::EmotionLabel;

mod synth;

pub use synth::{
    generate_synthetic_corpus, render_utterance, Envelope, SynthOptions, SynthProfile, FEMALE_F0_FACTOR,
    MANIFEST_NAME,
};

pub const MANIFEST_HEADER: [&str; 5] = ["path", "label", "gender", "speaker_id", "split"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest header must be {expected:?}, found {found:?}")]
    SchemaMismatch { expected: String, found: String },
    #[error("manifest row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("manifest row {row}: unknown label {value:?}")]
    BadLabel { row: usize, value: String },
    #[error("manifest row {row}: unknown gender {value:?}")]
    BadGender { row: usize, value: String },
    #[error("manifest row {row}: unknown split {value:?}")]
    BadSplit { row: usize, value: String },
    #[error("manifest row {row}: duplicate path {path:?}")]
    DuplicatePath { row: usize, path: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid synthesis parameter: {0}")]
    InvalidParameter(String),
    #[error("output directory {0} exists and is not empty")]
    OutputNotEmpty(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub path: String,
    pub label: EmotionLabel,
    pub gender: Gender,
    pub speaker_id: String,
    pub split: Split,
}

impl UtteranceRecord {
    /// Location of the audio file for a manifest stored in `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> PathBuf {
        base_dir.join(&self.path)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Parses a manifest. Data rows are numbered from 1.
pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<UtteranceRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header != MANIFEST_HEADER {
        return Err(CorpusError::SchemaMismatch {
            expected: MANIFEST_HEADER.join(","),
            found: header.join(","),
        });
    }
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CorpusError::BadRow {
            row: row_no,
            reason: e.to_string(),
        })?;
        let field = |k: usize| row.get(k).unwrap_or("").trim();
        let path = field(0).to_owned();
        if path.is_empty() {
            return Err(CorpusError::BadRow {
                row: row_no,
                reason: "empty path".into(),
            });
        }
        let label = field(1).parse().map_err(|_| CorpusError::BadLabel {
            row: row_no,
            value: field(1).to_owned(),
        })?;
        let gender = field(2).parse().map_err(|_| CorpusError::BadGender {
            row: row_no,
            value: field(2).to_owned(),
        })?;
        let split = field(4).parse().map_err(|_| CorpusError::BadSplit {
            row: row_no,
            value: field(4).to_owned(),
        })?;
        if !seen.insert(path.clone()) {
            return Err(CorpusError::DuplicatePath { row: row_no, path });
        }
        records.push(UtteranceRecord {
            path,
            label,
            gender,
            speaker_id: field(3).to_owned(),
            split,
        });
    }
    Ok(records)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>, CorpusError> {
    let path = path.as_ref();
    read_manifest(File::open(path).map_err(io_err(path))?)
}

pub fn write_manifest<W: Write>(records: &[UtteranceRecord], writer: W) -> Result<(), CorpusError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(MANIFEST_HEADER)?;
    for r in records {
        if r.path.is_empty() || r.path.contains([',', '"', '\n', '\r']) {
            return Err(CorpusError::InvalidRecord(format!("path {:?} cannot be stored", r.path)));
        }
        if r.speaker_id.contains([',', '"', '\n', '\r']) {
            return Err(CorpusError::InvalidRecord(format!("speaker id {:?} cannot be stored", r.speaker_id)));
        }
        w.write_record([
            r.path.as_str(),
            r.label.as_str(),
            r.gender.as_str(),
            r.speaker_id.as_str(),
            r.split.as_str(),
        ])?;
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: PathBuf::from("<manifest>"),
        source,
    })?;
    Ok(())
}

pub fn save_manifest(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_manifest(records, &mut buf)?;
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Records matching every given predicate, in their original order.
pub fn filter_corpus(
    records: &[UtteranceRecord],
    gender: Option<Gender>,
    split: Option<Split>,
    label: Option<EmotionLabel>,
) -> Vec<UtteranceRecord> {
    records
        .iter()
        .filter(|r| gender.is_none_or(|g| r.gender == g))
        .filter(|r| split.is_none_or(|s| r.split == s))
        .filter(|r| label.is_none_or(|l| r.label == l))
        .cloned()
        .collect()
}

/// SHA-256 over each record's manifest row and audio bytes, in order.
pub fn corpus_digest(records: &[UtteranceRecord], base_dir: &Path) -> Result<String, CorpusError> {
    let mut hasher = Sha256::new();
    for r in records {
        hasher.update(format!("{},{},{},{},{}\n", r.path, r.label, r.gender, r.speaker_id, r.split));
        let path = r.resolve(base_dir);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex(&hasher.finalize()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "path,label,gender,speaker_id,split\n\
        a.wav,anger,male,m1,train\n\
        b.wav,neutral,female,f1,test\n\
        c.wav,sadness,male,m2,test\n";

    #[test]
    fn parses_in_order() {
        let r = read_manifest(GOOD.as_bytes()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[1].label, EmotionLabel::Neutral);
        assert_eq!(r[1].gender, Gender::Female);
        assert_eq!(r[2].split, Split::Test);
        assert!(read_manifest("path,label,gender,speaker_id,split\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn reports_bad_rows() {
        let fear = GOOD.replace("sadness", "fear");
        assert!(matches!(read_manifest(fear.as_bytes()), Err(CorpusError::BadLabel { row: 3, .. })));
        let g = GOOD.replace("female", "other");
        assert!(matches!(read_manifest(g.as_bytes()), Err(CorpusError::BadGender { row: 2, .. })));
        let dup = GOOD.replace("c.wav", "a.wav");
        assert!(matches!(read_manifest(dup.as_bytes()), Err(CorpusError::DuplicatePath { row: 3, .. })));
        let schema = GOOD.replace("speaker_id", "speaker");
        assert!(matches!(read_manifest(schema.as_bytes()), Err(CorpusError::SchemaMismatch { .. })));
        let short = "path,label,gender\na.wav,anger,male\n";
        assert!(matches!(read_manifest(short.as_bytes()), Err(CorpusError::SchemaMismatch { .. })));
    }

    #[test]
    fn round_trip_and_filter() {
        let r = read_manifest(GOOD.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_manifest(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), GOOD);
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), r);

        assert_eq!(filter_corpus(&r, None, None, None), r);
        let male = filter_corpus(&r, Some(Gender::Male), None, None);
        assert_eq!(male.iter().map(|x| x.path.as_str()).collect::<Vec<_>>(), ["a.wav", "c.wav"]);
        let female = filter_corpus(&r, Some(Gender::Female), None, None);
        assert_eq!(male.len() + female.len(), r.len());
        assert_eq!(filter_corpus(&r, Some(Gender::Male), Some(Split::Test), None).len(), 1);
    }

    #[test]
    fn rejects_unstorable_path() {
        let mut r = read_manifest(GOOD.as_bytes()).unwrap();
        r[0].path = "x,y.wav".into();
        assert!(write_manifest(&r, Vec::new()).is_err());
    }
}
