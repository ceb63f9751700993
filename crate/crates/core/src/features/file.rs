//! Plain-text feature files.
//!
//! ```text
//! dim=39 frames=98 kind=mfcc39
//! -1.23456789e1 4.00000000e-2 ...
//! ```
//!
//! One header line, then one line per frame with `dim` space-separated values
//! printed to 9 significant digits.

use std::io::{BufRead, Write};

use super::{FeatureError, FeatureKind, FeatureMatrix};

#[derive(Debug, thiserror::Error)]
pub enum FeatureFileError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_value(v: f64) -> String {
    // avoid printing a distinct "-0"
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.8e}")
}

pub fn write_features<W: Write>(fm: &FeatureMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "dim={} frames={} kind={}", fm.dim(), fm.num_frames(), fm.kind())?;
    for row in fm.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> Result<&'a str, FeatureFileError> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| FeatureFileError::Format {
            line: 1,
            reason: format!("expected `{key}=` in header"),
        })
}

/// Parses a feature file. The format carries no frame rate, so the caller supplies it.
pub fn read_features<R: BufRead>(input: R, frame_rate: f64) -> Result<FeatureMatrix, FeatureFileError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(FeatureFileError::Format {
        line: 1,
        reason: "empty file".into(),
    })??;
    let mut tokens = header.split_whitespace();
    let bad_header = |reason: String| FeatureFileError::Format { line: 1, reason };
    let dim: usize = header_field(tokens.next(), "dim")?
        .parse()
        .map_err(|e| bad_header(format!("dim: {e}")))?;
    let frames: usize = header_field(tokens.next(), "frames")?
        .parse()
        .map_err(|e| bad_header(format!("frames: {e}")))?;
    let kind: FeatureKind = header_field(tokens.next(), "kind")?
        .parse()
        .map_err(|e: FeatureError| bad_header(e.to_string()))?;
    if tokens.next().is_some() {
        return Err(bad_header("trailing header fields".into()));
    }
    let mut data = Vec::with_capacity(dim * frames);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| FeatureFileError::Format {
                line: lineno,
                reason: format!("{tok:?}: {e}"),
            })?);
        }
        if data.len() - before != dim {
            return Err(FeatureFileError::Format {
                line: lineno,
                reason: format!("expected {dim} values, found {}", data.len() - before),
            });
        }
    }
    if data.len() != dim * frames {
        return Err(FeatureFileError::Format {
            line: frames + 1,
            reason: format!("expected {frames} frames, found {}", data.len() / dim.max(1)),
        });
    }
    Ok(FeatureMatrix::from_flat(data, dim, frame_rate, kind)?)
}
