//! Plain-text model format.
//!
//! ```text
//! hmm v1 states=N mixtures=M dim=D topology=left_to_right
//! <pi: N values>
//! <A: N lines of N values>
//! then for each state:
//! <M weights>
//! <M lines of D means>
//! <M lines of D variances>
//! ```
//!
//! Values are written with 17 significant digits, so a write/read cycle
//! reproduces every parameter bit for bit.

use std::io::{BufRead, Write};

use super::{Gmm, HmmError, HmmModel, Topology};

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            w.write_all(b" ")?;
        }
        first = false;
        // normalize -0 so output is stable
        let v = if *v == 0.0 { 0.0 } else { *v };
        write!(w, "{v:.16e}")?;
    }
    writeln!(w)
}

pub fn write_model<W: Write>(model: &HmmModel, mut w: W) -> Result<(), HmmError> {
    let m = model.num_mixtures();
    writeln!(
        w,
        "hmm v1 states={} mixtures={m} dim={} topology={}",
        model.num_states(),
        model.feature_dim(),
        model.topology()
    )?;
    write_row(&mut w, model.initial())?;
    for row in model.transitions() {
        write_row(&mut w, row)?;
    }
    for g in model.emissions() {
        if g.num_mixtures() != m {
            return Err(HmmError::InvalidModel(
                "all states must have the same number of mixtures to be written".into(),
            ));
        }
        write_row(&mut w, g.weights())?;
        for mean in g.means() {
            write_row(&mut w, mean)?;
        }
        for var in g.variances() {
            write_row(&mut w, var)?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<&str, HmmError> {
        loop {
            self.buf.clear();
            self.line += 1;
            if self.inner.read_line(&mut self.buf)? == 0 {
                return Err(HmmError::Format {
                    line: self.line,
                    reason: "unexpected end of file".into(),
                });
            }
            if !self.buf.trim().is_empty() {
                return Ok(self.buf.trim());
            }
        }
    }

    fn err(&self, reason: impl Into<String>) -> HmmError {
        HmmError::Format {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn row(&mut self, len: usize, what: &str) -> Result<Vec<f64>, HmmError> {
        let text = self.next_line()?.to_owned();
        let values = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("bad number {tok:?} in {what}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != len {
            return Err(self.err(format!("{what} has {} values, expected {len}", values.len())));
        }
        Ok(values)
    }
}

fn header_field<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, HmmError> {
    tok.and_then(|t| t.strip_prefix(key)?.strip_prefix('='))
        .ok_or_else(|| HmmError::Format {
            line,
            reason: format!("header is missing {key}="),
        })
}

pub fn read_model<R: BufRead>(reader: R) -> Result<HmmModel, HmmError> {
    let mut lines = Lines {
        inner: reader,
        line: 0,
        buf: String::new(),
    };
    let header = lines.next_line()?.to_owned();
    let line = lines.line;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("hmm") || toks.next() != Some("v1") {
        return Err(lines.err("expected header starting with \"hmm v1\""));
    }
    let count = |tok: Option<&str>, key: &str| -> Result<usize, HmmError> {
        let v = header_field(tok, key, line)?;
        v.parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| HmmError::Format {
                line,
                reason: format!("{key} must be a positive integer, got {v:?}"),
            })
    };
    let n = count(toks.next(), "states")?;
    let m = count(toks.next(), "mixtures")?;
    let d = count(toks.next(), "dim")?;
    let topology: Topology = header_field(toks.next(), "topology", line)?
        .parse()
        .map_err(|e: HmmError| HmmError::Format {
            line,
            reason: e.to_string(),
        })?;
    if let Some(extra) = toks.next() {
        return Err(lines.err(format!("unexpected header field {extra:?}")));
    }

    let initial = lines.row(n, "initial distribution")?;
    let transitions = (0..n)
        .map(|i| lines.row(n, &format!("transition row {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut emissions = Vec::with_capacity(n);
    for j in 0..n {
        let weights = lines.row(m, &format!("state {j} weights"))?;
        let means = (0..m)
            .map(|k| lines.row(d, &format!("state {j} mean {k}")))
            .collect::<Result<Vec<_>, _>>()?;
        let variances = (0..m)
            .map(|k| lines.row(d, &format!("state {j} variance {k}")))
            .collect::<Result<Vec<_>, _>>()?;
        let g = Gmm::new(weights, means, variances).map_err(|e| lines.err(e.to_string()))?;
        emissions.push(g);
    }
    loop {
        lines.buf.clear();
        lines.line += 1;
        if lines.inner.read_line(&mut lines.buf)? == 0 {
            break;
        }
        if !lines.buf.trim().is_empty() {
            return Err(lines.err("trailing data after model"));
        }
    }
    HmmModel::new(initial, transitions, emissions, topology).map_err(|e| HmmError::Format {
        line: 1,
        reason: e.to_string(),
    })
}
