//! The plain-text matrix format.
//!
//! ```text
//! ADAMKL v1 N=<n> D=<d> C=<classes>
//! <d space-separated floats>        (n lines)
//! <n space-separated labels>        (-1 = unlabeled)
//! <n domain tokens, S or T>
//! ```
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every finite `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use super::{Dataset, Domain};
use crate::error::Result;

pub const MAGIC: &str = "ADAMKL";
pub const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },

    #[error("row {row} at byte {offset}: expected {expected} values, found {found}")]
    DimensionMismatch {
        row: usize,
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid number `{token}` at byte {offset}")]
    BadNumber { offset: usize, token: String },

    #[error("label {label} at byte {offset} is out of range for {classes} classes")]
    LabelOutOfRange {
        offset: usize,
        label: i64,
        classes: usize,
    },

    #[error("invalid domain token `{token}` at byte {offset}")]
    BadDomain { offset: usize, token: String },

    #[error("unexpected end of input at byte {offset}: missing {missing}")]
    UnexpectedEof { offset: usize, missing: &'static str },

    #[error("unexpected trailing data at byte {offset}")]
    TrailingData { offset: usize },

    #[error("invalid dataset at byte {offset}: {reason}")]
    Invalid { offset: usize, reason: String },
}

struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    /// Next line and its starting byte offset (without the terminator).
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        if self.pos >= self.text.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some((start, line.strip_suffix('\r').unwrap_or(line)))
    }

    fn require(&mut self, missing: &'static str) -> std::result::Result<(usize, &'a str), ParseError> {
        self.next_line().ok_or(ParseError::UnexpectedEof {
            offset: self.text.len(),
            missing,
        })
    }
}

/// Tokens of a line with their absolute byte offsets.
fn tokens(line_start: usize, line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_ascii_whitespace()
        .map(move |t| (line_start + (t.as_ptr() as usize - line.as_ptr() as usize), t))
}

fn header_field(token: Option<(usize, &str)>, key: &str, at: usize) -> std::result::Result<usize, ParseError> {
    let (offset, tok) = token.ok_or_else(|| ParseError::MalformedHeader {
        offset: at,
        reason: format!("missing `{key}=`"),
    })?;
    tok.strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| ParseError::MalformedHeader {
            offset,
            reason: format!("expected `{key}=<count>`, found `{tok}`"),
        })
}

pub fn parse_dataset(text: &str) -> std::result::Result<Dataset, ParseError> {
    let mut lines = Lines { text, pos: 0 };
    let (h0, header) = lines.require("header")?;
    let mut ht = tokens(h0, header);
    match (ht.next(), ht.next()) {
        (Some((_, MAGIC)), Some((_, VERSION))) => {}
        _ => {
            return Err(ParseError::MalformedHeader {
                offset: h0,
                reason: format!("expected `{MAGIC} {VERSION}`"),
            })
        }
    }
    let n = header_field(ht.next(), "N", h0)?;
    let d = header_field(ht.next(), "D", h0)?;
    let c = header_field(ht.next(), "C", h0)?;
    if let Some((offset, _)) = ht.next() {
        return Err(ParseError::MalformedHeader {
            offset,
            reason: "unexpected extra header field".into(),
        });
    }
    if n == 0 || d == 0 || c == 0 {
        return Err(ParseError::MalformedHeader {
            offset: h0,
            reason: "N, D and C must be positive".into(),
        });
    }

    let mut values = Vec::with_capacity(n * d);
    for row in 0..n {
        let (start, line) = lines.require("feature row")?;
        let before = values.len();
        for (offset, tok) in tokens(start, line) {
            let v: f64 = tok.parse().map_err(|_| ParseError::BadNumber {
                offset,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(ParseError::BadNumber {
                    offset,
                    token: tok.to_string(),
                });
            }
            values.push(v);
        }
        let found = values.len() - before;
        if found != d {
            return Err(ParseError::DimensionMismatch {
                row,
                offset: start,
                expected: d,
                found,
            });
        }
    }

    let (ls, line) = lines.require("label line")?;
    let mut labels = Vec::with_capacity(n);
    for (offset, tok) in tokens(ls, line) {
        let raw: i64 = tok.parse().map_err(|_| ParseError::BadNumber {
            offset,
            token: tok.to_string(),
        })?;
        let label = match raw {
            -1 => None,
            l if l >= 0 && (l as u64) < c as u64 => Some(l as usize),
            l => {
                return Err(ParseError::LabelOutOfRange {
                    offset,
                    label: l,
                    classes: c,
                })
            }
        };
        labels.push(label);
    }
    if labels.len() != n {
        return Err(ParseError::DimensionMismatch {
            row: n,
            offset: ls,
            expected: n,
            found: labels.len(),
        });
    }

    let (ds, line) = lines.require("domain line")?;
    let mut domains = Vec::with_capacity(n);
    for (offset, tok) in tokens(ds, line) {
        domains.push(match tok {
            "S" => Domain::Source,
            "T" => Domain::Target,
            _ => {
                return Err(ParseError::BadDomain {
                    offset,
                    token: tok.to_string(),
                })
            }
        });
    }
    if domains.len() != n {
        return Err(ParseError::DimensionMismatch {
            row: n + 1,
            offset: ds,
            expected: n,
            found: domains.len(),
        });
    }
    while let Some((offset, line)) = lines.next_line() {
        if !line.trim().is_empty() {
            return Err(ParseError::TrailingData { offset });
        }
    }

    if let Some(i) = (0..n).find(|&i| domains[i] == Domain::Source && labels[i].is_none()) {
        return Err(ParseError::Invalid {
            offset: ls,
            reason: format!("source sample {i} is unlabeled"),
        });
    }
    let features = Array2::from_shape_vec((n, d), values).expect("n*d values");
    Dataset::new(features, labels, domains, c).map_err(|e| ParseError::Invalid {
        offset: 0,
        reason: e.to_string(),
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    Ok(parse_dataset(&text)?)
}

/// Renders a dataset in the matrix format.
pub fn write_dataset(dataset: &Dataset) -> String {
    let (n, d) = (dataset.len(), dataset.dimension());
    let mut out = String::with_capacity(n * d * 24 + 64);
    let _ = writeln!(out, "{MAGIC} {VERSION} N={n} D={d} C={}", dataset.num_classes());
    for row in dataset.features().outer_iter() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    let labels: Vec<String> = dataset
        .labels()
        .iter()
        .map(|l| l.map_or_else(|| "-1".to_string(), |v| v.to_string()))
        .collect();
    out.push_str(&labels.join(" "));
    out.push('\n');
    let domains: Vec<&str> = dataset.domains().iter().map(|d| d.token()).collect();
    out.push_str(&domains.join(" "));
    out.push('\n');
    out
}

/// Writes the dataset atomically (temporary file, then rename).
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    crate::harness::write_atomic(path.as_ref(), write_dataset(dataset).as_bytes())
}
