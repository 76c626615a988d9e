//! Dataset file I/O.
//!
//! Format: UTF-8 text, one token per line as `token<TAB>tag`, sequences
//! separated by exactly one blank line. Tag strings are `B-<attribute>`,
//! `I-<attribute>`, or `O`. The final sequence may omit its trailing blank
//! line.

use std::fs;
use std::path::Path;

use super::{BioTag, LabeledSequence, TokenSequence};
use crate::error::{Error, Result};

/// Parsed dataset plus the attribute name carried by its B-/I- tags
/// (`None` when every tag is `O`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub sequences: Vec<LabeledSequence>,
    pub attribute: Option<String>,
}

/// Parses dataset text. Errors carry 1-based line numbers.
pub fn parse_conll(text: &str) -> Result<Dataset> {
    let mut sequences = Vec::new();
    let mut attribute: Option<String> = None;
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<BioTag> = Vec::new();
    let mut record_start = 1usize;

    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<BioTag>, line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::parse(line, "empty record (consecutive blank lines?)"));
        }
        let seq = TokenSequence::new(std::mem::take(tokens))
            .map_err(|e| Error::parse(line, e.to_string()))?;
        sequences.push(LabeledSequence::new(seq, std::mem::take(tags)).expect("aligned by construction"));
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            flush(&mut tokens, &mut tags, lineno)?;
            record_start = lineno + 1;
            continue;
        }
        let mut fields = line.split('\t');
        let (token, tag_str) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(g), None) => (t, g),
            _ => {
                return Err(Error::parse(
                    lineno,
                    format!("expected `token<TAB>tag`, got {} field(s)", line.split('\t').count()),
                ))
            }
        };
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::parse(lineno, format!("invalid token {token:?}")));
        }
        let tag = parse_tag(tag_str, &mut attribute)
            .map_err(|msg| Error::parse(lineno, msg))?;
        tokens.push(token.to_string());
        tags.push(tag);
    }
    if !tokens.is_empty() {
        flush(&mut tokens, &mut tags, record_start)?;
    }
    Ok(Dataset { sequences, attribute })
}

fn parse_tag(s: &str, attribute: &mut Option<String>) -> std::result::Result<BioTag, String> {
    if s == "O" {
        return Ok(BioTag::O);
    }
    let (tag, attr) = match s.split_once('-') {
        Some(("B", attr)) => (BioTag::B, attr),
        Some(("I", attr)) => (BioTag::I, attr),
        _ => return Err(format!("unknown tag string {s:?}")),
    };
    if attr.is_empty() {
        return Err(format!("tag {s:?} has an empty attribute name"));
    }
    match attribute {
        Some(seen) if seen != attr => Err(format!(
            "tag attribute {attr:?} conflicts with {seen:?} earlier in the file"
        )),
        Some(_) => Ok(tag),
        None => {
            *attribute = Some(attr.to_string());
            Ok(tag)
        }
    }
}

/// Reads a dataset file. See [`parse_conll`] for the format.
pub fn read_conll(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_conll(&text)
}

/// Renders sequences in the dataset format, labeling spans with `attribute`.
pub fn render_conll(data: &[LabeledSequence], attribute: &str) -> String {
    let mut out = String::new();
    for (i, seq) in data.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (token, tag) in seq.tokens.tokens().iter().zip(&seq.tags) {
            out.push_str(token);
            out.push('\t');
            out.push_str(&tag.render(attribute));
            out.push('\n');
        }
    }
    out
}

/// Writes a dataset file; `write_conll` then [`read_conll`] is the identity.
pub fn write_conll(path: impl AsRef<Path>, data: &[LabeledSequence], attribute: &str) -> Result<()> {
    fs::write(path, render_conll(data, attribute))?;
    Ok(())
}
