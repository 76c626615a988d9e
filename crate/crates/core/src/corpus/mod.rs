//! Corpus handling: whitespace tokenization, BIO tag encoding/decoding,
//! dataset file I/O, vocabulary construction, and split/fold generation.

mod bio;
mod conll;
mod split;
mod vocab;

pub use bio::{decode_spans, encode_bio};
pub use conll::{parse_conll, read_conll, render_conll, write_conll, Dataset};
pub use split::{kfold, split_dataset};
pub use vocab::{Vocab, PADDING_ID, UNKNOWN_ID};

use crate::error::{Error, Result};

/// A whitespace-tokenized title. Tokens are non-empty and contain no whitespace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Wraps pre-split tokens, rejecting empty or whitespace-bearing ones.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::config(format!("invalid token {t:?}")));
            }
        }
        Ok(TokenSequence(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Original text of `span`, tokens joined with single spaces.
    pub fn span_text(&self, span: Span) -> String {
        self.0[span.start..span.end].join(" ")
    }
}

impl std::ops::Index<usize> for TokenSequence {
    type Output = str;

    fn index(&self, i: usize) -> &str {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Splits a title on runs of whitespace, preserving token text exactly.
pub fn tokenize(title: &str) -> Result<TokenSequence> {
    let tokens: Vec<String> = title.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(Error::EmptyInput("title is empty or whitespace-only"));
    }
    Ok(TokenSequence(tokens))
}

/// Per-token label marking the Beginning, Inside, or Outside of a value span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    /// Size of the tag alphabet in the single-attribute setting.
    pub const COUNT: usize = 3;

    pub fn id(self) -> usize {
        match self {
            BioTag::B => 0,
            BioTag::I => 1,
            BioTag::O => 2,
        }
    }

    pub fn from_id(id: usize) -> Option<BioTag> {
        match id {
            0 => Some(BioTag::B),
            1 => Some(BioTag::I),
            2 => Some(BioTag::O),
            _ => None,
        }
    }

    /// Tag string as written in dataset files, e.g. `B-Brand` or `O`.
    pub fn render(self, attribute: &str) -> String {
        match self {
            BioTag::B => format!("B-{attribute}"),
            BioTag::I => format!("I-{attribute}"),
            BioTag::O => "O".to_string(),
        }
    }
}

/// Contiguous token range, start inclusive and end exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    /// Validates `0 <= start < end <= seq_len`.
    pub fn new(start: usize, end: usize, seq_len: usize) -> Result<Span> {
        if start >= end || end > seq_len {
            return Err(Error::config(format!(
                "span ({start}, {end}) invalid for sequence of length {seq_len}"
            )));
        }
        Ok(Span { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Tokens plus aligned per-token tags; the unit of training and evaluation data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    pub tokens: TokenSequence,
    pub tags: Vec<BioTag>,
}

impl LabeledSequence {
    pub fn new(tokens: TokenSequence, tags: Vec<BioTag>) -> Result<Self> {
        if tags.len() != tokens.len() {
            return Err(Error::dimension(
                "LabeledSequence::new",
                format!("{} tokens vs {} tags", tokens.len(), tags.len()),
            ));
        }
        Ok(LabeledSequence { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold spans of this sequence under the decoding rules of [`decode_spans`].
    pub fn gold_spans(&self) -> Vec<Span> {
        decode_spans(&self.tokens, &self.tags)
            .expect("tags are aligned by construction")
            .into_iter()
            .map(|(span, _)| span)
            .collect()
    }
}
