//! BIO tag encoding and span decoding.

use super::{BioTag, Span, TokenSequence};
use crate::error::{Error, Result};

/// Tags `seq` for a single optional value span: `B` at the span start, `I`
/// inside it, `O` everywhere else (all `O` when `span` is `None`).
pub fn encode_bio(seq: &TokenSequence, span: Option<Span>) -> Result<Vec<BioTag>> {
    let mut tags = vec![BioTag::O; seq.len()];
    if let Some(s) = span {
        // Revalidate against this sequence; the span may come from elsewhere.
        let s = Span::new(s.start, s.end, seq.len())?;
        tags[s.start] = BioTag::B;
        for tag in tags.iter_mut().take(s.end).skip(s.start + 1) {
            *tag = BioTag::I;
        }
    }
    Ok(tags)
}

/// Recovers value spans from a tag sequence, returning each span with its
/// extracted text (tokens joined by single spaces).
///
/// Maximal `B I*` runs become spans. An `I` whose predecessor is `O` or the
/// sequence start is repaired to open a new span, so ill-formed model output
/// still decodes (IOB2-style lenient reading).
pub fn decode_spans(seq: &TokenSequence, tags: &[BioTag]) -> Result<Vec<(Span, String)>> {
    if tags.len() != seq.len() {
        return Err(Error::dimension(
            "decode_spans",
            format!("{} tokens vs {} tags", seq.len(), tags.len()),
        ));
    }
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            BioTag::B => {
                if let Some(start) = open.take() {
                    spans.push(Span { start, end: i });
                }
                open = Some(i);
            }
            BioTag::I => {
                // Orphan I (no open span) starts one.
                if open.is_none() {
                    open = Some(i);
                }
            }
            BioTag::O => {
                if let Some(start) = open.take() {
                    spans.push(Span { start, end: i });
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(Span {
            start,
            end: tags.len(),
        });
    }
    Ok(spans
        .into_iter()
        .map(|s| (s, seq.span_text(s)))
        .collect())
}
