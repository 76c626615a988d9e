#![no_main]

use attrex::corpus::{decode_spans, encode_bio, BioTag, TokenSequence};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let tags: Vec<BioTag> = data
        .iter()
        .map(|&b| BioTag::from_id(b as usize % BioTag::COUNT).unwrap())
        .collect();
    if tags.is_empty() {
        return;
    }
    let tokens: Vec<String> = (0..tags.len()).map(|i| format!("t{i}")).collect();
    let seq = TokenSequence::new(tokens).unwrap();
    let spans = decode_spans(&seq, &tags).unwrap();

    // Decoded spans are in order, disjoint, in bounds, and cover exactly the
    // non-O positions; each one re-encodes on its own.
    let mut covered = vec![false; tags.len()];
    let mut prev_end = 0;
    for (span, text) in &spans {
        assert!(span.start < span.end && span.end <= tags.len());
        assert!(span.start >= prev_end);
        prev_end = span.end;
        for slot in covered.iter_mut().take(span.end).skip(span.start) {
            *slot = true;
        }
        assert_eq!(*text, seq.span_text(*span));
        encode_bio(&seq, Some(*span)).unwrap();
    }
    for (i, &tag) in tags.iter().enumerate() {
        assert_eq!(covered[i], tag != BioTag::O);
    }
});
