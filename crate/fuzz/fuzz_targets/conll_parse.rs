#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(parsed) = attrex::corpus::parse_conll(text) else {
        return;
    };
    // Anything that parses must survive a render/reparse cycle unchanged.
    let attribute = parsed.attribute.as_deref().unwrap_or("Value");
    let rendered = attrex::corpus::render_conll(&parsed.sequences, attribute);
    let reparsed = attrex::corpus::parse_conll(&rendered).expect("rendered corpus reparses");
    assert_eq!(reparsed.sequences.len(), parsed.sequences.len());
    for (a, b) in parsed.sequences.iter().zip(&reparsed.sequences) {
        assert_eq!(a.tokens.tokens(), b.tokens.tokens());
        assert_eq!(a.tags, b.tags);
    }
});
