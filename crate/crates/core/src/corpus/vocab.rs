//! Word, character and tag symbol tables.

use std::collections::HashMap;

use super::{BioTag, LabeledSequence};
use crate::error::{Error, Result};

/// Reserved id for the padding row (kept so embedding tables have a fixed
/// layout; the per-sequence pipeline never emits it).
pub const PADDING_ID: usize = 0;
/// Reserved id for out-of-vocabulary symbols.
pub const UNKNOWN_ID: usize = 1;

const RESERVED: usize = 2;

/// Symbol tables built from the training split only. Words below the
/// frequency cutoff map to [`UNKNOWN_ID`] at lookup time; the char table
/// keeps every character seen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    word_ids: HashMap<String, usize>,
    chars: Vec<char>,
    char_ids: HashMap<char, usize>,
    min_count: usize,
    lowercase: bool,
}

impl Vocab {
    pub fn build(train: &[LabeledSequence], min_count: usize, lowercase: bool) -> Result<Vocab> {
        if train.is_empty() {
            return Err(Error::EmptyInput("vocabulary build needs training data"));
        }
        let min_count = min_count.max(1);

        // First-seen order keeps ids deterministic for a given corpus order.
        let mut word_order: Vec<String> = Vec::new();
        let mut word_freq: HashMap<String, usize> = HashMap::new();
        let mut chars: Vec<char> = Vec::new();
        let mut char_ids: HashMap<char, usize> = HashMap::new();

        for seq in train {
            for token in &seq.tokens {
                let key = fold_case(token, lowercase);
                let count = word_freq.entry(key.clone()).or_insert(0);
                if *count == 0 {
                    word_order.push(key);
                }
                *count += 1;
                for c in token.chars() {
                    char_ids.entry(c).or_insert_with(|| {
                        chars.push(c);
                        RESERVED + chars.len() - 1
                    });
                }
            }
        }

        let mut words = Vec::new();
        let mut word_ids = HashMap::new();
        for w in word_order {
            if word_freq[&w] >= min_count {
                word_ids.insert(w.clone(), RESERVED + words.len());
                words.push(w);
            }
        }

        Ok(Vocab {
            words,
            word_ids,
            chars,
            char_ids,
            min_count,
            lowercase,
        })
    }

    /// Rebuilds a vocabulary from serialized symbol lists (model file load).
    pub fn from_parts(words: Vec<String>, chars: Vec<char>, min_count: usize, lowercase: bool) -> Vocab {
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), RESERVED + i))
            .collect();
        let char_ids = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, RESERVED + i))
            .collect();
        Vocab {
            words,
            word_ids,
            chars,
            char_ids,
            min_count,
            lowercase,
        }
    }

    pub fn word_id(&self, token: &str) -> usize {
        let key = fold_case(token, self.lowercase);
        self.word_ids.get(&key).copied().unwrap_or(UNKNOWN_ID)
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(UNKNOWN_ID)
    }

    /// Number of word rows including the reserved padding/unknown rows.
    pub fn word_count(&self) -> usize {
        self.words.len() + RESERVED
    }

    /// Number of char rows including the reserved padding/unknown rows.
    pub fn char_count(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn tag_count(&self) -> usize {
        BioTag::COUNT
    }

    /// In-vocabulary words in id order (reserved rows excluded).
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Known characters in id order (reserved rows excluded).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }
}

fn fold_case(token: &str, lowercase: bool) -> String {
    if lowercase {
        token.to_lowercase()
    } else {
        token.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_bio, tokenize};

    fn seq(text: &str) -> LabeledSequence {
        let tokens = tokenize(text).unwrap();
        let tags = encode_bio(&tokens, None).unwrap();
        LabeledSequence::new(tokens, tags).unwrap()
    }

    #[test]
    fn frequency_cutoff_drops_rare_words() {
        let vocab = Vocab::build(&[seq("a a b")], 2, false).unwrap();
        assert_ne!(vocab.word_id("a"), UNKNOWN_ID);
        assert_eq!(vocab.word_id("b"), UNKNOWN_ID);
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let vocab = Vocab::build(&[seq("x y z")], 1, false).unwrap();
        for w in ["x", "y", "z"] {
            assert_ne!(vocab.word_id(w), UNKNOWN_ID);
        }
    }

    #[test]
    fn unseen_word_maps_to_unknown() {
        let vocab = Vocab::build(&[seq("a b")], 1, false).unwrap();
        assert_eq!(vocab.word_id("never-seen"), UNKNOWN_ID);
        assert_eq!(vocab.char_id('Z'), UNKNOWN_ID);
    }

    #[test]
    fn ids_are_dense_and_reserved_slots_never_collide() {
        let vocab = Vocab::build(&[seq("a b c a")], 1, false).unwrap();
        let mut ids: Vec<usize> = ["a", "b", "c"].iter().map(|w| vocab.word_id(w)).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![2, 3, 4]);
        assert_eq!(vocab.word_count(), 5);
    }

    #[test]
    fn lowercase_folds_words_but_not_chars() {
        let vocab = Vocab::build(&[seq("Acme ACME")], 2, true).unwrap();
        assert_eq!(vocab.word_id("acme"), vocab.word_id("AcMe"));
        assert_ne!(vocab.word_id("acme"), UNKNOWN_ID);
        // Char table stays case-sensitive.
        assert_ne!(vocab.char_id('A'), UNKNOWN_ID);
        assert_ne!(vocab.char_id('c'), UNKNOWN_ID);
        assert_ne!(vocab.char_id('A'), vocab.char_id('a'));
    }

    #[test]
    fn round_trips_through_parts() {
        let vocab = Vocab::build(&[seq("a b c")], 1, false).unwrap();
        let rebuilt = Vocab::from_parts(
            vocab.words().to_vec(),
            vocab.chars().to_vec(),
            vocab.min_count(),
            vocab.lowercase(),
        );
        assert_eq!(vocab, rebuilt);
    }
}
