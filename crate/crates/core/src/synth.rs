//! Deterministic synthetic corpus generator.
//!
//! Produces templated product titles in which a multi-token brand name is
//! dropped at a varied position among filler tokens, plus a configurable
//! share of brand-free titles. Same config, same corpus, byte for byte.

use std::collections::HashSet;

use crate::corpus::{encode_bio, Dataset, LabeledSequence, Span, TokenSequence};
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

/// Brands that every lexicon starts with, ahead of the generated grid.
const CORE_BRANDS: [&str; 4] = [
    "Woodland Imports",
    "Home Essentials",
    "Plum Island Silver",
    "The Green Pet Shop",
];

const BRAND_FIRST: [&str; 20] = [
    "Amber", "Birch", "Cedar", "Copper", "Crystal", "Ember", "Falcon", "Granite", "Harbor",
    "Ivory", "Juniper", "Lantern", "Maple", "Nimbus", "Orchid", "Pebble", "Quartz", "Raven",
    "Summit", "Willow",
];

const BRAND_SECOND: [&str; 15] = [
    "Atelier", "Brands", "Collective", "Crafts", "Designs", "Foundry", "Goods", "House",
    "Industries", "Labs", "Mercantile", "Outfitters", "Supply", "Trading", "Works",
];

const BRAND_SUFFIX: [&str; 3] = ["Co", "Group", "Studio"];

/// Filler vocabulary, disjoint from brand tokens so span boundaries are
/// learnable from word identity as well as position.
const FILLERS: [&str; 48] = [
    "Decorative", "Bottle", "Self", "Cooling", "Dog", "Pad", "Stainless", "Steel", "Ceramic",
    "Wooden", "Glass", "Cotton", "Leather", "Bamboo", "Portable", "Folding", "Adjustable",
    "Rechargeable", "Wireless", "Classic", "Vintage", "Modern", "Compact", "Deluxe", "Large",
    "Small", "Mini", "Round", "Square", "Black", "White", "Blue", "Red", "Gray", "Kitchen",
    "Garden", "Office", "Travel", "Storage", "Holder", "Organizer", "Lamp", "Mug", "Tray",
    "Basket", "Cover", "Stand", "Set",
];

/// Knobs for [`generate`].
#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub titles: usize,
    pub brand_count: usize,
    /// Share of titles that carry no brand span at all.
    pub no_brand_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            titles: 2000,
            brand_count: 200,
            no_brand_fraction: 0.1,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.titles == 0 {
            return Err(Error::config("title count must be positive".to_owned()));
        }
        if !self.no_brand_fraction.is_finite() || !(0.0..=1.0).contains(&self.no_brand_fraction) {
            return Err(Error::config(format!(
                "no-brand fraction must be in [0, 1], got {}",
                self.no_brand_fraction
            )));
        }
        Ok(())
    }
}

/// The first `count` entries of the fixed brand lexicon: four hand-picked
/// names, then a deterministic grid of two- and three-token combinations.
/// Every entry is multi-token and all entries are distinct.
pub fn brand_lexicon(count: usize) -> Result<Vec<String>> {
    let capacity = CORE_BRANDS.len() + BRAND_FIRST.len() * BRAND_SECOND.len();
    if count == 0 || count > capacity {
        return Err(Error::config(format!(
            "brand count must be in 1..={capacity}, got {count}"
        )));
    }
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut push = |name: String, out: &mut Vec<String>| {
        if out.len() < count && seen.insert(name.clone()) {
            out.push(name);
        }
    };
    for core in CORE_BRANDS {
        push(core.to_owned(), &mut out);
    }
    for (i, first) in BRAND_FIRST.iter().enumerate() {
        for (j, second) in BRAND_SECOND.iter().enumerate() {
            let name = if (i + j) % 3 == 0 {
                format!("{first} {second} {}", BRAND_SUFFIX[(i + j / 3) % 3])
            } else {
                format!("{first} {second}")
            };
            push(name, &mut out);
        }
    }
    Ok(out)
}

/// Generate a labeled corpus with attribute `Brand`. Titles are 4 to 12
/// tokens long; branded titles embed one lexicon entry at a seeded random
/// offset among filler tokens.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let brands = brand_lexicon(config.brand_count)?;
    let brand_tokens: Vec<Vec<String>> = brands
        .iter()
        .map(|b| b.split_whitespace().map(str::to_owned).collect())
        .collect();

    let mut rng = SeededRng::new(config.seed);
    let mut sequences = Vec::with_capacity(config.titles);
    for _ in 0..config.titles {
        let branded = rng.next_f64() >= config.no_brand_fraction;
        let seq = if branded {
            let brand = &brand_tokens[rng.below(brand_tokens.len())];
            branded_title(brand, &mut rng)?
        } else {
            plain_title(&mut rng)?
        };
        sequences.push(seq);
    }
    Ok(Dataset {
        sequences,
        attribute: Some("Brand".to_owned()),
    })
}

fn filler(rng: &mut SeededRng) -> String {
    FILLERS[rng.below(FILLERS.len())].to_owned()
}

fn branded_title(brand: &[String], rng: &mut SeededRng) -> Result<LabeledSequence> {
    let brand_len = brand.len();
    let min_fill = 4usize.saturating_sub(brand_len).max(1);
    let max_fill = 12 - brand_len;
    let fill = min_fill + rng.below(max_fill - min_fill + 1);
    let offset = rng.below(fill + 1);

    let mut tokens = Vec::with_capacity(fill + brand_len);
    for _ in 0..offset {
        tokens.push(filler(rng));
    }
    tokens.extend_from_slice(brand);
    for _ in offset..fill {
        tokens.push(filler(rng));
    }

    let seq = TokenSequence::new(tokens)?;
    let span = Span::new(offset, offset + brand_len, seq.len())?;
    let tags = encode_bio(&seq, Some(span))?;
    LabeledSequence::new(seq, tags)
}

fn plain_title(rng: &mut SeededRng) -> Result<LabeledSequence> {
    let len = 4 + rng.below(9);
    let tokens = (0..len).map(|_| filler(rng)).collect();
    let seq = TokenSequence::new(tokens)?;
    let tags = encode_bio(&seq, None)?;
    LabeledSequence::new(seq, tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BioTag;

    #[test]
    fn lexicon_is_distinct_multi_token_and_starts_with_the_core_brands() {
        let brands = brand_lexicon(200).unwrap();
        assert_eq!(brands.len(), 200);
        assert_eq!(&brands[..4], &CORE_BRANDS.map(str::to_owned));
        let distinct: HashSet<&String> = brands.iter().collect();
        assert_eq!(distinct.len(), 200);
        for b in &brands {
            assert!(b.split_whitespace().count() >= 2, "single-token brand {b}");
        }
        assert!(brands.iter().any(|b| b.split_whitespace().count() == 3));
    }

    #[test]
    fn lexicon_rejects_zero_and_oversized_requests() {
        assert!(brand_lexicon(0).is_err());
        assert!(brand_lexicon(10_000).is_err());
        assert_eq!(brand_lexicon(2).unwrap().len(), 2);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let config = SynthConfig {
            titles: 60,
            ..SynthConfig::default()
        };
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.sequences, b.sequences);

        let other = generate(&SynthConfig { seed: 2, ..config }).unwrap();
        assert_ne!(a.sequences, other.sequences);
    }

    #[test]
    fn titles_stay_within_length_bounds_and_tags_align() {
        let data = generate(&SynthConfig {
            titles: 300,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(data.sequences.len(), 300);
        assert_eq!(data.attribute.as_deref(), Some("Brand"));
        for seq in &data.sequences {
            assert!((4..=12).contains(&seq.len()), "bad length {}", seq.len());
            assert_eq!(seq.tokens.len(), seq.tags.len());
            assert!(seq.gold_spans().len() <= 1);
        }
    }

    #[test]
    fn corpus_mixes_brand_positions_and_brand_free_titles() {
        let data = generate(&SynthConfig {
            titles: 500,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut at_start = 0;
        let mut at_end = 0;
        let mut inside = 0;
        let mut brand_free = 0;
        for seq in &data.sequences {
            match seq.gold_spans().first() {
                None => brand_free += 1,
                Some(span) if span.start == 0 => at_start += 1,
                Some(span) if span.end == seq.len() => at_end += 1,
                Some(_) => inside += 1,
            }
        }
        assert!(at_start > 0, "no title starts with its brand");
        assert!(at_end > 0, "no title ends with its brand");
        assert!(inside > 0, "no title embeds its brand mid-sequence");
        assert!(brand_free > 0, "no brand-free titles");
        assert!(brand_free < 500 / 5, "too many brand-free titles");
    }

    #[test]
    fn branded_titles_tag_exactly_the_brand_tokens() {
        let data = generate(&SynthConfig {
            titles: 200,
            ..SynthConfig::default()
        })
        .unwrap();
        let lexicon: HashSet<String> = brand_lexicon(200).unwrap().into_iter().collect();
        let mut checked = 0;
        for seq in &data.sequences {
            if let Some(span) = seq.gold_spans().first() {
                assert!(lexicon.contains(&seq.tokens.span_text(*span)));
                assert_eq!(seq.tags[span.start], BioTag::B);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn filler_pool_is_disjoint_from_brand_tokens() {
        let brands = brand_lexicon(200).unwrap();
        let brand_words: HashSet<&str> = brands
            .iter()
            .flat_map(|b| b.split_whitespace())
            .collect();
        for f in FILLERS {
            assert!(!brand_words.contains(f), "{f} is both filler and brand token");
        }
    }

    #[test]
    fn no_brand_fraction_bounds_are_enforced() {
        let bad = SynthConfig {
            no_brand_fraction: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
        let all_plain = SynthConfig {
            titles: 20,
            no_brand_fraction: 1.0,
            ..SynthConfig::default()
        };
        let data = generate(&all_plain).unwrap();
        assert!(data.sequences.iter().all(|s| s.gold_spans().is_empty()));
    }
}
