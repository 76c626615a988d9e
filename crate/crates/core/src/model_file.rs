//! Versioned on-disk model container.
//!
//! Layout: a UTF-8 text header (version line, config assignments, vocab
//! symbol lists, tensor name/shape table), then a `binary` marker line,
//! then each tensor as little-endian `u32` rows, `u32` cols, and row-major
//! `f64` data. Floats in the header are printed with their shortest
//! round-trip representation, so save/load is bit-exact end to end.

use std::path::Path;

use crate::config::ConfigFile;
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::numeric::{Matrix, SeededRng, TensorSet};
use crate::training::{ModelConfig, ModelParams, Variant};

const MAGIC: &str = "attrex model";
const VERSION: u32 = 1;
const BINARY_MARKER: &[u8] = b"\nbinary\n";

const CONFIG_KEYS: [&str; 13] = [
    "variant",
    "word_dim",
    "char_dim",
    "hidden",
    "dropout",
    "learning_rate",
    "clip_norm",
    "epochs",
    "folds",
    "seed",
    "min_count",
    "lowercase",
    "constrain",
];

/// A trained model plus everything needed to run it: config snapshot,
/// vocabulary, parameters, and training metadata.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ModelParams,
    /// Attribute name from the training data, used to label tag output.
    pub attribute: Option<String>,
    pub best_epoch: usize,
    pub epochs_completed: usize,
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = String::new();
        header.push_str(&format!("{MAGIC} v{VERSION}\n"));
        header.push_str(&format!("variant={}\n", self.config.variant));
        header.push_str(&format!("word_dim={}\n", self.config.word_dim));
        header.push_str(&format!("char_dim={}\n", self.config.char_dim));
        header.push_str(&format!("hidden={}\n", self.config.hidden));
        header.push_str(&format!("dropout={:?}\n", self.config.dropout));
        header.push_str(&format!("learning_rate={:?}\n", self.config.learning_rate));
        header.push_str(&format!("clip_norm={:?}\n", self.config.clip_norm));
        header.push_str(&format!("epochs={}\n", self.config.epochs));
        header.push_str(&format!("folds={}\n", self.config.folds));
        header.push_str(&format!("seed={}\n", self.config.seed));
        header.push_str(&format!("min_count={}\n", self.config.min_count));
        header.push_str(&format!("lowercase={}\n", self.config.lowercase));
        header.push_str(&format!("constrain={}\n", self.config.constrain));
        if let Some(attr) = &self.attribute {
            header.push_str(&format!("attribute={attr}\n"));
        }
        header.push_str(&format!("best_epoch={}\n", self.best_epoch));
        header.push_str(&format!("epochs_completed={}\n", self.epochs_completed));

        header.push_str(&format!("words {}\n", self.vocab.words().len()));
        for w in self.vocab.words() {
            header.push_str(w);
            header.push('\n');
        }
        header.push_str(&format!("chars {}\n", self.vocab.chars().len()));
        for &c in self.vocab.chars() {
            header.push(c);
            header.push('\n');
        }

        let tensors = self.params.tensors();
        header.push_str(&format!("tensors {}\n", tensors.len()));
        for t in &tensors {
            header.push_str(&format!("{} {} {}\n", t.name, t.value.rows(), t.value.cols()));
        }
        header.push_str("binary\n");

        let mut bytes = header.into_bytes();
        for t in &tensors {
            bytes.extend_from_slice(&(t.value.rows() as u32).to_le_bytes());
            bytes.extend_from_slice(&(t.value.cols() as u32).to_le_bytes());
            for v in t.value.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelFile> {
        let marker = find(bytes, BINARY_MARKER).ok_or_else(|| {
            Error::ModelFormat("missing binary section marker".to_owned())
        })?;
        let header = std::str::from_utf8(&bytes[..marker])
            .map_err(|_| Error::ModelFormat("header is not valid UTF-8".to_owned()))?;
        let payload = &bytes[marker + BINARY_MARKER.len()..];

        let mut lines = header.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::ModelFormat("empty header".to_owned()))?;
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|rest| rest.trim().strip_prefix('v'))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| {
                Error::ModelFormat(format!("not a model file (first line {first:?})"))
            })?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version}; this build reads v{VERSION}"
            )));
        }

        let mut assignments = String::new();
        let mut section = None;
        for line in lines.by_ref() {
            if let Some(count) = line.strip_prefix("words ") {
                section = Some(parse_count("words", count)?);
                break;
            }
            assignments.push_str(line);
            assignments.push('\n');
        }
        let word_total =
            section.ok_or_else(|| Error::ModelFormat("missing words section".to_owned()))?;

        let kv = ConfigFile::parse(&assignments)
            .map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
        for key in kv.keys() {
            let known = CONFIG_KEYS.contains(&key)
                || matches!(key, "attribute" | "best_epoch" | "epochs_completed");
            if !known {
                return Err(Error::ModelFormat(format!("unknown header key {key:?}")));
            }
        }
        let config = config_from_header(&kv)?;

        let mut words = Vec::with_capacity(word_total.min(bytes.len()));
        for _ in 0..word_total {
            let w = lines
                .next()
                .ok_or_else(|| Error::ModelFormat("truncated word list".to_owned()))?;
            words.push(w.to_owned());
        }

        let char_line = lines
            .next()
            .ok_or_else(|| Error::ModelFormat("missing chars section".to_owned()))?;
        let char_total = char_line
            .strip_prefix("chars ")
            .ok_or_else(|| {
                Error::ModelFormat(format!("expected chars section, got {char_line:?}"))
            })
            .and_then(|c| parse_count("chars", c))?;
        let mut chars = Vec::with_capacity(char_total.min(bytes.len()));
        for _ in 0..char_total {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelFormat("truncated char list".to_owned()))?;
            let mut it = line.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => chars.push(c),
                _ => {
                    return Err(Error::ModelFormat(format!(
                        "char entry must be a single character, got {line:?}"
                    )))
                }
            }
        }
        let vocab = Vocab::from_parts(words, chars, config.min_count, config.lowercase);

        let tensor_line = lines
            .next()
            .ok_or_else(|| Error::ModelFormat("missing tensors section".to_owned()))?;
        let tensor_total = tensor_line
            .strip_prefix("tensors ")
            .ok_or_else(|| {
                Error::ModelFormat(format!("expected tensors section, got {tensor_line:?}"))
            })
            .and_then(|c| parse_count("tensors", c))?;
        let mut shapes = Vec::with_capacity(tensor_total.min(bytes.len()));
        for _ in 0..tensor_total {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelFormat("truncated tensor table".to_owned()))?;
            let mut parts = line.split(' ');
            let (Some(name), Some(rows), Some(cols), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::ModelFormat(format!(
                    "tensor table line must be `name rows cols`, got {line:?}"
                )));
            };
            shapes.push((
                name.to_owned(),
                parse_count("tensor rows", rows)?,
                parse_count("tensor cols", cols)?,
            ));
        }
        if let Some(extra) = lines.next() {
            return Err(Error::ModelFormat(format!(
                "unexpected header line after tensor table: {extra:?}"
            )));
        }

        // Build a skeleton with config-derived shapes, then overwrite every
        // tensor from the payload; any mismatch in names or shapes is a
        // format error.
        let mut init_rng = SeededRng::new(0);
        let mut params = ModelParams::new(&config, &vocab, &mut init_rng)
            .map_err(|e| Error::ModelFormat(format!("header config: {e}")))?;
        {
            let expected = params.tensors();
            if expected.len() != shapes.len() {
                return Err(Error::ModelFormat(format!(
                    "expected {} tensors for variant {}, file lists {}",
                    expected.len(),
                    config.variant,
                    shapes.len()
                )));
            }
            for (t, (name, rows, cols)) in expected.iter().zip(&shapes) {
                if &t.name != name {
                    return Err(Error::ModelFormat(format!(
                        "tensor order mismatch: expected {}, file lists {name}",
                        t.name
                    )));
                }
                if t.value.rows() != *rows || t.value.cols() != *cols {
                    return Err(Error::ModelFormat(format!(
                        "tensor {name}: header shape {rows}x{cols} does not match config-derived {}x{}",
                        t.value.rows(),
                        t.value.cols()
                    )));
                }
            }
        }

        let mut cursor = payload;
        for (name, rows, cols) in &shapes {
            let matrix = read_tensor(&mut cursor, name, *rows, *cols)?;
            let slot = params
                .tensor_mut(name)
                .expect("names were checked against the skeleton");
            slot.value = matrix;
        }
        if !cursor.is_empty() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes after last tensor",
                cursor.len()
            )));
        }

        let attribute = kv.get("attribute").map(str::to_owned);
        let best_epoch = kv
            .get_parsed::<usize>("best_epoch")
            .map_err(|e| Error::ModelFormat(e.to_string()))?
            .ok_or_else(|| Error::ModelFormat("missing best_epoch".to_owned()))?;
        let epochs_completed = kv
            .get_parsed::<usize>("epochs_completed")
            .map_err(|e| Error::ModelFormat(e.to_string()))?
            .ok_or_else(|| Error::ModelFormat("missing epochs_completed".to_owned()))?;

        Ok(ModelFile {
            config,
            vocab,
            params,
            attribute,
            best_epoch,
            epochs_completed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn parse_count(what: &str, raw: &str) -> Result<usize> {
    raw.parse::<usize>()
        .map_err(|_| Error::ModelFormat(format!("{what}: bad count {raw:?}")))
}

fn config_from_header(kv: &ConfigFile) -> Result<ModelConfig> {
    let fmt = |e: Error| Error::ModelFormat(e.to_string());
    let need = |key: &str| {
        kv.get(key)
            .ok_or_else(|| Error::ModelFormat(format!("missing config key {key:?}")))
    };
    let variant = Variant::parse(need("variant")?).map_err(fmt)?;
    let config = ModelConfig {
        variant,
        word_dim: require(kv, "word_dim")?,
        char_dim: require(kv, "char_dim")?,
        hidden: require(kv, "hidden")?,
        dropout: require(kv, "dropout")?,
        learning_rate: require(kv, "learning_rate")?,
        clip_norm: require(kv, "clip_norm")?,
        epochs: require(kv, "epochs")?,
        folds: require(kv, "folds")?,
        seed: require(kv, "seed")?,
        min_count: require(kv, "min_count")?,
        lowercase: require_bool(kv, "lowercase")?,
        constrain: require_bool(kv, "constrain")?,
    };
    config.validate().map_err(fmt)?;
    Ok(config)
}

fn require<T>(kv: &ConfigFile, key: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    kv.get_parsed::<T>(key)
        .map_err(|e| Error::ModelFormat(e.to_string()))?
        .ok_or_else(|| Error::ModelFormat(format!("missing config key {key:?}")))
}

fn require_bool(kv: &ConfigFile, key: &str) -> Result<bool> {
    kv.get_bool(key)
        .map_err(|e| Error::ModelFormat(e.to_string()))?
        .ok_or_else(|| Error::ModelFormat(format!("missing config key {key:?}")))
}

/// Reads one shape-prefixed tensor, advancing `cursor`. Never allocates
/// more than the remaining payload can actually fill.
fn read_tensor(cursor: &mut &[u8], name: &str, rows: usize, cols: usize) -> Result<Matrix> {
    let prefix_rows = read_u32(cursor, name)? as usize;
    let prefix_cols = read_u32(cursor, name)? as usize;
    if prefix_rows != rows || prefix_cols != cols {
        return Err(Error::ModelFormat(format!(
            "tensor {name}: payload shape {prefix_rows}x{prefix_cols} does not match header {rows}x{cols}"
        )));
    }
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::ModelFormat(format!("tensor {name}: shape overflow")))?;
    let need = count
        .checked_mul(8)
        .ok_or_else(|| Error::ModelFormat(format!("tensor {name}: shape overflow")))?;
    if cursor.len() < need {
        return Err(Error::ModelFormat(format!(
            "tensor {name}: payload truncated ({} of {need} bytes)",
            cursor.len()
        )));
    }
    let (data, rest) = cursor.split_at(need);
    *cursor = rest;
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
        .collect();
    Matrix::from_vec(rows, cols, values)
        .map_err(|e| Error::ModelFormat(format!("tensor {name}: {e}")))
}

fn read_u32(cursor: &mut &[u8], name: &str) -> Result<u32> {
    if cursor.len() < 4 {
        return Err(Error::ModelFormat(format!(
            "tensor {name}: payload truncated reading shape"
        )));
    }
    let (head, rest) = cursor.split_at(4);
    *cursor = rest;
    Ok(u32::from_le_bytes(head.try_into().expect("head is 4 bytes")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_bio, tokenize, LabeledSequence};

    fn sample_model(variant: Variant) -> ModelFile {
        let data: Vec<LabeledSequence> = ["Acme anvil heavy", "Plum Island Silver ring"]
            .iter()
            .map(|t| {
                let tokens = tokenize(t).unwrap();
                let tags = encode_bio(&tokens, None).unwrap();
                LabeledSequence::new(tokens, tags).unwrap()
            })
            .collect();
        let config = ModelConfig {
            word_dim: 6,
            char_dim: 3,
            hidden: 4,
            seed: 21,
            ..ModelConfig::new(variant)
        };
        let vocab = Vocab::build(&data, 1, false).unwrap();
        let mut rng = SeededRng::new(config.seed);
        let params = ModelParams::new(&config, &vocab, &mut rng).unwrap();
        ModelFile {
            config,
            vocab,
            params,
            attribute: Some("Brand".to_owned()),
            best_epoch: 3,
            epochs_completed: 9,
        }
    }

    #[test]
    fn constrained_model_round_trips_with_mask_intact() {
        let mut model = sample_model(Variant::BilstmCrf);
        model.config.constrain = true;
        let mut rng = SeededRng::new(model.config.seed);
        model.params = ModelParams::new(&model.config, &model.vocab, &mut rng).unwrap();

        let loaded = ModelFile::from_bytes(&model.to_bytes()).unwrap();
        assert!(loaded.config.constrain);
        let a = &loaded.params.trans.as_ref().unwrap().value;
        let (before, after) = (
            model.params.trans.as_ref().unwrap().value.data().to_vec(),
            a.data().to_vec(),
        );
        assert_eq!(before, after);
        use crate::corpus::BioTag;
        assert_eq!(a.get(BioTag::O.id(), BioTag::I.id()), crate::crf::NEG_INF);
    }

    #[test]
    fn round_trip_is_bitwise_for_every_variant() {
        for variant in Variant::ALL {
            let model = sample_model(variant);
            let bytes = model.to_bytes();
            let loaded = ModelFile::from_bytes(&bytes).unwrap();

            assert_eq!(loaded.config, model.config);
            assert_eq!(loaded.vocab, model.vocab);
            assert_eq!(loaded.attribute.as_deref(), Some("Brand"));
            assert_eq!(loaded.best_epoch, 3);
            assert_eq!(loaded.epochs_completed, 9);
            for (a, b) in model.params.tensors().iter().zip(loaded.params.tensors()) {
                assert_eq!(a.name, b.name);
                let bits_a: Vec<u64> = a.value.data().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.value.data().iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits_a, bits_b, "{} not bit-exact", a.name);
            }
            assert_eq!(bytes, loaded.to_bytes(), "re-serialization drifted");
        }
    }

    #[test]
    fn round_trip_survives_awkward_float_values() {
        let mut model = sample_model(Variant::BilstmCrf);
        model.config.dropout = 0.1 + 0.2;
        model.config.learning_rate = f64::MIN_POSITIVE;
        let t = model.params.tensors_mut().remove(0);
        t.value.set(0, 0, -0.0);
        t.value.set(0, 1, 1e-308);
        let loaded = ModelFile::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(loaded.config.dropout.to_bits(), model.config.dropout.to_bits());
        assert_eq!(
            loaded.config.learning_rate.to_bits(),
            model.config.learning_rate.to_bits()
        );
        assert_eq!(
            loaded.params.tensors()[0].value.get(0, 0).to_bits(),
            (-0.0f64).to_bits()
        );
    }

    #[test]
    fn unknown_version_is_refused() {
        let bytes = sample_model(Variant::Bilstm).to_bytes();
        let mut tampered = bytes.clone();
        let pos = find(&tampered, b"v1\n").unwrap();
        tampered[pos + 1] = b'2';
        let err = ModelFile::from_bytes(&tampered).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn garbage_and_truncation_are_errors_not_panics() {
        assert!(ModelFile::from_bytes(b"").is_err());
        assert!(ModelFile::from_bytes(b"not a model").is_err());
        assert!(ModelFile::from_bytes(&[0xff, 0xfe, 0x00, 0x01]).is_err());

        let bytes = sample_model(Variant::BilstmCrfAttn).to_bytes();
        for cut in [0, 1, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                ModelFile::from_bytes(&bytes[..cut]).is_err(),
                "truncation at {cut} should fail"
            );
        }
    }

    #[test]
    fn unknown_header_key_is_refused() {
        let bytes = sample_model(Variant::Bilstm).to_bytes();
        let text_end = find(&bytes, b"words ").unwrap();
        let mut tampered = Vec::new();
        tampered.extend_from_slice(&bytes[..text_end]);
        tampered.extend_from_slice(b"surprise=1\n");
        tampered.extend_from_slice(&bytes[text_end..]);
        let err = ModelFile::from_bytes(&tampered).unwrap_err();
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn oversized_tensor_claim_is_rejected_before_allocation() {
        let model = sample_model(Variant::Bilstm);
        let bytes = model.to_bytes();
        let name = model.params.tensors()[0].name.clone();
        let rows = model.params.tensors()[0].value.rows();
        let cols = model.params.tensors()[0].value.cols();
        let old = format!("{name} {rows} {cols}\n");
        let new = format!("{name} 4000000000 4000000000\n");
        let pos = find(&bytes, old.as_bytes()).unwrap();
        let mut tampered = Vec::new();
        tampered.extend_from_slice(&bytes[..pos]);
        tampered.extend_from_slice(new.as_bytes());
        tampered.extend_from_slice(&bytes[pos + old.len()..]);
        let err = ModelFile::from_bytes(&tampered).unwrap_err();
        assert!(err.to_string().contains("does not match"), "{err}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = sample_model(Variant::Bilstm).to_bytes();
        bytes.push(0);
        let err = ModelFile::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn save_and_load_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.stg");
        let model = sample_model(Variant::BilstmCrf);
        model.save(&path).unwrap();
        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(loaded.to_bytes(), model.to_bytes());
    }

    #[test]
    fn missing_file_reports_io_error() {
        let err = ModelFile::load(Path::new("/nonexistent/model.stg")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
