//! Learned word and character embedding tables.
//!
//! A token's representation is its word-table row (the UNKNOWN row for
//! out-of-vocabulary words) concatenated with the mean of its characters'
//! rows, so unseen words still get a usable, character-driven vector.

use crate::corpus::{TokenSequence, Vocab};
use crate::error::{Error, Result};
use crate::numeric::{init_weight, Matrix, ParamTensor, SeededRng, TensorSet};

#[derive(Clone, Debug)]
pub struct EmbeddingTables {
    pub word: ParamTensor,
    pub char: ParamTensor,
}

impl EmbeddingTables {
    pub fn new(vocab: &Vocab, word_dim: usize, char_dim: usize, rng: &mut SeededRng) -> Self {
        EmbeddingTables {
            word: ParamTensor::new(
                "embed.word",
                init_weight(vocab.word_count(), word_dim, rng),
            ),
            char: ParamTensor::new(
                "embed.char",
                init_weight(vocab.char_count(), char_dim, rng),
            ),
        }
    }

    pub fn word_dim(&self) -> usize {
        self.word.value.cols()
    }

    pub fn char_dim(&self) -> usize {
        self.char.value.cols()
    }

    /// Width of one embedded token: word part plus pooled character part.
    pub fn token_dim(&self) -> usize {
        self.word_dim() + self.char_dim()
    }
}

impl TensorSet for EmbeddingTables {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![&self.word, &self.char]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.word, &mut self.char]
    }
}

fn char_ids(vocab: &Vocab, word: &str) -> Vec<usize> {
    word.chars().map(|c| vocab.char_id(c)).collect()
}

/// Mean of the word's character-embedding rows.
pub fn char_encode(char_table: &Matrix, vocab: &Vocab, word: &str) -> Result<Vec<f64>> {
    if word.is_empty() {
        return Err(Error::EmptyInput("word for character encoding"));
    }
    let ids = char_ids(vocab, word);
    let mut out = vec![0.0; char_table.cols()];
    for &id in &ids {
        for (o, &v) in out.iter_mut().zip(char_table.row(id)) {
            *o += v;
        }
    }
    let scale = 1.0 / ids.len() as f64;
    for o in &mut out {
        *o *= scale;
    }
    Ok(out)
}

/// Full token representation: word-table row (UNKNOWN fallback) followed by
/// the character encoding.
pub fn embed_token(tables: &EmbeddingTables, vocab: &Vocab, word: &str) -> Result<Vec<f64>> {
    if word.is_empty() {
        return Err(Error::EmptyInput("word for embedding"));
    }
    let mut out = Vec::with_capacity(tables.token_dim());
    out.extend_from_slice(tables.word.value.row(vocab.word_id(word)));
    out.extend(char_encode(&tables.char.value, vocab, word)?);
    Ok(out)
}

/// Lookup indices recorded by [`embed_sequence`]; all the backward pass needs.
#[derive(Clone, Debug)]
pub struct EmbedCache {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
}

/// Embed every token of a sequence into an `n x token_dim` matrix.
pub fn embed_sequence(
    tables: &EmbeddingTables,
    vocab: &Vocab,
    seq: &TokenSequence,
) -> Result<(Matrix, EmbedCache)> {
    let n = seq.len();
    let mut out = Matrix::zeros(n, tables.token_dim());
    let mut cache = EmbedCache {
        word_ids: Vec::with_capacity(n),
        char_ids: Vec::with_capacity(n),
    };
    for (t, token) in seq.tokens().iter().enumerate() {
        out.row_mut(t)
            .copy_from_slice(&embed_token(tables, vocab, token)?);
        cache.word_ids.push(vocab.word_id(token));
        cache.char_ids.push(char_ids(vocab, token));
    }
    Ok((out, cache))
}

/// Accumulate gradients for the table rows used by a forward pass. Rows of
/// unused words and characters stay untouched (sparse update).
pub fn embed_backward(
    tables: &mut EmbeddingTables,
    cache: &EmbedCache,
    d_embed: &Matrix,
) -> Result<()> {
    let wd = tables.word_dim();
    let cd = tables.char_dim();
    if d_embed.rows() != cache.word_ids.len() || d_embed.cols() != wd + cd {
        return Err(Error::dimension(
            "embed_backward",
            format!(
                "upstream gradient is {}x{}, cache covers {} tokens of width {}",
                d_embed.rows(),
                d_embed.cols(),
                cache.word_ids.len(),
                wd + cd
            ),
        ));
    }
    for (t, &word_id) in cache.word_ids.iter().enumerate() {
        let d_row = d_embed.row(t);
        let word_grad = tables.word.grad.row_mut(word_id);
        for (g, &d) in word_grad.iter_mut().zip(&d_row[..wd]) {
            *g += d;
        }
        let scale = 1.0 / cache.char_ids[t].len() as f64;
        for &char_id in &cache.char_ids[t] {
            let char_grad = tables.char.grad.row_mut(char_id);
            for (g, &d) in char_grad.iter_mut().zip(&d_row[wd..]) {
                *g += d * scale;
            }
        }
    }
    Ok(())
}
