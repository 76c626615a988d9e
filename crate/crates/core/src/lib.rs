//! Sequence-labeling toolkit for pulling product attributes (such as brand
//! names) out of noisy listing titles.
//!
//! Titles are tokenized and tagged with a BIO scheme; taggers range from a
//! plain bidirectional LSTM with per-token softmax up to a BiLSTM-CRF with
//! additive self-attention. All numerics are hand-rolled: forward passes,
//! reverse-mode gradients, the CRF lattice algorithms, and the RNG, so every
//! computation is deterministic given a seed and checkable against the
//! finite-difference and brute-force oracles that ship in [`check`].
//!
//! Module map:
//! - [`corpus`]: tokenization, BIO spans, CoNLL-style data files, vocab, splits
//! - [`numeric`]: matrix kernel, RNG, finite-difference gradient checking
//! - [`layers`]: embeddings, dropout, peephole BiLSTM, attention, projection
//! - [`crf`]: path scoring, log-partition, exact gradients, Viterbi
//! - [`training`]: variants, forward/backward assembly, SGD, cross-validation
//! - [`eval`]: span precision/recall/F1, label accuracy, report formatting
//! - [`model_file`]: versioned byte-exact model persistence
//! - [`synth`]: deterministic synthetic corpus generator
//! - [`check`]: self-check oracles used by tests and the `selfcheck` command

pub mod check;
pub mod config;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model_file;
pub mod numeric;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
