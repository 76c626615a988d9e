//! Neural layers of the tagger: lookup embeddings, inverted dropout, the
//! peephole BiLSTM encoder, additive self-attention, and the linear
//! projection to per-tag emission scores.
//!
//! Every layer pairs a hand-written forward pass with a hand-derived reverse
//! pass; the unit tests of each file validate the pair against
//! [`crate::numeric::finite_diff_grad`].

mod attention;
mod dropout;
mod embedding;
mod lstm;
mod projection;

pub use attention::{attention, attention_backward, AttentionParams, AttnCache};
pub use dropout::{dropout, dropout_backward};
pub use embedding::{
    char_encode, embed_backward, embed_sequence, embed_token, EmbedCache, EmbeddingTables,
};
pub use lstm::{
    bilstm_backward, bilstm_encode, lstm_backward, lstm_forward, lstm_step, BiLstmCache,
    LstmCache, LstmParams, LstmState,
};
pub use projection::{emission_scores, projection_backward, ProjectionParams};
