//! End-to-end optimization: forward-pass assembly, backpropagation through
//! time, SGD with global-norm clipping, the epoch loop, and cross-validation.
//!
//! Four variants share one parameter layout; attention and the transition
//! matrix are present exactly when the variant calls for them. Everything is
//! deterministic given (config, seed, data): initialization, shuffling, and
//! dropout draw from independent streams derived from the one seed.

use crate::corpus::{kfold, BioTag, LabeledSequence, TokenSequence, Vocab};
use crate::crf;
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::layers::{
    attention, attention_backward, bilstm_backward, bilstm_encode, dropout, dropout_backward,
    embed_backward, embed_sequence, emission_scores, projection_backward, AttentionParams,
    AttnCache, BiLstmCache, EmbedCache, EmbeddingTables, LstmParams, ProjectionParams,
};
use crate::numeric::{log_sum_exp, softmax, Matrix, ParamTensor, SeededRng, TensorSet};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_FOLDS: u64 = 4;
const STREAM_FOLD_SEED: u64 = 0x100;

/// The four model variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Bilstm,
    BilstmAttn,
    BilstmCrf,
    BilstmCrfAttn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Bilstm,
        Variant::BilstmAttn,
        Variant::BilstmCrf,
        Variant::BilstmCrfAttn,
    ];

    pub fn uses_crf(self) -> bool {
        matches!(self, Variant::BilstmCrf | Variant::BilstmCrfAttn)
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, Variant::BilstmAttn | Variant::BilstmCrfAttn)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bilstm => "bilstm",
            Variant::BilstmAttn => "bilstm-attn",
            Variant::BilstmCrf => "bilstm-crf",
            Variant::BilstmCrfAttn => "bilstm-crf-attn",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown variant {s:?}; expected one of bilstm, bilstm-attn, bilstm-crf, bilstm-crf-attn"
                ))
            })
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters and bookkeeping for one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub word_dim: usize,
    pub char_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
    pub min_count: usize,
    pub lowercase: bool,
    /// Pin structurally impossible BIO transitions (into `I` from `O` or from
    /// the start) at the forbidden score instead of letting the CRF learn
    /// them. Off by default; requires a CRF variant.
    pub constrain: bool,
}

impl ModelConfig {
    pub fn new(variant: Variant) -> Self {
        ModelConfig {
            variant,
            word_dim: 100,
            char_dim: 25,
            hidden: 100,
            dropout: 0.2,
            learning_rate: 0.01,
            clip_norm: 5.0,
            epochs: 200,
            folds: 5,
            seed: 1,
            min_count: 1,
            lowercase: false,
            constrain: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_dim == 0 || self.char_dim == 0 || self.hidden == 0 {
            return Err(Error::config(format!(
                "dimensions must be positive (word {}, char {}, hidden {})",
                self.word_dim, self.char_dim, self.hidden
            )));
        }
        if !self.dropout.is_finite() || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return Err(Error::config(format!(
                "clip norm must be positive, got {}",
                self.clip_norm
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("epoch count must be positive".to_owned()));
        }
        if self.min_count == 0 {
            return Err(Error::config("min_count must be positive".to_owned()));
        }
        if self.folds < 2 {
            return Err(Error::config(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.constrain && !self.variant.uses_crf() {
            return Err(Error::config(format!(
                "constrained transitions need a crf variant, got {}",
                self.variant
            )));
        }
        Ok(())
    }
}

/// Every parameter tensor of one model. Which optional parts exist is
/// determined exactly by the variant.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub embed: EmbeddingTables,
    pub lstm_fwd: LstmParams,
    pub lstm_bwd: LstmParams,
    pub attn: Option<AttentionParams>,
    pub proj: ProjectionParams,
    pub trans: Option<ParamTensor>,
}

impl ModelParams {
    /// Fresh parameters. Tensor construction order is fixed, so a given
    /// (config, vocab, seed) always yields identical values.
    pub fn new(config: &ModelConfig, vocab: &Vocab, rng: &mut SeededRng) -> Result<ModelParams> {
        config.validate()?;
        let token_dim = config.word_dim + config.char_dim;
        let feature_dim = 2 * config.hidden;
        Ok(ModelParams {
            embed: EmbeddingTables::new(vocab, config.word_dim, config.char_dim, rng),
            lstm_fwd: LstmParams::new("lstm.fwd", token_dim, config.hidden, rng),
            lstm_bwd: LstmParams::new("lstm.bwd", token_dim, config.hidden, rng),
            attn: config
                .variant
                .uses_attention()
                .then(|| AttentionParams::new(config.hidden, rng)),
            proj: ProjectionParams::new(vocab.tag_count(), feature_dim, rng),
            trans: config.variant.uses_crf().then(|| {
                let mut a = crf::new_transitions(vocab.tag_count());
                if config.constrain {
                    let i = BioTag::I.id();
                    a.set(BioTag::O.id(), i, crf::NEG_INF);
                    a.set(crf::start_state(vocab.tag_count()), i, crf::NEG_INF);
                }
                ParamTensor::new("crf.trans", a)
            }),
        })
    }

    pub fn tag_count(&self) -> usize {
        self.proj.tag_count()
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors_mut().into_iter().find(|t| t.name == name)
    }
}

impl TensorSet for ModelParams {
    fn tensors(&self) -> Vec<&ParamTensor> {
        let mut ts = self.embed.tensors();
        ts.extend(self.lstm_fwd.tensors());
        ts.extend(self.lstm_bwd.tensors());
        if let Some(a) = &self.attn {
            ts.extend(a.tensors());
        }
        ts.extend(self.proj.tensors());
        if let Some(t) = &self.trans {
            ts.push(t);
        }
        ts
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut ts = self.embed.tensors_mut();
        ts.extend(self.lstm_fwd.tensors_mut());
        ts.extend(self.lstm_bwd.tensors_mut());
        if let Some(a) = &mut self.attn {
            ts.extend(a.tensors_mut());
        }
        ts.extend(self.proj.tensors_mut());
        if let Some(t) = &mut self.trans {
            ts.push(t);
        }
        ts
    }
}

/// Whether a forward pass applies dropout (train) or is deterministic (eval).
pub enum Mode<'a> {
    Train(&'a mut SeededRng),
    Eval,
}

/// Intermediates of one forward pass, everything backward needs.
pub struct ForwardCache {
    embed: EmbedCache,
    embed_mask: Option<Matrix>,
    bilstm: BiLstmCache,
    feat_mask: Option<Matrix>,
    /// BiLSTM output after dropout: attention input, or projection input
    /// when the variant has no attention.
    encoder_out: Matrix,
    attn: Option<AttnCache>,
    attn_out: Option<Matrix>,
}

impl ForwardCache {
    /// Attention weights of this pass (rows are queries), when the variant
    /// has attention.
    pub fn attention_weights(&self) -> Option<&Matrix> {
        self.attn.as_ref().map(|c| &c.weights)
    }
}

/// Embeddings -> dropout -> BiLSTM -> dropout -> optional attention ->
/// projection. Returns the emission matrix and the cache for [`backward`].
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &Vocab,
    seq: &TokenSequence,
    mode: Mode<'_>,
) -> Result<(Matrix, ForwardCache)> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("sequence to tag"));
    }
    let (embedded, embed_cache) = embed_sequence(&params.embed, vocab, seq)?;

    let mut mode = mode;
    let (embedded, embed_mask) = match &mut mode {
        Mode::Train(rng) => dropout(&embedded, config.dropout, true, rng)?,
        Mode::Eval => (embedded, None),
    };

    let (bi_out, bilstm_cache) = bilstm_encode(&params.lstm_fwd, &params.lstm_bwd, &embedded)?;

    let (encoder_out, feat_mask) = match &mut mode {
        Mode::Train(rng) => dropout(&bi_out, config.dropout, true, rng)?,
        Mode::Eval => (bi_out, None),
    };

    let (attn_out, attn_cache) = match &params.attn {
        Some(ap) => {
            let (out, cache) = attention(ap, &encoder_out)?;
            (Some(out), Some(cache))
        }
        None => (None, None),
    };

    let feats = attn_out.as_ref().unwrap_or(&encoder_out);
    let emissions = emission_scores(&params.proj, feats)?;
    Ok((
        emissions,
        ForwardCache {
            embed: embed_cache,
            embed_mask,
            bilstm: bilstm_cache,
            feat_mask,
            encoder_out,
            attn: attn_cache,
            attn_out,
        },
    ))
}

/// Backpropagate an emission-matrix gradient through the whole network,
/// accumulating into every parameter's gradient buffer. The transition
/// matrix is not touched here; its gradient comes from [`loss_for_variant`].
pub fn backward(
    params: &mut ModelParams,
    cache: &ForwardCache,
    d_emissions: &Matrix,
) -> Result<()> {
    let feats = cache.attn_out.as_ref().unwrap_or(&cache.encoder_out);
    let d_feats = projection_backward(&mut params.proj, feats, d_emissions)?;

    let d_encoder = match (&mut params.attn, &cache.attn) {
        (Some(ap), Some(ac)) => attention_backward(ap, ac, &cache.encoder_out, &d_feats)?,
        (None, None) => d_feats,
        _ => {
            return Err(Error::config(
                "forward cache does not match this model's variant".to_owned(),
            ))
        }
    };

    let d_bi_out = dropout_backward(&d_encoder, cache.feat_mask.as_ref());
    let d_embedded = bilstm_backward(
        &mut params.lstm_fwd,
        &mut params.lstm_bwd,
        &cache.bilstm,
        &d_bi_out,
    )?;
    let d_embed = dropout_backward(&d_embedded, cache.embed_mask.as_ref());
    embed_backward(&mut params.embed, &cache.embed, &d_embed)
}

/// Loss and emission/transition gradients for one sequence.
pub struct LossGrads {
    pub loss: f64,
    pub d_emissions: Matrix,
    pub d_transitions: Option<Matrix>,
}

/// Sequence-level CRF negative log-likelihood for CRF variants; summed
/// per-token softmax cross-entropy otherwise.
pub fn loss_for_variant(
    variant: Variant,
    emissions: &Matrix,
    transitions: Option<&Matrix>,
    gold: &[usize],
) -> Result<LossGrads> {
    if variant.uses_crf() {
        let a = transitions.ok_or_else(|| {
            Error::config(format!("variant {variant} requires a transition matrix"))
        })?;
        let out = crf::nll_loss(emissions, a, gold)?;
        return Ok(LossGrads {
            loss: out.loss,
            d_emissions: out.d_emissions,
            d_transitions: Some(out.d_transitions),
        });
    }

    if gold.len() != emissions.rows() {
        return Err(Error::dimension(
            "loss_for_variant",
            format!("{} emission rows vs {} tags", emissions.rows(), gold.len()),
        ));
    }
    let t = emissions.cols();
    let mut loss = 0.0;
    let mut d_emissions = Matrix::zeros(emissions.rows(), t);
    for (i, &y) in gold.iter().enumerate() {
        if y >= t {
            return Err(Error::config(format!(
                "tag id {y} out of range for {t} tags"
            )));
        }
        let row = emissions.row(i);
        loss += log_sum_exp(row)? - row[y];
        let probs = softmax(row);
        let d_row = d_emissions.row_mut(i);
        d_row.copy_from_slice(&probs);
        d_row[y] -= 1.0;
    }
    Ok(LossGrads {
        loss,
        d_emissions,
        d_transitions: None,
    })
}

/// One SGD update over every tensor: if the global gradient L2 norm exceeds
/// `clip_norm`, scale all gradients down to it; subtract `lr * grad`; zero
/// the gradients. Returns the pre-clip norm.
pub fn sgd_step<S: TensorSet + ?Sized>(params: &mut S, lr: f64, clip_norm: f64) -> Result<f64> {
    if !clip_norm.is_finite() || clip_norm <= 0.0 {
        return Err(Error::config(format!(
            "clip norm must be positive, got {clip_norm}"
        )));
    }
    let mut squared = 0.0;
    for t in params.tensors() {
        if !t.grad.is_finite() {
            return Err(Error::Numeric {
                tensor: t.name.clone(),
                message: "non-finite gradient".to_owned(),
            });
        }
        squared += t.grad.data().iter().map(|g| g * g).sum::<f64>();
    }
    let norm = squared.sqrt();
    let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    for t in params.tensors_mut() {
        let (value, grad) = (&mut t.value, &t.grad);
        for (v, g) in value.data_mut().iter_mut().zip(grad.data()) {
            *v -= lr * scale * g;
        }
        t.zero_grad();
    }
    Ok(norm)
}

/// Decode the most likely tag sequence: Viterbi for CRF variants, per-token
/// argmax otherwise.
pub fn predict_tags(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &Vocab,
    seq: &TokenSequence,
) -> Result<Vec<BioTag>> {
    let (emissions, _) = forward(params, config, vocab, seq, Mode::Eval)?;
    let ids = match &params.trans {
        Some(trans) => crf::viterbi(&emissions, &trans.value)?.0,
        None => crf::argmax_tags(&emissions)?,
    };
    Ok(ids
        .into_iter()
        .map(|id| BioTag::from_id(id).expect("decoder emits valid tag ids"))
        .collect())
}

/// Tag a labeled corpus and score the predictions.
pub fn evaluate_model(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &Vocab,
    data: &[LabeledSequence],
) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(data.len());
    for seq in data {
        predictions.push(predict_tags(params, config, vocab, &seq.tokens)?);
    }
    eval::report_from_tags(data, &predictions)
}

/// One completed epoch: mean training loss and validation metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_f1: f64,
    pub val_label_accuracy: f64,
}

pub type TrainLog = Vec<EpochRecord>;

/// Result of [`train`]: the best-validation-F1 snapshot, the final-epoch
/// parameters, and the per-epoch log.
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation F1 (earliest
    /// such epoch on ties; final-epoch parameters when there is no
    /// validation data).
    pub params: ModelParams,
    pub final_params: ModelParams,
    /// 1-based epoch index of `params`.
    pub best_epoch: usize,
    pub log: TrainLog,
    pub vocab: Vocab,
}

/// Train one model. The vocabulary is built from `train_data` only; one
/// sequence per update (batch size 1); sequence order is reshuffled every
/// epoch from a seeded stream.
/// Index of the first `I` tag that no `B` or `I` precedes, if any.
fn orphan_i_position(tags: &[BioTag]) -> Option<usize> {
    (0..tags.len()).find(|&i| tags[i] == BioTag::I && (i == 0 || tags[i - 1] == BioTag::O))
}

pub fn train(
    config: &ModelConfig,
    train_data: &[LabeledSequence],
    val_data: &[LabeledSequence],
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::EmptyInput("training data"));
    }
    if config.constrain {
        // A forbidden transition observed in gold would put the pinned score
        // into the gold path and wreck the loss; refuse up front.
        for (idx, seq) in train_data.iter().enumerate() {
            if orphan_i_position(&seq.tags).is_some() {
                return Err(Error::config(format!(
                    "constrained transitions, but training sequence {idx} has an I tag with no preceding B or I"
                )));
            }
        }
    }
    let vocab = Vocab::build(train_data, config.min_count, config.lowercase)?;
    let root = SeededRng::new(config.seed);
    let mut init_rng = root.derive(STREAM_INIT);
    let mut shuffle_rng = root.derive(STREAM_SHUFFLE);
    let mut dropout_rng = root.derive(STREAM_DROPOUT);

    let mut params = ModelParams::new(config, &vocab, &mut init_rng)?;
    let gold_ids: Vec<Vec<usize>> = train_data
        .iter()
        .map(|s| s.tags.iter().map(|t| t.id()).collect())
        .collect();

    let mut log = TrainLog::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut total_loss = 0.0;
        for &i in &order {
            let (emissions, cache) = forward(
                &params,
                config,
                &vocab,
                &train_data[i].tokens,
                Mode::Train(&mut dropout_rng),
            )?;
            let grads = loss_for_variant(
                config.variant,
                &emissions,
                params.trans.as_ref().map(|t| &t.value),
                &gold_ids[i],
            )?;
            if !grads.loss.is_finite() {
                return Err(Error::Numeric {
                    tensor: "loss".to_owned(),
                    message: format!("non-finite loss at epoch {epoch}"),
                });
            }
            total_loss += grads.loss;
            backward(&mut params, &cache, &grads.d_emissions)?;
            if let Some(d_a) = &grads.d_transitions {
                let trans = params.trans.as_mut().expect("CRF variant has transitions");
                for (g, d) in trans.grad.data_mut().iter_mut().zip(d_a.data()) {
                    *g += d;
                }
            }
            sgd_step(&mut params, config.learning_rate, config.clip_norm)?;
        }

        let mean_loss = total_loss / train_data.len() as f64;
        let (val_f1, val_acc) = if val_data.is_empty() {
            (0.0, 0.0)
        } else {
            let report = evaluate_model(&params, config, &vocab, val_data)?;
            (report.f1, report.label_accuracy)
        };
        log.push(EpochRecord {
            epoch,
            mean_loss,
            val_f1,
            val_label_accuracy: val_acc,
        });
        if !val_data.is_empty() && best.as_ref().is_none_or(|(f1, ..)| val_f1 > *f1) {
            best = Some((val_f1, epoch, params.clone()));
        }
    }

    let (best_epoch, best_params) = match best {
        Some((_, epoch, p)) => (epoch, p),
        None => (config.epochs, params.clone()),
    };
    Ok(TrainOutcome {
        params: best_params,
        final_params: params,
        best_epoch,
        log,
        vocab,
    })
}

/// Per-fold reports plus their aggregate.
pub struct CvOutcome {
    pub fold_reports: Vec<EvalReport>,
    pub aggregate: EvalReport,
}

/// K-fold cross-validation. Each fold trains on the other k-1 parts and is
/// scored on its held-out part with that fold's best-epoch snapshot. Folds
/// are independent; `parallel_folds` > 1 runs them on that many threads.
/// Every fold derives its own seed from (config.seed, fold index).
pub fn cross_validate(
    config: &ModelConfig,
    data: &[LabeledSequence],
    parallel_folds: usize,
) -> Result<CvOutcome> {
    config.validate()?;
    let root = SeededRng::new(config.seed);
    let mut fold_rng = root.derive(STREAM_FOLDS);
    let folds = kfold(data, config.folds, &mut fold_rng)?;

    let jobs: Vec<(usize, ModelConfig, Vec<LabeledSequence>, Vec<LabeledSequence>)> = folds
        .into_iter()
        .enumerate()
        .map(|(i, (train_part, held_out))| {
            let mut cfg = config.clone();
            cfg.seed = root.derive(STREAM_FOLD_SEED + i as u64).seed();
            (i, cfg, train_part, held_out)
        })
        .collect();

    let run = |job: &(usize, ModelConfig, Vec<LabeledSequence>, Vec<LabeledSequence>)| {
        let (i, cfg, train_part, held_out) = job;
        let outcome = train(cfg, train_part, held_out)?;
        let report = evaluate_model(&outcome.params, cfg, &outcome.vocab, held_out)?;
        Ok::<(usize, EvalReport), Error>((*i, report))
    };

    let mut slots: Vec<Option<EvalReport>> = vec![None; jobs.len()];
    if parallel_folds <= 1 {
        for job in &jobs {
            let (i, report) = run(job)?;
            slots[i] = Some(report);
        }
    } else {
        let chunk = jobs.len().div_ceil(parallel_folds);
        let gathered: Result<Vec<Vec<(usize, EvalReport)>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(run).collect()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold worker panicked"))
                .collect()
        });
        for (i, report) in gathered?.into_iter().flatten() {
            slots[i] = Some(report);
        }
    }

    let fold_reports: Vec<EvalReport> = slots
        .into_iter()
        .map(|s| s.expect("every fold reports"))
        .collect();
    let aggregate = eval::aggregate(&fold_reports)?;
    Ok(CvOutcome {
        fold_reports,
        aggregate,
    })
}
