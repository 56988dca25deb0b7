//! The pun locator: a tagger that fuses contextual vectors with
//! sense-aware and pronunciation-aware attention.
//!
//! Per token, the model gathers the pooled encodings of every candidate
//! gloss and attends over them (hidden layer → query dot product → masked
//! softmax → weighted sum of projected vectors), does the same over the
//! token's phoneme embeddings, concatenates contextual ⊕ sense ⊕
//! pronunciation, and projects to two logits over the {O, P} tags.
//! Decoding picks the single token with the highest P probability.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{build_bio_labels, CorpusError, PunInstance};
use crate::encoder::{
    encode_gloss, encode_sequence, EncoderConfig, EncoderParams, LoadedEncoder, Vocab,
};
use crate::lexicon::{PronunciationTable, SenseInventory};
use crate::num::{
    load_checkpoint, save_checkpoint, softmax_row, Adam, GradCheckReport, NodeId, NumError,
    ParamId, ParamSet, Rng, Scalar, Tape, Tensor,
};

#[derive(Debug, Error)]
pub enum LocatorError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("instance `{0}` has no tokens to predict on")]
    EmptySentence(String),
    #[error("{got} sense vectors exceed the configured cap of {cap}; truncate upstream")]
    TooManySenses { got: usize, cap: usize },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Dimensions and switches for the locator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Maximum senses attended per word; senses beyond the cap are dropped.
    pub d_s: usize,
    /// Phoneme embedding width.
    pub d_p: usize,
    /// Attention hidden width (shared shape by both attention branches).
    pub d_attn: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub max_len: usize,
    pub seed: u64,
    /// When false the sense branch contributes a zero vector.
    pub use_sense: bool,
    /// When false the pronunciation branch contributes a zero vector.
    pub use_pron: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_s: 50,
            d_p: 16,
            d_attn: 16,
            d_model: 32,
            n_layers: 1,
            max_len: 64,
            seed: 7,
            use_sense: true,
            use_pron: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), LocatorError> {
        if self.d_s == 0 || self.d_p == 0 || self.d_attn == 0 {
            return Err(LocatorError::Config(
                "d_s, d_p and d_attn must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Copy of `config` with branches switched on or off. The disabled branch
/// keeps its parameters (they simply receive no gradient), so the
/// parameter count is unchanged.
pub fn ablate(config: &ModelConfig, use_sense: bool, use_pron: bool) -> ModelConfig {
    ModelConfig {
        use_sense,
        use_pron,
        ..*config
    }
}

/// One attention head: hidden layer, query vector, projection.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    hidden_w: ParamId,
    hidden_b: ParamId,
    query: ParamId,
    project_w: ParamId,
    project_b: ParamId,
    pub d_out: usize,
}

impl AttentionParams {
    pub fn init<S: Scalar>(
        params: &mut ParamSet<S>,
        rng: &mut Rng,
        prefix: &str,
        d_in: usize,
        d_attn: usize,
        d_out: usize,
    ) -> Self {
        use crate::encoder::glorot_init;
        AttentionParams {
            hidden_w: params.add(
                &format!("{prefix}.hidden_w"),
                glorot_init(rng, d_in, d_attn),
            ),
            hidden_b: params.add(&format!("{prefix}.hidden_b"), Tensor::zeros(&[d_attn])),
            query: params.add(&format!("{prefix}.query"), glorot_init(rng, d_attn, 1)),
            project_w: params.add(
                &format!("{prefix}.project_w"),
                glorot_init(rng, d_in, d_out),
            ),
            project_b: params.add(&format!("{prefix}.project_b"), Tensor::zeros(&[d_out])),
            d_out,
        }
    }

    pub fn load<S: Scalar>(&self, tape: &mut Tape<S>, params: &ParamSet<S>) -> LoadedAttention {
        LoadedAttention {
            hidden_w: tape.param(params, self.hidden_w),
            hidden_b: tape.param(params, self.hidden_b),
            query: tape.param(params, self.query),
            project_w: tape.param(params, self.project_w),
            project_b: tape.param(params, self.project_b),
            d_out: self.d_out,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedAttention {
    hidden_w: NodeId,
    hidden_b: NodeId,
    query: NodeId,
    project_w: NodeId,
    project_b: NodeId,
    pub d_out: usize,
}

/// Attention over `stacked` (`k × d_in`): score each row through the tanh
/// hidden layer and the query vector, weight by masked softmax over the
/// rows where `mask` is true, and return the weighted sum of the projected
/// rows (`1 × d_out`). Masked rows contribute exactly zero.
pub fn attend<S: Scalar>(
    tape: &mut Tape<S>,
    att: &LoadedAttention,
    stacked: NodeId,
    mask: &[bool],
) -> Result<NodeId, NumError> {
    let hidden = tape.linear(stacked, att.hidden_w, att.hidden_b)?;
    let hidden = tape.tanh(hidden);
    let scores = tape.matmul(hidden, att.query)?; // k × 1
    let scores = tape.transpose(scores); // 1 × k
    let alpha = tape.masked_softmax(scores, mask)?;
    let projected = tape.linear(stacked, att.project_w, att.project_b)?; // k × d_out
    tape.matmul(alpha, projected)
}

/// Attention over up to `d_s` sense vectors (each `1 × d_model`). No
/// senses means a zero vector; more than `d_s` is a contract error since
/// truncation belongs to the lookup.
pub fn sense_attention<S: Scalar>(
    tape: &mut Tape<S>,
    att: &LoadedAttention,
    sense_vecs: &[NodeId],
    d_s: usize,
) -> Result<NodeId, LocatorError> {
    if sense_vecs.len() > d_s {
        return Err(LocatorError::TooManySenses {
            got: sense_vecs.len(),
            cap: d_s,
        });
    }
    if sense_vecs.is_empty() {
        return Ok(tape.zeros(&[1, att.d_out]));
    }
    let stacked = tape.concat_rows(sense_vecs)?;
    let mask = vec![true; sense_vecs.len()];
    Ok(attend(tape, att, stacked, &mask)?)
}

/// Attention over a word's phoneme embeddings; no phonemes means a zero
/// vector. Phonemes carry no position signal, so the result is invariant
/// to their order.
pub fn pron_attention<S: Scalar>(
    tape: &mut Tape<S>,
    att: &LoadedAttention,
    phoneme_table: NodeId,
    phoneme_ids: &[usize],
) -> Result<NodeId, NumError> {
    if phoneme_ids.is_empty() {
        return Ok(tape.zeros(&[1, att.d_out]));
    }
    let embedded = tape.embedding(phoneme_table, phoneme_ids)?;
    let mask = vec![true; phoneme_ids.len()];
    attend(tape, att, embedded, &mask)
}

/// Handles to every locator parameter.
#[derive(Debug, Clone)]
pub struct DannParams {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    phoneme_emb: ParamId,
    pub sense_attn: AttentionParams,
    pub pron_attn: AttentionParams,
    out_w: ParamId,
    out_b: ParamId,
}

/// The locator model: parameters plus the vocabularies they are indexed by.
pub struct Dann<S> {
    pub params: ParamSet<S>,
    pub meta: DannParams,
    pub vocab: Vocab,
    pub phoneme_vocab: Vec<String>,
}

/// Lookup tables the locator consumes.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub inventory: &'a SenseInventory,
    pub pronunciations: &'a PronunciationTable,
}

pub struct LoadedDann {
    pub encoder: LoadedEncoder,
    phoneme_emb: NodeId,
    sense_attn: LoadedAttention,
    pron_attn: LoadedAttention,
    out_w: NodeId,
    out_b: NodeId,
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
    pub truncated_sequences: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 50,
            lr: 0.01,
            batch_size: 8,
        }
    }
}

impl<S: Scalar> Dann<S> {
    /// Fresh model from a config, a vocab, and the phoneme vocabulary of
    /// the pronunciation table it will be used with.
    pub fn new(
        config: ModelConfig,
        vocab: Vocab,
        phoneme_vocab: Vec<String>,
    ) -> Result<Self, LocatorError> {
        config.validate()?;
        let enc_config = EncoderConfig {
            d_model: config.d_model,
            n_layers: config.n_layers,
            max_len: config.max_len,
            vocab_size: vocab.len(),
        };
        enc_config.validate()?;
        let mut rng = Rng::new(config.seed);
        let mut params = ParamSet::new();
        let encoder = EncoderParams::init(&mut params, enc_config, &mut rng, "encoder");
        let phoneme_emb = params.add(
            "phoneme_emb",
            crate::encoder::embedding_init(&mut rng, phoneme_vocab.len(), config.d_p),
        );
        let sense_attn = AttentionParams::init(
            &mut params,
            &mut rng,
            "sense_attn",
            config.d_model,
            config.d_attn,
            config.d_model,
        );
        let pron_attn = AttentionParams::init(
            &mut params,
            &mut rng,
            "pron_attn",
            config.d_p,
            config.d_attn,
            config.d_p,
        );
        let fused = config.d_model + config.d_model + config.d_p;
        let out_w = params.add("output.w", crate::encoder::glorot_init(&mut rng, fused, 2));
        let out_b = params.add("output.b", Tensor::zeros(&[2]));
        Ok(Dann {
            params,
            meta: DannParams {
                config,
                encoder,
                phoneme_emb,
                sense_attn,
                pron_attn,
                out_w,
                out_b,
            },
            vocab,
            phoneme_vocab,
        })
    }

    /// Vocabulary over training instances plus the glosses their tokens
    /// can reach (capped at `d_s`), never over test text.
    pub fn build_vocab(
        instances: &[PunInstance],
        inventory: &SenseInventory,
        d_s: usize,
        min_count: usize,
    ) -> Vocab {
        let mut text: Vec<String> = Vec::new();
        let mut surfaces: BTreeSet<String> = BTreeSet::new();
        for inst in instances {
            for surface in inst.surfaces() {
                text.push(surface.to_lowercase());
                surfaces.insert(surface.to_lowercase());
            }
        }
        for surface in &surfaces {
            let (senses, _) = inventory.lookup_senses(surface, d_s);
            for sense in senses {
                for tok in sense.gloss.split_whitespace() {
                    text.push(tok.to_lowercase());
                }
            }
        }
        Vocab::build(text.iter().map(String::as_str), min_count)
    }

    /// Deterministic training run; returns the model and its loss curve.
    pub fn train(
        instances: &[PunInstance],
        res: Resources<'_>,
        config: ModelConfig,
        options: TrainOptions,
    ) -> Result<(Self, TrainLog), LocatorError> {
        let vocab = Self::build_vocab(instances, res.inventory, config.d_s, 1);
        let phoneme_vocab = res.pronunciations.phoneme_vocab().to_vec();
        let mut model = Dann::new(config, vocab, phoneme_vocab)?;
        let log = model.fit(instances, res, options)?;
        Ok((model, log))
    }

    /// Continue training the existing parameters.
    pub fn fit(
        &mut self,
        instances: &[PunInstance],
        res: Resources<'_>,
        options: TrainOptions,
    ) -> Result<TrainLog, LocatorError> {
        // Labels are validated up front so a bad instance fails fast.
        for inst in instances {
            build_bio_labels(inst)?;
        }
        let mut log = TrainLog::default();
        let mut rng = Rng::new(self.meta.config.seed ^ 0x5EED_5EED);
        let mut adam = Adam::new(options.lr);
        let batch = options.batch_size.max(1);
        let mut order: Vec<usize> = (0..instances.len()).collect();
        for epoch in 0..options.epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for (step, chunk) in order.chunks(batch).enumerate() {
                let refs: Vec<&PunInstance> = chunk.iter().map(|&i| &instances[i]).collect();
                self.params.zero_grads();
                let (mut tape, loss, truncated) =
                    batch_loss_graph(&self.params, &self.meta, &self.vocab, res, &refs)?;
                let loss_value = tape.value(loss).item().as_f64();
                if !loss_value.is_finite() {
                    return Err(LocatorError::NonFiniteLoss { epoch, step });
                }
                log.truncated_sequences += truncated;
                tape.backward(loss, &mut self.params)?;
                adam.step(&mut self.params)?;
                epoch_loss += loss_value;
                batches += 1;
            }
            log.epoch_losses.push(epoch_loss / batches.max(1) as f64);
        }
        Ok(log)
    }

    /// Mean per-token tagging loss over `instances`, as a graph.
    pub fn loss_graph(
        &self,
        res: Resources<'_>,
        instances: &[&PunInstance],
    ) -> Result<(Tape<S>, NodeId), LocatorError> {
        let (tape, loss, _) =
            batch_loss_graph(&self.params, &self.meta, &self.vocab, res, instances)?;
        Ok((tape, loss))
    }

    /// The token id with the highest P probability; ties go to the
    /// earliest token. Always one of the instance's token ids.
    pub fn predict_pun(
        &self,
        res: Resources<'_>,
        instance: &PunInstance,
    ) -> Result<String, LocatorError> {
        if instance.tokens.is_empty() {
            return Err(LocatorError::EmptySentence(instance.text_id.clone()));
        }
        let mut tape = Tape::new();
        let loaded = load_dann(&mut tape, &self.params, &self.meta);
        let (logits, _) = instance_logits(
            &mut tape,
            &loaded,
            &self.meta.config,
            &self.vocab,
            res,
            instance,
        )?;
        let values = tape.value(logits);
        let (rows, _) = values.dims2();
        let mut best = (0usize, f64::NEG_INFINITY);
        for r in 0..rows {
            let probs = softmax_row(values.row(r));
            let p = probs[1].as_f64();
            if p > best.1 {
                best = (r, p);
            }
        }
        Ok(instance.tokens[best.0].0.clone())
    }

    /// Finite-difference check of the whole locator loss on `instances`.
    pub fn grad_check(
        &mut self,
        res: Resources<'_>,
        instances: &[&PunInstance],
        epsilon: f64,
    ) -> Result<GradCheckReport, LocatorError> {
        self.grad_check_with_fault(res, instances, epsilon, 0.0)
    }

    #[doc(hidden)]
    pub fn grad_check_with_fault(
        &mut self,
        res: Resources<'_>,
        instances: &[&PunInstance],
        epsilon: f64,
        fault: f64,
    ) -> Result<GradCheckReport, LocatorError> {
        let meta = self.meta.clone();
        let vocab = self.vocab.clone();
        let mut params = std::mem::take(&mut self.params);
        let result = crate::num::grad_check_faulted(
            &mut params,
            epsilon,
            |ps| {
                batch_loss_graph(ps, &meta, &vocab, res, instances)
                    .map(|(tape, loss, _)| (tape, loss))
                    .map_err(|e| match e {
                        LocatorError::Num(n) => n,
                        other => NumError::Format(other.to_string()),
                    })
            },
            fault,
        );
        self.params = params;
        Ok(result?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LocatorError> {
        let config = serde_json::json!({
            "kind": "locator",
            "model": self.meta.config,
            "vocab": self.vocab.to_json(),
            "phoneme_vocab": self.phoneme_vocab,
        });
        save_checkpoint(path, &self.params, self.meta.config.seed, &config)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LocatorError> {
        let (params, header) = load_checkpoint::<S>(path)?;
        let config = &header.config;
        if config.get("kind").and_then(|k| k.as_str()) != Some("locator") {
            return Err(LocatorError::Checkpoint(
                "checkpoint is not a locator model".into(),
            ));
        }
        let model_config: ModelConfig = serde_json::from_value(
            config
                .get("model")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
        )
        .map_err(|e| LocatorError::Checkpoint(format!("bad model config: {e}")))?;
        let vocab = Vocab::from_json(config.get("vocab").unwrap_or(&serde_json::Value::Null))
            .map_err(|e| LocatorError::Checkpoint(format!("bad vocab: {e}")))?;
        let phoneme_vocab: Vec<String> = serde_json::from_value(
            config
                .get("phoneme_vocab")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
        )
        .map_err(|e| LocatorError::Checkpoint(format!("bad phoneme vocab: {e}")))?;

        // Rebuild the meta handles by re-initializing an empty model with
        // the same shapes, then adopt the loaded values.
        let mut model = Dann::new(model_config, vocab, phoneme_vocab)?;
        if model.params.len() != params.len() {
            return Err(LocatorError::Checkpoint(format!(
                "parameter count mismatch: checkpoint has {}, model expects {}",
                params.len(),
                model.params.len()
            )));
        }
        for (dst, src) in model.params.iter_mut().zip(params.iter()) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(LocatorError::Checkpoint(format!(
                    "parameter mismatch: `{}` {:?} vs `{}` {:?}",
                    dst.name,
                    dst.value.shape(),
                    src.name,
                    src.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(model)
    }
}

pub fn load_dann<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParamSet<S>,
    meta: &DannParams,
) -> LoadedDann {
    LoadedDann {
        encoder: meta.encoder.load(tape, params),
        phoneme_emb: tape.param(params, meta.phoneme_emb),
        sense_attn: meta.sense_attn.load(tape, params),
        pron_attn: meta.pron_attn.load(tape, params),
        out_w: tape.param(params, meta.out_w),
        out_b: tape.param(params, meta.out_b),
    }
}

/// Contextual ⊕ sense ⊕ pronunciation, then the two-way projection.
/// The concatenation order is fixed: context, sense, pronunciation.
pub fn fuse_and_project<S: Scalar>(
    tape: &mut Tape<S>,
    loaded: &LoadedDann,
    context: NodeId,
    sense: NodeId,
    pron: NodeId,
) -> Result<NodeId, NumError> {
    let fused = tape.concat_cols(&[context, sense, pron])?;
    tape.linear(fused, loaded.out_w, loaded.out_b)
}

/// Logits (`n_eff × 2`) for one instance, where `n_eff` is the token count
/// clamped to what fits under `max_len` after the CLS slot. Returns the
/// number of truncated sequences encountered (sentence plus glosses).
pub fn instance_logits<S: Scalar>(
    tape: &mut Tape<S>,
    loaded: &LoadedDann,
    config: &ModelConfig,
    vocab: &Vocab,
    res: Resources<'_>,
    instance: &PunInstance,
) -> Result<(NodeId, u64), LocatorError> {
    let mut truncated = 0u64;
    let mut ids: Vec<usize> = Vec::with_capacity(instance.tokens.len() + 2);
    ids.push(Vocab::CLS);
    ids.extend(instance.surfaces().map(|s| vocab.id(s)));
    ids.push(Vocab::SEP);
    let encoded = encode_sequence(tape, &loaded.encoder, &ids)?;
    if encoded.truncated {
        truncated += 1;
    }
    let n_eff = instance.tokens.len().min(config.max_len - 1);

    let mut token_logits = Vec::with_capacity(n_eff);
    for (i, surface) in instance.surfaces().take(n_eff).enumerate() {
        let context = tape.slice_rows(encoded.hidden, i + 1, 1)?;

        let sense = if config.use_sense {
            let (senses, _) = res.inventory.lookup_senses(surface, config.d_s);
            let mut vecs = Vec::with_capacity(senses.len());
            for sense in senses {
                let gloss_ids: Vec<usize> = sense
                    .gloss
                    .split_whitespace()
                    .map(|t| vocab.id(t))
                    .collect();
                let (pooled, was_truncated) = encode_gloss(tape, &loaded.encoder, &gloss_ids)?;
                if was_truncated {
                    truncated += 1;
                }
                vecs.push(pooled);
            }
            sense_attention(tape, &loaded.sense_attn, &vecs, config.d_s)?
        } else {
            tape.zeros(&[1, loaded.sense_attn.d_out])
        };

        let pron = if config.use_pron {
            let phoneme_ids = res.pronunciations.lookup_phoneme_ids(surface);
            pron_attention(tape, &loaded.pron_attn, loaded.phoneme_emb, &phoneme_ids)?
        } else {
            tape.zeros(&[1, loaded.pron_attn.d_out])
        };

        token_logits.push(fuse_and_project(tape, loaded, context, sense, pron)?);
    }
    let logits = tape.concat_rows(&token_logits)?;
    Ok((logits, truncated))
}

/// Mean per-token cross-entropy over a batch of instances.
pub fn batch_loss_graph<S: Scalar>(
    params: &ParamSet<S>,
    meta: &DannParams,
    vocab: &Vocab,
    res: Resources<'_>,
    instances: &[&PunInstance],
) -> Result<(Tape<S>, NodeId, u64), LocatorError> {
    let mut tape = Tape::new();
    let loaded = load_dann(&mut tape, params, meta);
    let mut all_logits = Vec::with_capacity(instances.len());
    let mut labels: Vec<usize> = Vec::new();
    let mut truncated = 0u64;
    for inst in instances {
        if inst.tokens.is_empty() {
            return Err(LocatorError::EmptySentence(inst.text_id.clone()));
        }
        let bio = build_bio_labels(inst)?;
        let n_eff = inst.tokens.len().min(meta.config.max_len - 1);
        let (logits, t) = instance_logits(&mut tape, &loaded, &meta.config, vocab, res, inst)?;
        truncated += t;
        all_logits.push(logits);
        labels.extend(bio.iter().take(n_eff).map(|l| l.class_index()));
    }
    let stacked = tape.concat_rows(&all_logits)?;
    let loss = tape.cross_entropy(stacked, &labels)?;
    Ok((tape, loss, truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{parse_cmudict, parse_sense_inventory};
    use crate::num::linear;

    fn empty_resources() -> (SenseInventory, PronunciationTable) {
        (
            parse_sense_inventory("".as_bytes()).unwrap(),
            parse_cmudict(";;; empty\n".as_bytes()).unwrap(),
        )
    }

    fn attention_fixture(d_in: usize) -> (ParamSet<f64>, AttentionParams) {
        let mut params = ParamSet::new();
        let mut rng = Rng::new(11);
        let att = AttentionParams::init(&mut params, &mut rng, "att", d_in, 3, d_in);
        (params, att)
    }

    fn row_tensor(data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[1, data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn single_sense_is_its_projection_exactly() {
        let (params, att) = attention_fixture(4);
        let mut tape = Tape::new();
        let loaded = att.load(&mut tape, &params);
        let s1 = tape.input(row_tensor(&[0.3, -0.7, 1.1, 0.2]));
        let out = sense_attention(&mut tape, &loaded, &[s1], 50).unwrap();
        let expected = linear(
            &row_tensor(&[0.3, -0.7, 1.1, 0.2]),
            &params.by_name("att.project_w").unwrap().value,
            &params.by_name("att.project_b").unwrap().value,
        )
        .unwrap();
        assert_eq!(tape.value(out).data(), expected.data());
    }

    #[test]
    fn two_identical_senses_still_give_the_projection() {
        let (params, att) = attention_fixture(4);
        let mut tape = Tape::new();
        let loaded = att.load(&mut tape, &params);
        let v = [0.5, 0.25, -0.4, 0.9];
        let s1 = tape.input(row_tensor(&v));
        let s2 = tape.input(row_tensor(&v));
        let out = sense_attention(&mut tape, &loaded, &[s1, s2], 50).unwrap();
        let expected = linear(
            &row_tensor(&v),
            &params.by_name("att.project_w").unwrap().value,
            &params.by_name("att.project_b").unwrap().value,
        )
        .unwrap();
        for (o, e) in tape.value(out).data().iter().zip(expected.data()) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    /// Step-by-step oracle: hidden tanh layer, query dot, softmax,
    /// projected weighted sum, all in plain loops.
    fn attention_oracle(params: &ParamSet<f64>, prefix: &str, rows: &[Vec<f64>]) -> Vec<f64> {
        let hw = &params.by_name(&format!("{prefix}.hidden_w")).unwrap().value;
        let hb = &params.by_name(&format!("{prefix}.hidden_b")).unwrap().value;
        let q = &params.by_name(&format!("{prefix}.query")).unwrap().value;
        let pw = &params
            .by_name(&format!("{prefix}.project_w"))
            .unwrap()
            .value;
        let pb = &params
            .by_name(&format!("{prefix}.project_b"))
            .unwrap()
            .value;
        let (d_in, d_attn) = hw.dims2();
        let (_, d_out) = pw.dims2();
        let mut scores = Vec::new();
        for row in rows {
            let mut dot = 0.0;
            for a in 0..d_attn {
                let mut h = hb.data()[a];
                for i in 0..d_in {
                    h += row[i] * hw.at(i, a);
                }
                dot += h.tanh() * q.at(a, 0);
            }
            scores.push(dot);
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let alphas: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut out = vec![0.0; d_out];
        for (alpha, row) in alphas.iter().zip(rows) {
            for o in 0..d_out {
                let mut proj = pb.data()[o];
                for i in 0..d_in {
                    proj += row[i] * pw.at(i, o);
                }
                out[o] += alpha * proj;
            }
        }
        out
    }

    #[test]
    fn three_senses_match_the_step_by_step_oracle() {
        let (params, att) = attention_fixture(4);
        let rows = vec![
            vec![0.3, -0.7, 1.1, 0.2],
            vec![-0.5, 0.8, 0.1, -1.2],
            vec![0.9, 0.4, -0.3, 0.6],
        ];
        let mut tape = Tape::new();
        let loaded = att.load(&mut tape, &params);
        let nodes: Vec<NodeId> = rows.iter().map(|r| tape.input(row_tensor(r))).collect();
        let out = sense_attention(&mut tape, &loaded, &nodes, 50).unwrap();
        let want = attention_oracle(&params, "att", &rows);
        for (o, w) in tape.value(out).data().iter().zip(&want) {
            assert!((o - w).abs() <= 1e-12, "{o} vs {w}");
        }
    }

    #[test]
    fn sense_attention_is_permutation_invariant() {
        let (params, att) = attention_fixture(4);
        let rows = [
            vec![0.3, -0.7, 1.1, 0.2],
            vec![-0.5, 0.8, 0.1, -1.2],
            vec![0.9, 0.4, -0.3, 0.6],
        ];
        let mut tape = Tape::new();
        let loaded = att.load(&mut tape, &params);
        let fwd: Vec<NodeId> = rows.iter().map(|r| tape.input(row_tensor(r))).collect();
        let out_fwd = sense_attention(&mut tape, &loaded, &fwd, 50).unwrap();
        let rev: Vec<NodeId> = rows
            .iter()
            .rev()
            .map(|r| tape.input(row_tensor(r)))
            .collect();
        let out_rev = sense_attention(&mut tape, &loaded, &rev, 50).unwrap();
        for (a, b) in tape
            .value(out_fwd)
            .data()
            .iter()
            .zip(tape.value(out_rev).data())
        {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_senses_is_a_zero_vector_and_over_cap_errors() {
        let (params, att) = attention_fixture(4);
        let mut tape = Tape::new();
        let loaded = att.load(&mut tape, &params);
        let out = sense_attention(&mut tape, &loaded, &[], 50).unwrap();
        assert!(tape.value(out).data().iter().all(|&x| x == 0.0));

        let nodes: Vec<NodeId> = (0..3)
            .map(|_| tape.input(row_tensor(&[0.0, 0.0, 0.0, 0.0])))
            .collect();
        let err = sense_attention(&mut tape, &loaded, &nodes, 2).unwrap_err();
        assert!(matches!(
            err,
            LocatorError::TooManySenses { got: 3, cap: 2 }
        ));
    }

    #[test]
    fn pron_attention_mirrors_the_sense_path() {
        let mut params = ParamSet::new();
        let mut rng = Rng::new(13);
        let att = AttentionParams::init(&mut params, &mut rng, "pron", 4, 3, 4);
        let table = params.add("u", crate::encoder::embedding_init(&mut rng, 6, 4));

        let mut tape = Tape::new();
        let loaded = att.load(&mut tape, &params);
        let table_node = tape.param(&params, table);

        // Empty phoneme list → zero vector.
        let empty = pron_attention(&mut tape, &loaded, table_node, &[]).unwrap();
        assert!(tape.value(empty).data().iter().all(|&x| x == 0.0));

        // Single phoneme → its projected embedding.
        let single = pron_attention(&mut tape, &loaded, table_node, &[2]).unwrap();
        let row: Vec<f64> = params.by_name("u").unwrap().value.row(2).to_vec();
        let expected = linear(
            &row_tensor(&row),
            &params.by_name("pron.project_w").unwrap().value,
            &params.by_name("pron.project_b").unwrap().value,
        )
        .unwrap();
        assert_eq!(tape.value(single).data(), expected.data());

        // Multi-phoneme case matches the same step-by-step oracle.
        let ids = [3usize, 1, 4];
        let out = pron_attention(&mut tape, &loaded, table_node, &ids).unwrap();
        let rows: Vec<Vec<f64>> = ids
            .iter()
            .map(|&i| params.by_name("u").unwrap().value.row(i).to_vec())
            .collect();
        let want = attention_oracle(&params, "pron", &rows);
        for (o, w) in tape.value(out).data().iter().zip(&want) {
            assert!((o - w).abs() <= 1e-12);
        }
    }

    fn instance(words: &[&str], gold_idx: usize) -> PunInstance {
        PunInstance {
            text_id: "syn_0".into(),
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| (format!("syn_0_{}", i + 1), w.to_string()))
                .collect(),
            gold_pun_token: Some(format!("syn_0_{}", gold_idx + 1)),
            gold_sense_keys: None,
        }
    }

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            d_s: 4,
            d_p: 4,
            d_attn: 4,
            d_model: 8,
            n_layers: 1,
            max_len: 16,
            seed: 3,
            use_sense: true,
            use_pron: true,
        }
    }

    #[test]
    fn fusion_with_zeroed_projection_gives_zero_logits() {
        let (inv, pron) = empty_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let inst = instance(&["a", "b"], 0);
        let vocab = Dann::<f64>::build_vocab(std::slice::from_ref(&inst), &inv, 4, 1);
        let mut model: Dann<f64> = Dann::new(tiny_config(), vocab, vec![]).unwrap();
        // Zero the fusion projection; all logits must become exactly zero.
        for coord in model.params.get_mut(model.meta.out_w).value.data_mut() {
            *coord = 0.0;
        }
        let mut tape = Tape::new();
        let loaded = load_dann(&mut tape, &model.params, &model.meta);
        let (logits, _) = instance_logits(
            &mut tape,
            &loaded,
            &model.meta.config,
            &model.vocab,
            res,
            &inst,
        )
        .unwrap();
        assert!(tape.value(logits).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zeroing_sense_and_pron_blocks_leaves_context_only_logits() {
        // With the sense and pronunciation weight blocks zeroed, logits
        // must equal the context block alone, which the ablated forward
        // also produces.
        let (inv, pron) = empty_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let inst = instance(&["a", "b", "c"], 1);
        let vocab = Dann::<f64>::build_vocab(std::slice::from_ref(&inst), &inv, 4, 1);
        let config = tiny_config();
        let model: Dann<f64> = Dann::new(config, vocab, vec![]).unwrap();

        let mut tape = Tape::new();
        let loaded = load_dann(&mut tape, &model.params, &model.meta);
        let (full, _) = instance_logits(
            &mut tape,
            &loaded,
            &model.meta.config,
            &model.vocab,
            res,
            &inst,
        )
        .unwrap();

        let ablated_config = ablate(&config, false, false);
        let (ablated, _) = instance_logits(
            &mut tape,
            &loaded,
            &ablated_config,
            &model.vocab,
            res,
            &inst,
        )
        .unwrap();
        // Inventory and pronunciations are empty, so both branches are
        // zero vectors either way and the two runs agree exactly.
        assert_eq!(tape.value(full).data(), tape.value(ablated).data());
    }

    #[test]
    fn ablate_flags_toggle_and_preserve_param_count() {
        let config = tiny_config();
        let off = ablate(&config, false, true);
        assert!(!off.use_sense && off.use_pron);
        let same = ablate(&config, true, true);
        assert_eq!(same, config);
        let (inv, _) = empty_resources();
        let vocab = Vocab::build(["x"], 1);
        let full: Dann<f64> = Dann::new(config, vocab.clone(), vec!["A".into()]).unwrap();
        let ablated: Dann<f64> =
            Dann::new(ablate(&config, false, false), vocab, vec!["A".into()]).unwrap();
        assert_eq!(full.params.len(), ablated.params.len());
        let _ = inv;
    }

    fn gloss_resources() -> (SenseInventory, PronunciationTable) {
        let tsv = "\
mark\tmark%1::\tthe zing gloss one
mark\tmark%2::\tplain words here
stone\tstone%1::\tcompletely plain gloss
";
        let cmu = "MARK  M AA1 R K\nSTONE  S T OW1 N\n";
        (
            parse_sense_inventory(tsv.as_bytes()).unwrap(),
            parse_cmudict(cmu.as_bytes()).unwrap(),
        )
    }

    #[test]
    fn tokens_without_senses_or_phonemes_still_get_finite_logits() {
        let (inv, pron) = gloss_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let inst = instance(&["qqq", "mark"], 1); // "qqq" has neither
        let vocab = Dann::<f64>::build_vocab(std::slice::from_ref(&inst), &inv, 4, 1);
        let model: Dann<f64> =
            Dann::new(tiny_config(), vocab, pron.phoneme_vocab().to_vec()).unwrap();
        let mut tape = Tape::new();
        let loaded = load_dann(&mut tape, &model.params, &model.meta);
        let (logits, _) = instance_logits(
            &mut tape,
            &loaded,
            &model.meta.config,
            &model.vocab,
            res,
            &inst,
        )
        .unwrap();
        assert_eq!(tape.value(logits).dims2(), (2, 2));
        assert!(tape.value(logits).data().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn full_locator_gradient_check_on_a_two_sentence_batch() {
        let (inv, pron) = gloss_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let a = instance(&["mark", "stone"], 0);
        let b = instance(&["stone", "mark", "qqq"], 1);
        let instances = vec![a, b];
        let vocab = Dann::<f64>::build_vocab(&instances, &inv, 4, 1);
        let mut model: Dann<f64> =
            Dann::new(tiny_config(), vocab, pron.phoneme_vocab().to_vec()).unwrap();
        let refs: Vec<&PunInstance> = instances.iter().collect();
        let report = model.grad_check(res, &refs, 1e-5).unwrap();
        assert!(report.max_rel_err <= 1e-4, "{:e}", report.max_rel_err);
    }

    #[test]
    fn gradient_check_still_passes_after_five_training_steps() {
        let (inv, pron) = gloss_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let instances = vec![
            instance(&["mark", "stone"], 0),
            instance(&["stone", "mark"], 1),
        ];
        let vocab = Dann::<f64>::build_vocab(&instances, &inv, 4, 1);
        let mut model: Dann<f64> =
            Dann::new(tiny_config(), vocab, pron.phoneme_vocab().to_vec()).unwrap();
        model
            .fit(
                &instances,
                res,
                TrainOptions {
                    epochs: 5,
                    lr: 0.01,
                    batch_size: 2,
                },
            )
            .unwrap();
        let refs: Vec<&PunInstance> = instances.iter().collect();
        let report = model.grad_check(res, &refs, 1e-5).unwrap();
        assert!(report.max_rel_err <= 1e-4, "{:e}", report.max_rel_err);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (inv, pron) = gloss_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let instances = vec![instance(&["mark", "stone"], 0)];
        let vocab = Dann::<f64>::build_vocab(&instances, &inv, 4, 1);
        let mut model: Dann<f64> =
            Dann::new(tiny_config(), vocab, pron.phoneme_vocab().to_vec()).unwrap();
        let before: Vec<Vec<f64>> = model
            .params
            .iter()
            .map(|p| p.value.data().to_vec())
            .collect();
        model
            .fit(
                &instances,
                res,
                TrainOptions {
                    epochs: 3,
                    lr: 0.0,
                    batch_size: 1,
                },
            )
            .unwrap();
        let after: Vec<Vec<f64>> = model
            .params
            .iter()
            .map(|p| p.value.data().to_vec())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn eight_sentence_synthetic_run_reduces_loss() {
        let (inv, pron) = gloss_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let mut instances = Vec::new();
        for i in 0..8 {
            let mut inst = if i % 2 == 0 {
                instance(&["mark", "stone", "stone"], 0)
            } else {
                instance(&["stone", "stone", "mark"], 2)
            };
            inst.text_id = format!("syn_{i}");
            inst.tokens = inst
                .tokens
                .iter()
                .enumerate()
                .map(|(t, (_, s))| (format!("syn_{i}_{}", t + 1), s.clone()))
                .collect();
            inst.gold_pun_token = Some(format!("syn_{i}_{}", if i % 2 == 0 { 1 } else { 3 }));
            instances.push(inst);
        }
        let (model, log) = Dann::<f64>::train(
            &instances,
            res,
            tiny_config(),
            TrainOptions {
                epochs: 30,
                lr: 0.01,
                batch_size: 4,
            },
        )
        .unwrap();
        assert!(log.epoch_losses.len() == 30);
        assert!(
            log.epoch_losses[29] < log.epoch_losses[0],
            "loss did not decrease: {:?}",
            log.epoch_losses
        );
        // The rule is "mark is the pun"; the trained model should find it.
        let pred = model.predict_pun(res, &instances[0]).unwrap();
        assert_eq!(pred, "syn_0_1");
    }

    #[test]
    fn predict_takes_argmax_with_earliest_tie_break() {
        let (inv, pron) = empty_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        // An untrained model with identical tokens gives identical P
        // probabilities; the earliest token must win.
        let inst = instance(&["same", "same", "same"], 0);
        let vocab = Dann::<f64>::build_vocab(std::slice::from_ref(&inst), &inv, 4, 1);
        let model: Dann<f64> = Dann::new(tiny_config(), vocab, vec![]).unwrap();
        let pred = model.predict_pun(res, &inst).unwrap();
        assert_eq!(pred, "syn_0_1");

        let empty = PunInstance {
            text_id: "syn_9".into(),
            tokens: vec![],
            gold_pun_token: None,
            gold_sense_keys: None,
        };
        assert!(matches!(
            model.predict_pun(res, &empty),
            Err(LocatorError::EmptySentence(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let (inv, pron) = gloss_resources();
        let res = Resources {
            inventory: &inv,
            pronunciations: &pron,
        };
        let instances = vec![
            instance(&["mark", "stone"], 0),
            instance(&["stone", "mark"], 1),
        ];
        let (model, _) = Dann::<f64>::train(
            &instances,
            res,
            tiny_config(),
            TrainOptions {
                epochs: 3,
                lr: 0.01,
                batch_size: 2,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("locator.ckpt");
        model.save(&path).unwrap();
        let loaded: Dann<f64> = Dann::load(&path).unwrap();
        for inst in &instances {
            assert_eq!(
                model.predict_pun(res, inst).unwrap(),
                loaded.predict_pun(res, inst).unwrap()
            );
        }
    }
}
