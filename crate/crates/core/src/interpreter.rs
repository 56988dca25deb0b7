//! Pun interpretation as pair classification: a pun sentence concatenated
//! with one candidate gloss is encoded, and the pooled summary vector is
//! classified yes/no. Decoding ranks every candidate sense of the pun word
//! by its yes probability and keeps the top two. A most-frequent-sense
//! baseline answers with inventory ranks 0 and 1 instead.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PairExample, PairLabel, PunInstance};
use crate::encoder::{encode_sequence, EncoderConfig, EncoderParams, LoadedEncoder, Vocab};
use crate::lexicon::SenseInventory;
use crate::num::{
    load_checkpoint, save_checkpoint, softmax_row, Adam, GradCheckReport, NodeId, NumError,
    ParamId, ParamSet, Rng, Scalar, Tape, Tensor,
};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("pair has no pun tokens")]
    EmptyPun,
    #[error("instance `{0}` has no gold pun token")]
    NoGoldToken(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig {
            d_model: 32,
            n_layers: 1,
            max_len: 64,
            seed: 7,
        }
    }
}

/// Top-2 sense decoding for one pun token. Probabilities are the yes
/// scores of the two kept candidates, first ≥ second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensePrediction {
    pub token_id: String,
    pub keys: (String, String),
    pub probabilities: (f64, f64),
}

/// Interpreter model: its own pair encoder plus a two-way classifier.
/// Nothing is shared with the locator.
pub struct Interp<S> {
    pub params: ParamSet<S>,
    pub config: InterpConfig,
    pub vocab: Vocab,
    encoder: EncoderParams,
    cls_w: ParamId,
    cls_b: ParamId,
}

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
            lr: 0.003,
            batch_size: 16,
        }
    }
}

struct LoadedInterp {
    encoder: LoadedEncoder,
    cls_w: NodeId,
    cls_b: NodeId,
}

impl<S: Scalar> Interp<S> {
    pub fn new(config: InterpConfig, vocab: Vocab) -> Result<Self, InterpError> {
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
        let cls_w = params.add(
            "classifier.w",
            crate::encoder::glorot_init(&mut rng, config.d_model, 2),
        );
        let cls_b = params.add("classifier.b", Tensor::zeros(&[2]));
        Ok(Interp {
            params,
            config,
            vocab,
            encoder,
            cls_w,
            cls_b,
        })
    }

    /// Vocabulary over the training pairs (pun and gloss sides together).
    pub fn build_vocab(pairs: &[PairExample], min_count: usize) -> Vocab {
        let tokens = pairs.iter().flat_map(|p| {
            p.pun_tokens
                .iter()
                .chain(p.gloss_tokens.iter())
                .map(String::as_str)
        });
        Vocab::build(tokens, min_count)
    }

    fn load_onto(&self, tape: &mut Tape<S>) -> LoadedInterp {
        LoadedInterp {
            encoder: self.encoder.load(tape, &self.params),
            cls_w: tape.param(&self.params, self.cls_w),
            cls_b: tape.param(&self.params, self.cls_b),
        }
    }

    /// `[CLS] pun [SEP] gloss [SEP]` as vocab ids.
    fn pair_ids(&self, pair: &PairExample) -> Vec<usize> {
        let mut ids = Vec::with_capacity(pair.pun_tokens.len() + pair.gloss_tokens.len() + 3);
        ids.push(Vocab::CLS);
        ids.extend(pair.pun_tokens.iter().map(|t| self.vocab.id(t)));
        ids.push(Vocab::SEP);
        ids.extend(pair.gloss_tokens.iter().map(|t| self.vocab.id(t)));
        ids.push(Vocab::SEP);
        ids
    }

    fn pair_logits(
        &self,
        tape: &mut Tape<S>,
        loaded: &LoadedInterp,
        pair: &PairExample,
    ) -> Result<(NodeId, bool), InterpError> {
        if pair.pun_tokens.is_empty() {
            return Err(InterpError::EmptyPun);
        }
        let ids = self.pair_ids(pair);
        let encoded = encode_sequence(tape, &loaded.encoder, &ids)?;
        let logits = tape.linear(encoded.pooled, loaded.cls_w, loaded.cls_b)?;
        Ok((logits, encoded.truncated))
    }

    /// Probability that the gloss states a correct sense of the pun word.
    /// A zero-initialized classifier yields exactly 0.5.
    pub fn score_pair(&self, pair: &PairExample) -> Result<f64, InterpError> {
        let mut tape = Tape::new();
        let loaded = self.load_onto(&mut tape);
        let (logits, _) = self.pair_logits(&mut tape, &loaded, pair)?;
        let probs = softmax_row(tape.value(logits).row(0));
        Ok(probs[1].as_f64())
    }

    /// Mean cross-entropy over a batch of pairs, as a graph.
    fn batch_loss_graph(
        &self,
        pairs: &[&PairExample],
    ) -> Result<(Tape<S>, NodeId, u64), InterpError> {
        let mut tape = Tape::new();
        let loaded = self.load_onto(&mut tape);
        let mut rows = Vec::with_capacity(pairs.len());
        let mut labels = Vec::with_capacity(pairs.len());
        let mut truncated = 0u64;
        for pair in pairs {
            let (logits, t) = self.pair_logits(&mut tape, &loaded, pair)?;
            if t {
                truncated += 1;
            }
            rows.push(logits);
            labels.push(match pair.label {
                PairLabel::No => 0,
                PairLabel::Yes => 1,
            });
        }
        let stacked = tape.concat_rows(&rows)?;
        let loss = tape.cross_entropy(stacked, &labels)?;
        Ok((tape, loss, truncated))
    }

    /// Train a fresh interpreter on labeled pairs; deterministic per seed.
    pub fn train(
        pairs: &[PairExample],
        config: InterpConfig,
        options: TrainOptions,
    ) -> Result<(Self, TrainLog), InterpError> {
        let vocab = Self::build_vocab(pairs, 1);
        let mut model = Interp::new(config, vocab)?;
        let log = model.fit(pairs, options)?;
        Ok((model, log))
    }

    pub fn fit(
        &mut self,
        pairs: &[PairExample],
        options: TrainOptions,
    ) -> Result<TrainLog, InterpError> {
        let mut log = TrainLog::default();
        let mut rng = Rng::new(self.config.seed ^ 0x1A7E_55ED);
        let mut adam = Adam::new(options.lr);
        let batch = options.batch_size.max(1);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for epoch in 0..options.epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for (step, chunk) in order.chunks(batch).enumerate() {
                let refs: Vec<&PairExample> = chunk.iter().map(|&i| &pairs[i]).collect();
                self.params.zero_grads();
                let (mut tape, loss, truncated) = self.batch_loss_graph(&refs)?;
                let loss_value = tape.value(loss).item().as_f64();
                if !loss_value.is_finite() {
                    return Err(InterpError::NonFiniteLoss { epoch, step });
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

    /// Score every candidate sense of the instance's pun word and return
    /// the two keys with the highest yes probability (exact ties fall back
    /// to inventory order). Fewer than two candidates → `None` (abstain).
    pub fn predict_top2(
        &self,
        instance: &PunInstance,
        inventory: &SenseInventory,
    ) -> Result<Option<SensePrediction>, InterpError> {
        let gold_token = instance
            .gold_pun_token
            .as_ref()
            .ok_or_else(|| InterpError::NoGoldToken(instance.text_id.clone()))?;
        let surface = instance
            .surface_of(gold_token)
            .ok_or_else(|| InterpError::NoGoldToken(instance.text_id.clone()))?;
        let candidates = inventory.senses(surface);
        if candidates.len() < 2 {
            return Ok(None);
        }
        let pun_tokens: Vec<String> = instance.surfaces().map(str::to_string).collect();
        let mut scored: Vec<(usize, &str, f64)> = Vec::with_capacity(candidates.len());
        for (rank, sense) in candidates.iter().enumerate() {
            let pair = PairExample {
                pun_tokens: pun_tokens.clone(),
                gloss_tokens: sense.gloss.split_whitespace().map(str::to_string).collect(),
                sense_key: sense.sense_key.clone(),
                label: PairLabel::No, // unused for scoring
            };
            let p = self.score_pair(&pair)?;
            scored.push((rank, sense.sense_key.as_str(), p));
        }
        // Highest probability first; inventory rank breaks exact ties.
        scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
        Ok(Some(SensePrediction {
            token_id: gold_token.clone(),
            keys: (scored[0].1.to_string(), scored[1].1.to_string()),
            probabilities: (scored[0].2, scored[1].2),
        }))
    }

    pub fn save(&self, path: &Path) -> Result<(), InterpError> {
        let config = serde_json::json!({
            "kind": "interpreter",
            "model": self.config,
            "vocab": self.vocab.to_json(),
        });
        save_checkpoint(path, &self.params, self.config.seed, &config)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, InterpError> {
        let (params, header) = load_checkpoint::<S>(path)?;
        if header.config.get("kind").and_then(|k| k.as_str()) != Some("interpreter") {
            return Err(InterpError::Checkpoint(
                "checkpoint is not an interpreter model".into(),
            ));
        }
        let config: InterpConfig = serde_json::from_value(
            header
                .config
                .get("model")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
        )
        .map_err(|e| InterpError::Checkpoint(format!("bad model config: {e}")))?;
        let vocab = Vocab::from_json(
            header
                .config
                .get("vocab")
                .unwrap_or(&serde_json::Value::Null),
        )
        .map_err(|e| InterpError::Checkpoint(format!("bad vocab: {e}")))?;
        let mut model = Interp::new(config, vocab)?;
        if model.params.len() != params.len() {
            return Err(InterpError::Checkpoint(format!(
                "parameter count mismatch: checkpoint has {}, model expects {}",
                params.len(),
                model.params.len()
            )));
        }
        for (dst, src) in model.params.iter_mut().zip(params.iter()) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(InterpError::Checkpoint(format!(
                    "parameter mismatch: `{}` vs `{}`",
                    dst.name, src.name
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(model)
    }

    /// Finite-difference check of the pair-classification loss.
    pub fn grad_check(
        &mut self,
        pairs: &[&PairExample],
        epsilon: f64,
    ) -> Result<GradCheckReport, InterpError> {
        self.grad_check_with_fault(pairs, epsilon, 0.0)
    }

    #[doc(hidden)]
    pub fn grad_check_with_fault(
        &mut self,
        pairs: &[&PairExample],
        epsilon: f64,
        fault: f64,
    ) -> Result<GradCheckReport, InterpError> {
        let vocab = self.vocab.clone();
        let encoder = self.encoder.clone();
        let (cls_w, cls_b) = (self.cls_w, self.cls_b);
        let mut params = std::mem::take(&mut self.params);
        let result = crate::num::grad_check_faulted(
            &mut params,
            epsilon,
            |ps| {
                let mut tape = Tape::new();
                let enc = encoder.load(&mut tape, ps);
                let w = tape.param(ps, cls_w);
                let b = tape.param(ps, cls_b);
                let mut rows = Vec::new();
                let mut labels = Vec::new();
                for pair in pairs {
                    let mut ids = vec![Vocab::CLS];
                    ids.extend(pair.pun_tokens.iter().map(|t| vocab.id(t)));
                    ids.push(Vocab::SEP);
                    ids.extend(pair.gloss_tokens.iter().map(|t| vocab.id(t)));
                    ids.push(Vocab::SEP);
                    let encoded = encode_sequence(&mut tape, &enc, &ids)?;
                    let logits = tape.linear(encoded.pooled, w, b)?;
                    rows.push(logits);
                    labels.push(match pair.label {
                        PairLabel::No => 0,
                        PairLabel::Yes => 1,
                    });
                }
                let stacked = tape.concat_rows(&rows)?;
                let loss = tape.cross_entropy(stacked, &labels)?;
                Ok((tape, loss))
            },
            fault,
        );
        self.params = params;
        Ok(result?)
    }
}

/// Most-frequent-sense baseline: the first two senses in inventory order.
/// Fewer than two candidates → `None` (abstain).
pub fn mfs_baseline(
    instance: &PunInstance,
    inventory: &SenseInventory,
) -> Result<Option<SensePrediction>, InterpError> {
    let gold_token = instance
        .gold_pun_token
        .as_ref()
        .ok_or_else(|| InterpError::NoGoldToken(instance.text_id.clone()))?;
    let surface = instance
        .surface_of(gold_token)
        .ok_or_else(|| InterpError::NoGoldToken(instance.text_id.clone()))?;
    let candidates = inventory.senses(surface);
    if candidates.len() < 2 {
        return Ok(None);
    }
    Ok(Some(SensePrediction {
        token_id: gold_token.clone(),
        keys: (
            candidates[0].sense_key.clone(),
            candidates[1].sense_key.clone(),
        ),
        probabilities: (1.0, 1.0),
    }))
}
