//! A small trainable contextual encoder: token + learned position
//! embeddings followed by a stack of single-head self-attention and
//! feed-forward blocks with plain residual connections (no layer norm).
//! Position 0 is the summary slot; its output row is the pooled vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::num::{NodeId, NumError, ParamId, ParamSet, Rng, Scalar, Tape, Tensor};

/// Token-to-id map with fixed reserved ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    map: BTreeMap<String, usize>,
}

impl Vocab {
    pub const PAD: usize = 0;
    pub const CLS: usize = 1;
    pub const SEP: usize = 2;
    pub const UNK: usize = 3;
    pub const RESERVED: usize = 4;

    /// Build from lowercased token counts over the training text only.
    /// Ids are assigned by (count descending, token ascending) after the
    /// four reserved slots.
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(tokens: I, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for tok in tokens {
            *counts.entry(tok.to_lowercase()).or_default() += 1;
        }
        let mut ordered: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let map = ordered
            .into_iter()
            .enumerate()
            .map(|(i, (tok, _))| (tok, Self::RESERVED + i))
            .collect();
        Vocab { map }
    }

    /// Id of a token (lowercased), or `UNK`.
    pub fn id(&self, token: &str) -> usize {
        self.map
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(Self::UNK)
    }

    /// Reserved slots plus learned tokens.
    pub fn len(&self) -> usize {
        Self::RESERVED + self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.map).expect("vocab serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, serde_json::Error> {
        Ok(Vocab {
            map: serde_json::from_value(value.clone())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub max_len: usize,
    pub vocab_size: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), NumError> {
        if self.d_model < 4 || self.d_model % 2 != 0 {
            return Err(NumError::Format(format!(
                "d_model must be even and at least 4, got {}",
                self.d_model
            )));
        }
        if self.max_len < 2 || self.vocab_size < Vocab::RESERVED {
            return Err(NumError::Format(
                "max_len must be >= 2 and vocab_size must cover the reserved ids".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerParams {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

/// Handles to every encoder parameter inside a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    token_emb: ParamId,
    pos_emb: ParamId,
    layers: Vec<LayerParams>,
}

impl EncoderParams {
    /// Register encoder parameters under `prefix`. Embeddings start
    /// uniform(−0.1, 0.1), linear maps Glorot-uniform, biases zero.
    pub fn init<S: Scalar>(
        params: &mut ParamSet<S>,
        config: EncoderConfig,
        rng: &mut Rng,
        prefix: &str,
    ) -> Self {
        let d = config.d_model;
        let hidden = 2 * d;
        let token_emb = params.add(
            &format!("{prefix}.token_emb"),
            embedding_init(rng, config.vocab_size, d),
        );
        let pos_emb = params.add(
            &format!("{prefix}.pos_emb"),
            embedding_init(rng, config.max_len, d),
        );
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = |name: &str| format!("{prefix}.layer{l}.{name}");
            layers.push(LayerParams {
                wq: params.add(&p("wq"), glorot_init(rng, d, d)),
                bq: params.add(&p("bq"), Tensor::zeros(&[d])),
                wk: params.add(&p("wk"), glorot_init(rng, d, d)),
                bk: params.add(&p("bk"), Tensor::zeros(&[d])),
                wv: params.add(&p("wv"), glorot_init(rng, d, d)),
                bv: params.add(&p("bv"), Tensor::zeros(&[d])),
                w1: params.add(&p("ff.w1"), glorot_init(rng, d, hidden)),
                b1: params.add(&p("ff.b1"), Tensor::zeros(&[hidden])),
                w2: params.add(&p("ff.w2"), glorot_init(rng, hidden, d)),
                b2: params.add(&p("ff.b2"), Tensor::zeros(&[d])),
            });
        }
        EncoderParams {
            config,
            token_emb,
            pos_emb,
            layers,
        }
    }

    /// Put every encoder parameter on the tape once, so repeated
    /// `encode_sequence` calls within one forward share the same nodes.
    pub fn load<S: Scalar>(&self, tape: &mut Tape<S>, params: &ParamSet<S>) -> LoadedEncoder {
        LoadedEncoder {
            config: self.config,
            token_emb: tape.param(params, self.token_emb),
            pos_emb: tape.param(params, self.pos_emb),
            layers: self
                .layers
                .iter()
                .map(|l| LoadedLayer {
                    wq: tape.param(params, l.wq),
                    bq: tape.param(params, l.bq),
                    wk: tape.param(params, l.wk),
                    bk: tape.param(params, l.bk),
                    wv: tape.param(params, l.wv),
                    bv: tape.param(params, l.bv),
                    w1: tape.param(params, l.w1),
                    b1: tape.param(params, l.b1),
                    w2: tape.param(params, l.w2),
                    b2: tape.param(params, l.b2),
                })
                .collect(),
        }
    }
}

pub fn embedding_init<S: Scalar>(rng: &mut Rng, rows: usize, cols: usize) -> Tensor<S> {
    let data = (0..rows * cols)
        .map(|_| S::of(rng.uniform(-0.1, 0.1)))
        .collect();
    Tensor::from_vec(&[rows, cols], data).expect("sized data")
}

pub fn glorot_init<S: Scalar>(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Tensor<S> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| S::of(rng.uniform(-limit, limit)))
        .collect();
    Tensor::from_vec(&[fan_in, fan_out], data).expect("sized data")
}

#[derive(Debug, Clone)]
struct LoadedLayer {
    wq: NodeId,
    bq: NodeId,
    wk: NodeId,
    bk: NodeId,
    wv: NodeId,
    bv: NodeId,
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
}

/// Encoder parameters as tape nodes for one forward pass.
#[derive(Debug, Clone)]
pub struct LoadedEncoder {
    config: EncoderConfig,
    token_emb: NodeId,
    pos_emb: NodeId,
    layers: Vec<LoadedLayer>,
}

impl LoadedEncoder {
    pub fn d_model(&self) -> usize {
        self.config.d_model
    }
}

/// Output of one encoded sequence.
pub struct Encoded {
    /// `n × d_model` contextual vectors, one row per input position.
    pub hidden: NodeId,
    /// Output row of position 0 (`1 × d_model`).
    pub pooled: NodeId,
    /// Per-layer attention weights (`n × n`), for inspection.
    pub attention: Vec<NodeId>,
    /// True when the input was cut to `max_len`.
    pub truncated: bool,
}

/// Encode token ids into contextual vectors. Padding ids get zero
/// attention weight as keys; inputs longer than `max_len` are truncated.
pub fn encode_sequence<S: Scalar>(
    tape: &mut Tape<S>,
    enc: &LoadedEncoder,
    ids: &[usize],
) -> Result<Encoded, NumError> {
    let truncated = ids.len() > enc.config.max_len;
    let ids = &ids[..ids.len().min(enc.config.max_len)];
    if ids.is_empty() {
        return Err(NumError::BadShape {
            op: "encode_sequence",
            expected: "at least one token",
            got: vec![0],
        });
    }
    let n = ids.len();
    let positions: Vec<usize> = (0..n).collect();
    let mask: Vec<bool> = ids.iter().map(|&id| id != Vocab::PAD).collect();

    let tok = tape.embedding(enc.token_emb, ids)?;
    let pos = tape.embedding(enc.pos_emb, &positions)?;
    let mut x = tape.add(tok, pos)?;

    let scale = S::of(1.0 / (enc.config.d_model as f64).sqrt());
    let mut attention = Vec::with_capacity(enc.layers.len());
    for layer in &enc.layers {
        let q = tape.linear(x, layer.wq, layer.bq)?;
        let k = tape.linear(x, layer.wk, layer.bk)?;
        let v = tape.linear(x, layer.wv, layer.bv)?;
        let kt = tape.transpose(k);
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, scale);
        let weights = tape.masked_softmax(scores, &mask)?;
        attention.push(weights);
        let ctx = tape.matmul(weights, v)?;
        x = tape.add(x, ctx)?;

        let h = tape.linear(x, layer.w1, layer.b1)?;
        let h = tape.tanh(h);
        let ff = tape.linear(h, layer.w2, layer.b2)?;
        x = tape.add(x, ff)?;
    }

    let pooled = tape.slice_rows(x, 0, 1)?;
    Ok(Encoded {
        hidden: x,
        pooled,
        attention,
        truncated,
    })
}

/// Pooled vector of a gloss: `[CLS] gloss [SEP]` through the same encoder.
/// An empty gloss encodes to a zero vector without touching the encoder.
pub fn encode_gloss<S: Scalar>(
    tape: &mut Tape<S>,
    enc: &LoadedEncoder,
    gloss_ids: &[usize],
) -> Result<(NodeId, bool), NumError> {
    if gloss_ids.is_empty() {
        return Ok((tape.zeros(&[1, enc.config.d_model]), false));
    }
    let mut ids = Vec::with_capacity(gloss_ids.len() + 2);
    ids.push(Vocab::CLS);
    ids.extend_from_slice(gloss_ids);
    ids.push(Vocab::SEP);
    let out = encode_sequence(tape, enc, &ids)?;
    Ok((out.pooled, out.truncated))
}
