//! Tag sequences for the locator and pun-gloss pairs for the interpreter.

use super::{CorpusError, PairExample, PairLabel, PunInstance};
use crate::lexicon::SenseInventory;

/// Per-token tag: `O` everywhere except the single pun token, which is `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BioLabel {
    O,
    P,
}

impl BioLabel {
    /// Class index used by the locator's two-way projection.
    pub fn class_index(self) -> usize {
        match self {
            BioLabel::O => 0,
            BioLabel::P => 1,
        }
    }
}

/// Label every token of an annotated instance; exactly one `P`.
pub fn build_bio_labels(instance: &PunInstance) -> Result<Vec<BioLabel>, CorpusError> {
    let gold = instance.gold_pun_token.as_ref().ok_or_else(|| {
        CorpusError::Contract(format!(
            "instance `{}` has no gold pun token",
            instance.text_id
        ))
    })?;
    let mut labels = vec![BioLabel::O; instance.tokens.len()];
    let mut found = false;
    for (i, (id, _)) in instance.tokens.iter().enumerate() {
        if id == gold {
            labels[i] = BioLabel::P;
            found = true;
        }
    }
    if !found {
        return Err(CorpusError::Contract(format!(
            "gold token `{gold}` is not in instance `{}`",
            instance.text_id
        )));
    }
    Ok(labels)
}

/// Non-fatal observations made while building pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairWarning {
    /// The pun word has no senses in the inventory; the instance is skipped.
    NoCandidates { text_id: String, surface: String },
    /// None of the candidate keys is in the gold set; all pairs are `no`.
    GoldDisjoint { text_id: String },
}

/// One pair per candidate sense of the pun word, in inventory order,
/// labeled `yes` iff the key is in the gold set. Candidates are looked up
/// by the pun token's lowercased surface form; pairing is exhaustive (no
/// cap). An instance whose pun word misses the inventory yields no pairs
/// and a [`PairWarning::NoCandidates`].
pub fn build_pun_gloss_pairs(
    instance: &PunInstance,
    inventory: &SenseInventory,
) -> Result<(Vec<PairExample>, Vec<PairWarning>), CorpusError> {
    let gold_token = instance.gold_pun_token.as_ref().ok_or_else(|| {
        CorpusError::Contract(format!(
            "instance `{}` has no gold pun token",
            instance.text_id
        ))
    })?;
    let gold_keys = instance.gold_sense_keys.as_ref().ok_or_else(|| {
        CorpusError::Contract(format!(
            "instance `{}` has no gold sense keys",
            instance.text_id
        ))
    })?;
    let surface = instance.surface_of(gold_token).ok_or_else(|| {
        CorpusError::Contract(format!(
            "gold token `{gold_token}` is not in instance `{}`",
            instance.text_id
        ))
    })?;

    let mut warnings = Vec::new();
    let candidates = inventory.senses(surface);
    if candidates.is_empty() {
        warnings.push(PairWarning::NoCandidates {
            text_id: instance.text_id.clone(),
            surface: surface.to_string(),
        });
        return Ok((Vec::new(), warnings));
    }

    let pun_tokens: Vec<String> = instance.surfaces().map(str::to_string).collect();
    let pairs: Vec<PairExample> = candidates
        .iter()
        .map(|sense| PairExample {
            pun_tokens: pun_tokens.clone(),
            gloss_tokens: sense.gloss.split_whitespace().map(str::to_string).collect(),
            sense_key: sense.sense_key.clone(),
            label: if gold_keys.contains(&sense.sense_key) {
                PairLabel::Yes
            } else {
                PairLabel::No
            },
        })
        .collect();

    if pairs.iter().all(|p| p.label == PairLabel::No) {
        warnings.push(PairWarning::GoldDisjoint {
            text_id: instance.text_id.clone(),
        });
    }
    Ok((pairs, warnings))
}
