//! Pun corpus handling: the task XML, the gold location/sense files, fold
//! plans for cross-validation, tag sequences and pun-gloss pairs.

mod folds;
mod gold;
mod pairs;
mod semeval;

pub use folds::{make_folds, FoldPlan};
pub use gold::{parse_gold_location, parse_gold_senses, write_gold_location, write_gold_senses};
pub use pairs::{build_bio_labels, build_pun_gloss_pairs, BioLabel, PairWarning};
pub use semeval::{parse_semeval_xml, write_semeval_xml};

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{0}")]
    Parse(String),
    #[error("line {line}: {message}")]
    ParseAt { line: usize, message: String },
    #[error("xml error near byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error("{0}")]
    Contract(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One pun text: its tokens in order plus any gold annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunInstance {
    pub text_id: String,
    /// `(token_id, surface)` pairs in sentence order.
    pub tokens: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_pun_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_sense_keys: Option<BTreeSet<String>>,
}

impl PunInstance {
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|(_, s)| s.as_str())
    }

    /// Index and surface of the gold pun token, if annotated.
    pub fn gold_index(&self) -> Option<usize> {
        let gold = self.gold_pun_token.as_ref()?;
        self.tokens.iter().position(|(id, _)| id == gold)
    }

    pub fn surface_of(&self, token_id: &str) -> Option<&str> {
        self.tokens
            .iter()
            .find(|(id, _)| id == token_id)
            .map(|(_, s)| s.as_str())
    }
}

/// One pun-gloss pair: the pun's tokens, one candidate gloss's tokens, the
/// candidate sense key and the yes/no match label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub pun_tokens: Vec<String>,
    pub gloss_tokens: Vec<String>,
    pub sense_key: String,
    pub label: PairLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Yes,
    No,
}

/// Attach gold pun locations, checking ids are consistent.
pub fn apply_gold_location(
    instances: &mut [PunInstance],
    gold: &std::collections::BTreeMap<String, String>,
) -> Result<(), CorpusError> {
    use std::collections::BTreeMap;
    let by_id: BTreeMap<String, usize> = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.text_id.clone(), i))
        .collect();
    for (text_id, token_id) in gold {
        let Some(&idx) = by_id.get(text_id) else {
            continue; // gold for a text outside this corpus slice
        };
        let inst = &mut instances[idx];
        if !inst.tokens.iter().any(|(id, _)| id == token_id) {
            return Err(CorpusError::Contract(format!(
                "gold token `{token_id}` is not a token of text `{text_id}`"
            )));
        }
        inst.gold_pun_token = Some(token_id.clone());
    }
    Ok(())
}

/// Attach gold sense-key sets (keyed by pun token id).
pub fn apply_gold_senses(
    instances: &mut [PunInstance],
    gold: &std::collections::BTreeMap<String, BTreeSet<String>>,
) {
    for inst in instances.iter_mut() {
        if let Some(pun) = &inst.gold_pun_token {
            if let Some(keys) = gold.get(pun) {
                inst.gold_sense_keys = Some(keys.clone());
            }
        }
    }
}

/// Write items one JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<(), CorpusError> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read one JSON object per line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::ParseAt {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(text_id: &str, words: &[&str]) -> PunInstance {
        PunInstance {
            text_id: text_id.to_string(),
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| (format!("{text_id}_{}", i + 1), w.to_string()))
                .collect(),
            gold_pun_token: None,
            gold_sense_keys: None,
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_instances() {
        let mut a = inst("hom_1", &["I", "lose", "interest", "."]);
        a.gold_pun_token = Some("hom_1_3".into());
        a.gold_sense_keys = Some(
            ["interest%1:09:00::", "interest%1:21:00::"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let b = inst("hom_2", &["plain"]);
        let mut buf = Vec::new();
        write_jsonl(&[a.clone(), b.clone()], &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&c| c == b'\n').count(), 2);
        let back: Vec<PunInstance> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn gold_location_must_name_a_real_token() {
        let mut instances = vec![inst("hom_1", &["a", "b"])];
        let gold = [("hom_1".to_string(), "hom_1_9".to_string())]
            .into_iter()
            .collect();
        assert!(apply_gold_location(&mut instances, &gold).is_err());
    }

    #[test]
    fn pair_label_serializes_lowercase() {
        assert_eq!(serde_json::to_string(&PairLabel::Yes).unwrap(), "\"yes\"");
        assert_eq!(serde_json::to_string(&PairLabel::No).unwrap(), "\"no\"");
    }
}
