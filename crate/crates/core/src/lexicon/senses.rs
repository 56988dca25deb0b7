//! Sense inventory: a three-column TSV of `lemma \t sense_key \t gloss`.
//!
//! Per-lemma entry order is exactly file order; that order defines the
//! most-frequent-sense rank and the truncation point when a cap applies.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::LexiconError;

/// One sense of a lemma: its stable key and its gloss text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseEntry {
    pub lemma: String,
    pub sense_key: String,
    pub gloss: String,
}

#[derive(Debug, Clone, Default)]
pub struct SenseInventory {
    entries: Vec<SenseEntry>,
    by_lemma: BTreeMap<String, Vec<usize>>,
}

impl SenseInventory {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SenseEntry] {
        &self.entries
    }

    /// All senses of `lemma` in file order. The key is lowercased.
    pub fn senses(&self, lemma: &str) -> Vec<&SenseEntry> {
        self.by_lemma
            .get(&lemma.to_lowercase())
            .map(|ids| ids.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// The first `min(n, cap)` senses of `lemma` in file order, plus the
    /// total sense count before truncation. Unknown lemmas come back as
    /// `([], 0)`; the caller pads the missing slots with zero vectors.
    pub fn lookup_senses(&self, lemma: &str, cap: usize) -> (Vec<&SenseEntry>, usize) {
        assert!(cap >= 1, "sense cap must be at least 1");
        let all = self.senses(lemma);
        let total = all.len();
        let mut capped = all;
        capped.truncate(cap);
        (capped, total)
    }

    /// Canonical TSV dump in entry (file) order; reparsing reproduces the
    /// inventory exactly.
    pub fn canonical_dump(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.lemma);
            out.push('\t');
            out.push_str(&e.sense_key);
            out.push('\t');
            out.push_str(&e.gloss);
            out.push('\n');
        }
        out
    }
}

/// Parse the three-column TSV. Duplicate sense keys are a hard error;
/// lemmas are lowercased on the way in.
pub fn parse_sense_inventory<R: BufRead>(reader: R) -> Result<SenseInventory, LexiconError> {
    let mut inv = SenseInventory::default();
    let mut seen_keys: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(LexiconError::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated columns, got {}", cols.len()),
            });
        }
        let (lemma, sense_key, gloss) = (cols[0].to_lowercase(), cols[1], cols[2]);
        if gloss.trim().is_empty() {
            return Err(LexiconError::Parse {
                line: line_no,
                message: format!("empty gloss for sense key `{sense_key}`"),
            });
        }
        if let Some(first) = seen_keys.insert(sense_key.to_string(), line_no) {
            return Err(LexiconError::Parse {
                line: line_no,
                message: format!("duplicate sense key `{sense_key}` (first seen on line {first})"),
            });
        }
        let index = inv.entries.len();
        inv.by_lemma.entry(lemma.clone()).or_default().push(index);
        inv.entries.push(SenseEntry {
            lemma,
            sense_key: sense_key.to_string(),
            gloss: gloss.to_string(),
        });
    }
    Ok(inv)
}
