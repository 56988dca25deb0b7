//! Parser for the CMU pronouncing dictionary plain-text format.
//!
//! Comment lines start with `;;;`. Entry lines are `WORD  PH1 PH2 …`;
//! alternative pronunciations use `WORD(n)` and only the first entry of a
//! word is kept. Stress digits (`0`/`1`/`2`) are stripped from the vowel
//! phonemes, e.g. `EH1` becomes `EH`.

use std::collections::BTreeMap;
use std::io::BufRead;

use super::LexiconError;

/// Indexed pronunciations plus the phoneme vocabulary seen while parsing.
///
/// Phoneme symbols get dense ids in sorted order; the locator uses them to
/// index its phoneme embedding table.
#[derive(Debug, Clone, Default)]
pub struct PronunciationTable {
    entries: BTreeMap<String, Vec<String>>,
    phoneme_vocab: Vec<String>,
    phoneme_ids: BTreeMap<String, usize>,
    /// Number of duplicate non-variant entries that were overwritten.
    pub duplicate_count: u64,
}

impl PronunciationTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stress-stripped phoneme symbols for `word`, empty when unknown.
    /// The lookup key is lowercased internally.
    pub fn lookup_phonemes(&self, word: &str) -> &[String] {
        static EMPTY: Vec<String> = Vec::new();
        self.entries
            .get(&word.to_lowercase())
            .map_or(EMPTY.as_slice(), Vec::as_slice)
    }

    /// Phoneme ids for `word` (indices into [`Self::phoneme_vocab`]).
    pub fn lookup_phoneme_ids(&self, word: &str) -> Vec<usize> {
        self.lookup_phonemes(word)
            .iter()
            .map(|p| self.phoneme_ids[p])
            .collect()
    }

    /// Sorted phoneme symbols; index = embedding id.
    pub fn phoneme_vocab(&self) -> &[String] {
        &self.phoneme_vocab
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Canonical text dump; reparsing it reproduces the table exactly.
    pub fn canonical_dump(&self) -> String {
        let mut out = String::new();
        for (word, phonemes) in &self.entries {
            out.push_str(word);
            out.push_str("  ");
            out.push_str(&phonemes.join(" "));
            out.push('\n');
        }
        out
    }

    fn rebuild_phoneme_vocab(&mut self) {
        let mut symbols: Vec<String> = self
            .entries
            .values()
            .flatten()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        symbols.sort();
        self.phoneme_ids = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        self.phoneme_vocab = symbols;
    }
}

fn strip_stress(symbol: &str) -> String {
    symbol
        .strip_suffix(['0', '1', '2'])
        .unwrap_or(symbol)
        .to_string()
}

/// Parse cmudict-format text. Variant entries (`WORD(1)`, …) beyond the
/// base form are dropped; a repeated base form overwrites the earlier one
/// and bumps `duplicate_count`.
pub fn parse_cmudict<R: BufRead>(reader: R) -> Result<PronunciationTable, LexiconError> {
    let mut table = PronunciationTable::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;;") {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let head = fields.next().expect("nonempty line has a first field");
        let phonemes: Vec<String> = fields.map(strip_stress).collect();
        if phonemes.is_empty() {
            return Err(LexiconError::Parse {
                line: line_no,
                message: format!("entry `{head}` has no phonemes"),
            });
        }
        // `WORD(n)` marks an alternative pronunciation; first one wins.
        if let Some(open) = head.find('(') {
            if head.ends_with(')') {
                let base = head[..open].to_lowercase();
                if table.entries.contains_key(&base) {
                    continue;
                }
                // A variant of a word we never saw; keep it as the base form.
                table.entries.insert(base, phonemes);
                continue;
            }
        }
        let word = head.to_lowercase();
        if table.entries.insert(word, phonemes).is_some() {
            table.duplicate_count += 1;
        }
    }
    table.rebuild_phoneme_vocab();
    Ok(table)
}
