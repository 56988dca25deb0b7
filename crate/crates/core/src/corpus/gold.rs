//! Gold annotation files: pun locations (`text_id \t token_id` per line)
//! and pun senses (`token_id key1 key2 …` per line, at least two keys).

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use super::CorpusError;

/// Parse the gold-location file into `text_id → token_id`. Tabs or any
/// whitespace separate the two fields; duplicate text ids are an error.
pub fn parse_gold_location<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut map = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(CorpusError::ParseAt {
                line: line_no,
                message: format!("expected `text_id token_id`, got {} fields", fields.len()),
            });
        }
        let (text_id, token_id) = (fields[0], fields[1]);
        if !token_id.starts_with(&format!("{text_id}_")) {
            return Err(CorpusError::ParseAt {
                line: line_no,
                message: format!("token `{token_id}` does not belong to text `{text_id}`"),
            });
        }
        if map
            .insert(text_id.to_string(), token_id.to_string())
            .is_some()
        {
            return Err(CorpusError::ParseAt {
                line: line_no,
                message: format!("duplicate gold line for text `{text_id}`"),
            });
        }
    }
    Ok(map)
}

/// Parse the gold-sense file into `token_id → key set`. Each line needs at
/// least two keys; the set is unordered.
pub fn parse_gold_senses<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<String, BTreeSet<String>>, CorpusError> {
    let mut map = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let token_id = fields.next().expect("nonempty line").to_string();
        let keys: BTreeSet<String> = fields.map(str::to_string).collect();
        if keys.len() < 2 {
            return Err(CorpusError::ParseAt {
                line: line_no,
                message: format!(
                    "token `{token_id}` lists {} sense keys, need at least 2",
                    keys.len()
                ),
            });
        }
        map.insert(token_id, keys);
    }
    Ok(map)
}

pub fn write_gold_location(gold: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (text_id, token_id) in gold {
        out.push_str(text_id);
        out.push('\t');
        out.push_str(token_id);
        out.push('\n');
    }
    out
}

pub fn write_gold_senses(gold: &BTreeMap<String, BTreeSet<String>>) -> String {
    let mut out = String::new();
    for (token_id, keys) in gold {
        out.push_str(token_id);
        for key in keys {
            out.push('\t');
            out.push_str(key);
        }
        out.push('\n');
    }
    out
}
