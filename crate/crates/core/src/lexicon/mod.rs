//! Pronunciation dictionary and sense inventory: parsing, indexing, and the
//! per-word phoneme / sense lookups the models consume.
//!
//! Both tables are immutable after parsing and are pure functions of the
//! input bytes, so they are safe to share across threads.

mod cmudict;
mod senses;

pub use cmudict::{parse_cmudict, PronunciationTable};
pub use senses::{parse_sense_inventory, SenseEntry, SenseInventory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
