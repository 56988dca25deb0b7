//! Library surface of the command-line driver, so integration tests can
//! run every command in process.

pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] pun_core::corpus::CorpusError),
    #[error(transparent)]
    Lexicon(#[from] pun_core::lexicon::LexiconError),
    #[error(transparent)]
    Eval(#[from] pun_core::evalkit::EvalError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Process exit codes: 0 success, 1 contract or parse failure, 2 gradient
/// check over tolerance.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_GRADCHECK_FAILED: i32 = 2;
