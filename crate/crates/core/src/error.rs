use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("character {value} at position {index} is outside the alphabet [0, {bound})")]
    SymbolOutOfRange {
        index: usize,
        value: i64,
        bound: usize,
    },

    #[error("difference cover modulus must be at least 3, got {0}")]
    CoverModulus(usize),

    #[error("sort key {value} at position {index} is outside [-1, {bound})")]
    KeyOutOfRange {
        index: usize,
        value: i64,
        bound: usize,
    },

    #[error("row {row} has width {found}, expected {expected}")]
    WidthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("merge comparator found suffixes {0} and {1} equal; sample ranks are corrupt")]
    RankCorruption(usize, usize),

    #[error("processor {pid} addressed a message to processor {dest} on a {p}-processor machine")]
    BadDestination { pid: usize, dest: usize, p: usize },

    #[error("invalid machine configuration: {0}")]
    BadConfig(String),

    #[error("insufficient slackness: {what} = {have}, need at least {need}")]
    Slackness {
        what: &'static str,
        have: u128,
        need: u128,
    },

    #[error("text of length {n} cannot be block-distributed over {p} processors")]
    TooFewCharacters { n: usize, p: usize },

    #[error("{sequences} tuple sequences exceed the {p} available designated processors")]
    TooManySequences { sequences: usize, p: usize },

    #[error("processor {pid} failed: {msg}")]
    Program { pid: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
