use std::path::PathBuf;

use crate::model::HeadId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("checkpoint tensor names do not match GPT-2 layout: missing {missing:?}, unexpected {unexpected:?}")]
    TensorNames {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("tensor `{name}` has dtype {dtype}, only F32 checkpoints are supported")]
    TensorDtype { name: String, dtype: String },

    #[error("tokenizer assets: {0}")]
    Tokenizer(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty token sequence")]
    EmptySequence,

    #[error("sequence of {len} tokens exceeds context length {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("head {0} does not exist in this model")]
    InvalidHead(HeadId),

    #[error("patch for head {head} has shape {found:?}, run expects {expected:?}")]
    PatchShape {
        head: HeadId,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("answer `{text}` encodes to {n_tokens} tokens, expected exactly one")]
    NotSingleToken { text: String, n_tokens: usize },

    #[error("correct and incorrect answers are the same token `{0}`")]
    IdenticalAnswers(String),

    #[error("lexicon: {0}")]
    Lexicon(String),

    #[error("unknown setting label `{0}`")]
    UnknownSetting(String),

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("token length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{0} requires a non-empty activation pool")]
    EmptyPool(&'static str),

    #[error("no activation pool entries of length {0}")]
    NoPoolForLength(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("every prompt/counterfactual pair was skipped ({0} pairs)")]
    AllPairsSkipped(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Asset,
    Validation,
    Runtime,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::Checkpoint { .. }
            | Error::TensorNames { .. }
            | Error::TensorShape { .. }
            | Error::TensorDtype { .. }
            | Error::Tokenizer(_) => ErrorClass::Asset,
            Error::Config(_)
            | Error::Lexicon(_)
            | Error::UnknownSetting(_)
            | Error::UnknownFactor(_)
            | Error::Parse(_)
            | Error::TomlDe(_)
            | Error::InvalidHead(_) => ErrorClass::Validation,
            _ => ErrorClass::Runtime,
        }
    }

    /// Process exit code: 2 asset, 3 validation, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Asset => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Runtime => 4,
        }
    }
}
