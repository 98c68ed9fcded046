use std::fmt;

/// What went wrong while reading a bracketed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnbalancedParens,
    EmptyNode,
    TrailingGarbage,
    UnexpectedToken,
}

/// A bracketed-tree syntax error at a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ParseErrorKind::UnbalancedParens => "unbalanced parentheses",
            ParseErrorKind::EmptyNode => "empty node",
            ParseErrorKind::TrailingGarbage => "trailing input after tree",
            ParseErrorKind::UnexpectedToken => "unexpected token",
        };
        write!(f, "{what} at byte {}", self.offset)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}: {source}")]
    TreebankLine { line: usize, source: ParseError },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("no tree survived the corpus filter")]
    EmptyResult,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("concat called with no inputs")]
    EmptyInputList,
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("loss node is not a scalar (shape {rows}x{cols})")]
    NotScalarLoss { rows: usize, cols: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),

    #[error("no module registered for `{0}`")]
    MissingModule(String),
    #[error("tree has {leaves} leaves but {words} word embeddings were supplied")]
    LeafCountMismatch { leaves: usize, words: usize },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: dimension {found} does not match {expected}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: record `{id}` has {words} words but its tree has {leaves} leaves")]
    RecordLeafCount {
        line: usize,
        id: String,
        leaves: usize,
        words: usize,
    },
    #[error("need at least two records, got {0}")]
    TooFewRecords(usize),
    #[error("chance-level MSE is zero; all sentence embeddings are identical")]
    DegenerateChance,
    #[error("loss became non-finite at epoch {epoch}, sentence `{sentence}`")]
    NonFiniteLoss { epoch: usize, sentence: String },

    #[error("dataset is empty")]
    EmptyDataset,
    #[error("probe training pairs must share one category, found {0} and {1}")]
    MixedCategories(String, String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed inputs rather than a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::TreebankLine { .. }
                | Error::InvalidTree(_)
                | Error::InvalidConfig(_)
                | Error::Schema { .. }
                | Error::DimMismatch { .. }
                | Error::RecordLeafCount { .. }
                | Error::LeafCountMismatch { .. }
                | Error::TooFewRecords(_)
                | Error::EmptyDataset
                | Error::MixedCategories(..)
                | Error::MissingModule(_)
                | Error::Checkpoint(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
