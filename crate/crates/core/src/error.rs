use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("block ({row}, {col}) holds {found} values, layout expects {expected}")]
    BlockShape {
        row: usize,
        col: usize,
        expected: usize,
        found: usize,
    },
    #[error("block ({row}, {col}) lies outside the {rows}x{cols} block grid")]
    BlockIndex {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("malformed BSM1 data at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
