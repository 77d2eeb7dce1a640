use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed delimited input. `row` is the 1-based data row (header excluded).
    #[error("ingest error at row {row}: {message}")]
    IngestRow { row: usize, message: String },

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("join would produce {estimate} rows, exceeding the cap of {cap}")]
    JoinExplosion { estimate: u64, cap: u64 },

    #[error("empty join")]
    EmptyJoin,

    #[error("training error: {0}")]
    Training(String),

    #[error("persistence error: {0}")]
    Persistence(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IngestRow { .. } | Error::Ingest(_) => "ingest",
            Error::UnknownColumn(_) => "lookup",
            Error::InvalidTable(_) => "table",
            Error::Metric(_) => "metric",
            Error::Argument(_) => "argument",
            Error::JoinExplosion { .. } => "join_explosion",
            Error::EmptyJoin => "empty_join",
            Error::Training(_) => "training",
            Error::Persistence(_) => "persistence",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::Io(_) => "io",
        }
    }
}
