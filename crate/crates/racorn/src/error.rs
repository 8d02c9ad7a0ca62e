use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// CSV input rejected. Line numbers are 1-based and count the header row.
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },

    /// Config file rejected. Line numbers are 1-based.
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    /// A parse error annotated with the file it came from.
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("market window out of range: period {anchor} has fewer than {width} preceding rows")]
    WindowOutOfRange { anchor: usize, width: usize },

    #[error("correlation needs two equal-length vectors of at least 2 entries (got {left} and {right})")]
    CorrelationInput { left: usize, right: usize },

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),

    #[error("grid oracle supports at most {max} assets, got {got}")]
    OracleSize { max: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("cannot combine an empty expert list")]
    EmptyExperts,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("backtest aborted at period {period}: {message}")]
    Backtest { period: usize, message: String },
}

impl Error {
    /// Wrap a parse error with the path of the file it was read from.
    pub fn in_file(self, path: impl Into<String>) -> Error {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
