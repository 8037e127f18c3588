use std::path::PathBuf;

/// Error type shared by all estimation and bootstrap routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("bandwidth too small: {0}")]
    BandwidthTooSmall(String),

    #[error("degenerate residuals: {0}")]
    DegenerateResiduals(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code category used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Grid(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Data(_) => 3,
            Error::BandwidthTooSmall(_)
            | Error::DegenerateResiduals(_)
            | Error::Numerical(_) => 4,
        }
    }
}
