use thiserror::Error;

/// Errors produced by the adaptation engine.
///
/// Each variant carries the module that raised it so pipeline failures can be
/// traced back without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[{module}] dimension mismatch: {msg}")]
    Dimension { module: &'static str, msg: String },

    #[error("[{module}] invalid data: {msg}")]
    Data { module: &'static str, msg: String },

    #[error("[graph] {0}")]
    Graph(String),

    #[error("[gtg] invalid initial profile: {0}")]
    Init(String),

    #[error("[{module}] numerical failure: {msg}")]
    Numerics { module: &'static str, msg: String },

    #[error("[{module}] invalid configuration: {msg}")]
    Config { module: &'static str, msg: String },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("[baselines] singular harmonic system: unlabeled component {component:?} has no labeled node")]
    SingularSystem { component: Vec<usize> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dimension(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Dimension {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn data(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Data {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn numerics(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Numerics {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn config(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for data
    /// problems, 3 for numerical failures, 1 for configuration misuse.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerics { .. } | Error::SingularSystem { .. } => 3,
            Error::Config { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
