use std::path::PathBuf;

use qrelcmp_core::discrim::DiscrimError;
use qrelcmp_core::measures::MeasureError;
use qrelcmp_core::sigtest::SigTestError;
use qrelcmp_core::synth::SynthError;
use qrelcmp_core::trec::TrecError;

use crate::llm::LlmError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Trec {
        path: PathBuf,
        #[source]
        source: TrecError,
    },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    SigTest(#[from] SigTestError),
    #[error(transparent)]
    Discrim(#[from] DiscrimError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for unreadable or malformed input and bad
    /// configuration, 1 for failures during analysis.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } | Error::Trec { .. } | Error::Csv { .. } | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
