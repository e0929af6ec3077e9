use crate::corpus::CorpusError;
use crate::explanation::ExplainError;
use crate::providers::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Coarse classification used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Provider,
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Input(_) | Error::Corpus(_) => ErrorKind::Input,
            Error::Provider(ProviderError::Config(_) | ProviderError::InvalidInput(_)) => ErrorKind::Input,
            Error::Provider(_) => ErrorKind::Provider,
            Error::Internal(_) => ErrorKind::Internal,
        }
    }
}

impl From<ExplainError> for Error {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::NoAnswerType => Error::Input(e.to_string()),
            ExplainError::Provider(p) => Error::Provider(p),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Internal(format!("serialization: {e}"))
    }
}
