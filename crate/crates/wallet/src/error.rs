use std::io;
use std::path::PathBuf;

use pyom_core::CodecError;
use pyom_ledger::{ApiError, LedgerError};

#[derive(Debug, thiserror::Error)]
pub enum WalletError {
    #[error("{0}")]
    Ledger(LedgerError),
    #[error("network: {0}")]
    Network(String),
    #[error("{}: cannot read note: {source}", source.code())]
    Codec {
        #[from]
        source: CodecError,
    },
    #[error("already initialized: {} holds credentials", .0.display())]
    AlreadyInitialized(PathBuf),
    #[error("not initialized: no credentials in {}", .0.display())]
    NotInitialized(PathBuf),
    #[error("no cached keys: run `refresh-keys` while online")]
    NoCachedKeys,
    #[error("not a merchant wallet")]
    NotMerchant,
    #[error("note rejected offline: {}", .0.code())]
    Rejected(pyom_core::RejectReason),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    BadFile {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl WalletError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| WalletError::Io { path, source }
    }

    /// Process exit status: 1 domain error, 2 usage error, 3 network error.
    pub fn exit_code(&self) -> i32 {
        match self {
            WalletError::Network(_) => 3,
            WalletError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Ledger or codec error code, where there is one.
    pub fn code(&self) -> Option<&'static str> {
        match self {
            WalletError::Ledger(e) => Some(e.error_code.as_str()),
            WalletError::Codec { source } => Some(source.code()),
            WalletError::Rejected(r) => Some(r.code()),
            _ => None,
        }
    }
}

impl From<ApiError> for WalletError {
    fn from(e: ApiError) -> Self {
        match e {
            ApiError::Ledger(e) => WalletError::Ledger(e),
            ApiError::Transport(m) => WalletError::Network(m),
        }
    }
}

pub type Result<T, E = WalletError> = std::result::Result<T, E>;
