use std::fmt;

use pyom_core::CashId;
use serde::{Deserialize, Serialize};

/// Machine-readable error codes. The kebab-case spelling is the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    InvalidArgument,
    ZeroAmount,
    CurrencyMismatch,
    Unauthorized,
    UnknownAccount,
    UnknownMerchant,
    UnknownPayee,
    UnknownCash,
    InsufficientBalance,
    NotAllowlisted,
    BadSignature,
    AlreadyRedeemed,
    AlreadyRevoked,
    WrongMerchant,
    NotCreator,
    InsufficientTotal,
    ExcessNotes,
    WholeBatchRejected,
    CorruptedLog,
    Internal,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::InvalidArgument => "invalid-argument",
            ErrorCode::ZeroAmount => "zero-amount",
            ErrorCode::CurrencyMismatch => "currency-mismatch",
            ErrorCode::Unauthorized => "unauthorized",
            ErrorCode::UnknownAccount => "unknown-account",
            ErrorCode::UnknownMerchant => "unknown-merchant",
            ErrorCode::UnknownPayee => "unknown-payee",
            ErrorCode::UnknownCash => "unknown-cash",
            ErrorCode::InsufficientBalance => "insufficient-balance",
            ErrorCode::NotAllowlisted => "not-allowlisted",
            ErrorCode::BadSignature => "bad-signature",
            ErrorCode::AlreadyRedeemed => "already-redeemed",
            ErrorCode::AlreadyRevoked => "already-revoked",
            ErrorCode::WrongMerchant => "wrong-merchant",
            ErrorCode::NotCreator => "not-creator",
            ErrorCode::InsufficientTotal => "insufficient-total",
            ErrorCode::ExcessNotes => "excess-notes",
            ErrorCode::WholeBatchRejected => "whole-batch-rejected",
            ErrorCode::CorruptedLog => "corrupted-log",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ErrorCode::Unauthorized => 401,
            ErrorCode::NotCreator => 403,
            ErrorCode::UnknownAccount
            | ErrorCode::UnknownMerchant
            | ErrorCode::UnknownPayee
            | ErrorCode::UnknownCash => 404,
            ErrorCode::AlreadyRedeemed | ErrorCode::AlreadyRevoked => 409,
            ErrorCode::InsufficientBalance
            | ErrorCode::InsufficientTotal
            | ErrorCode::ExcessNotes
            | ErrorCode::WholeBatchRejected
            | ErrorCode::NotAllowlisted
            | ErrorCode::WrongMerchant
            | ErrorCode::BadSignature => 422,
            ErrorCode::InvalidArgument | ErrorCode::ZeroAmount | ErrorCode::CurrencyMismatch => 400,
            ErrorCode::CorruptedLog | ErrorCode::Internal => 500,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One note that sank a batch redemption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteFailure {
    pub cash_id: CashId,
    pub error_code: ErrorCode,
}

/// Error returned by every ledger operation; serialized verbatim as the HTTP
/// error body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{error_code}: {message}")]
pub struct LedgerError {
    pub error_code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offending: Vec<NoteFailure>,
}

impl LedgerError {
    pub fn new(error_code: ErrorCode, message: impl Into<String>) -> Self {
        Self { error_code, message: message.into(), offending: Vec::new() }
    }

    pub fn code(&self) -> ErrorCode {
        self.error_code
    }
}

impl From<std::io::Error> for LedgerError {
    fn from(err: std::io::Error) -> Self {
        LedgerError::new(ErrorCode::Internal, format!("event log I/O: {err}"))
    }
}

pub(crate) fn err<T>(code: ErrorCode, message: impl Into<String>) -> Result<T, LedgerError> {
    Err(LedgerError::new(code, message))
}
