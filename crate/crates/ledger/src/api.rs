//! Request/response bodies of the HTTP API and the [`LedgerApi`] trait that
//! both the in-process ledger and remote clients implement.

use std::fmt;

use pyom_core::{
    AccountId, CashId, Currency, EpochId, IssuedMaterials, MerchantId, MoneyAmount, NoteKind,
    PublicKey, Signature,
};
use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, LedgerError};
use crate::events::AccountKind;
use crate::keys::Token;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateAccountRequest {
    pub kind: AccountKind,
    pub initial_minor_units: u64,
    pub currency: Currency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateAccountResponse {
    pub account_id: AccountId,
    pub token: Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceResponse {
    pub minor_units: u64,
    pub currency: Currency,
}

impl BalanceResponse {
    pub fn amount(&self) -> MoneyAmount {
        MoneyAmount::new(self.minor_units, self.currency)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRequest {
    pub amount: MoneyAmount,
    pub cash_public: PublicKey,
    pub kind: NoteKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_merchant: Option<MerchantId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedeemRequest {
    pub cash_id: CashId,
    pub payee: AccountId,
    pub redeem_sig: Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedeemResponse {
    pub credited: MoneyAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchNote {
    pub cash_id: CashId,
    pub redeem_sig: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedeemBatchRequest {
    pub notes: Vec<BatchNote>,
    pub bill: MoneyAmount,
    pub payee: AccountId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeCredit {
    pub account_id: AccountId,
    pub amount: MoneyAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteCredit {
    pub cash_id: CashId,
    /// Portion of the note paid to the payee.
    pub credited: MoneyAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSettlement {
    pub merchant_credit: MoneyAmount,
    pub change_credits: Vec<ChangeCredit>,
    pub per_note: Vec<NoteCredit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevocationOutcome {
    /// Value already returned to the creator.
    Finalized,
    /// Bound note; value returns when the merchant rotates its epoch.
    Pending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevokeResponse {
    pub revocation: RevocationOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoteStatus {
    Active,
    RevokePending,
    Redeemed,
    Revoked,
}

impl fmt::Display for NoteStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoteStatus::Active => "active",
            NoteStatus::RevokePending => "revoke-pending",
            NoteStatus::Redeemed => "redeemed",
            NoteStatus::Revoked => "revoked",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub status: NoteStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintKeyResponse {
    pub mint_public: PublicKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochResponse {
    pub epoch_id: EpochId,
    pub epoch_public: PublicKey,
}

/// A merchant's stored proof of an offline acceptance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineReceipt {
    /// Canonical note bytes exactly as received.
    #[serde(with = "pyom_core::b64::bytes")]
    pub note: Vec<u8>,
    pub payee_merchant: MerchantId,
    pub redeem_sig: Signature,
    /// Client clock, informational only.
    pub accepted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettleRequest {
    pub receipts: Vec<OfflineReceipt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SettleReason {
    Malformed,
    WrongMerchant,
    NotMerchantBound,
    UnknownCash,
    BadSignature,
    DoubleSpent,
    Revoked,
}

impl SettleReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            SettleReason::Malformed => "malformed",
            SettleReason::WrongMerchant => "wrong-merchant",
            SettleReason::NotMerchantBound => "not-merchant-bound",
            SettleReason::UnknownCash => "unknown-cash",
            SettleReason::BadSignature => "bad-signature",
            SettleReason::DoubleSpent => "double-spent",
            SettleReason::Revoked => "revoked",
        }
    }
}

impl fmt::Display for SettleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ReceiptOutcome {
    Settled { credited: MoneyAmount },
    Rejected { reason: SettleReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptResult {
    /// Absent when the note payload could not be decoded.
    pub cash_id: Option<CashId>,
    #[serde(flatten)]
    pub outcome: ReceiptOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettleResponse {
    pub results: Vec<ReceiptResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllowlistRequest {
    pub allowed: Vec<AccountId>,
}

/// Either the ledger refused the request or it never got a say.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("network error: {0}")]
    Transport(String),
}

impl ApiError {
    pub fn ledger_code(&self) -> Option<ErrorCode> {
        match self {
            ApiError::Ledger(e) => Some(e.error_code),
            ApiError::Transport(_) => None,
        }
    }

    /// Wire code, or `network` for transport failures.
    pub fn code_str(&self) -> &'static str {
        match self {
            ApiError::Ledger(e) => e.error_code.as_str(),
            ApiError::Transport(_) => "network",
        }
    }
}

/// The ledger's API surface, independent of transport.
pub trait LedgerApi: Send + Sync {
    fn create_account(&self, req: &CreateAccountRequest) -> Result<CreateAccountResponse, ApiError>;
    fn balance(&self, account: &AccountId) -> Result<BalanceResponse, ApiError>;
    fn issue_cash(&self, token: &Token, req: &IssueRequest) -> Result<IssuedMaterials, ApiError>;
    fn redeem(&self, req: &RedeemRequest) -> Result<RedeemResponse, ApiError>;
    fn redeem_batch(&self, req: &RedeemBatchRequest) -> Result<BatchSettlement, ApiError>;
    fn revoke(&self, token: &Token, cash_id: &CashId) -> Result<RevokeResponse, ApiError>;
    fn status(&self, cash_id: &CashId) -> Result<StatusResponse, ApiError>;
    fn mint_public(&self) -> Result<MintKeyResponse, ApiError>;
    fn epoch(&self, merchant: &MerchantId) -> Result<EpochResponse, ApiError>;
    fn rotate_epoch(&self, token: &Token, merchant: &MerchantId) -> Result<EpochResponse, ApiError>;
    fn settle(
        &self,
        token: &Token,
        merchant: &MerchantId,
        req: &SettleRequest,
    ) -> Result<SettleResponse, ApiError>;
    fn set_allowlist(
        &self,
        token: &Token,
        merchant: &MerchantId,
        req: &AllowlistRequest,
    ) -> Result<(), ApiError>;
}

impl<T: LedgerApi + ?Sized> LedgerApi for std::sync::Arc<T> {
    fn create_account(&self, req: &CreateAccountRequest) -> Result<CreateAccountResponse, ApiError> {
        (**self).create_account(req)
    }
    fn balance(&self, account: &AccountId) -> Result<BalanceResponse, ApiError> {
        (**self).balance(account)
    }
    fn issue_cash(&self, token: &Token, req: &IssueRequest) -> Result<IssuedMaterials, ApiError> {
        (**self).issue_cash(token, req)
    }
    fn redeem(&self, req: &RedeemRequest) -> Result<RedeemResponse, ApiError> {
        (**self).redeem(req)
    }
    fn redeem_batch(&self, req: &RedeemBatchRequest) -> Result<BatchSettlement, ApiError> {
        (**self).redeem_batch(req)
    }
    fn revoke(&self, token: &Token, cash_id: &CashId) -> Result<RevokeResponse, ApiError> {
        (**self).revoke(token, cash_id)
    }
    fn status(&self, cash_id: &CashId) -> Result<StatusResponse, ApiError> {
        (**self).status(cash_id)
    }
    fn mint_public(&self) -> Result<MintKeyResponse, ApiError> {
        (**self).mint_public()
    }
    fn epoch(&self, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        (**self).epoch(merchant)
    }
    fn rotate_epoch(&self, token: &Token, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        (**self).rotate_epoch(token, merchant)
    }
    fn settle(
        &self,
        token: &Token,
        merchant: &MerchantId,
        req: &SettleRequest,
    ) -> Result<SettleResponse, ApiError> {
        (**self).settle(token, merchant, req)
    }
    fn set_allowlist(
        &self,
        token: &Token,
        merchant: &MerchantId,
        req: &AllowlistRequest,
    ) -> Result<(), ApiError> {
        (**self).set_allowlist(token, merchant, req)
    }
}
