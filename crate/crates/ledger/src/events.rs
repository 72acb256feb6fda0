//! Ledger events. The service state is a pure fold over these; one API call
//! commits one [`Record`] of consecutive events.

use pyom_core::{AccountId, CashId, EpochId, MerchantId, NoteKind, PublicKey};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountKind {
    User,
    Merchant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

/// Amounts are plain minor units: a ledger instance has exactly one currency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventPayload {
    AccountCreated {
        account_id: AccountId,
        kind: AccountKind,
        initial_balance: u64,
        #[serde(with = "pyom_core::b64::array")]
        token_hash: [u8; 32],
        /// Epoch 1 key for merchants.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epoch_public: Option<PublicKey>,
    },
    CashIssued {
        cash_id: CashId,
        creator: AccountId,
        amount: u64,
        cash_public: PublicKey,
        kind: NoteKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        binding: Option<(MerchantId, EpochId)>,
    },
    /// `credited` is less than the note value only for the boundary note of
    /// a batch with change.
    CashRedeemed {
        cash_id: CashId,
        payee: AccountId,
        credited: u64,
    },
    ChangeReturned {
        cash_id: CashId,
        creator: AccountId,
        amount: u64,
    },
    RevocationRequested {
        cash_id: CashId,
    },
    CashRevoked {
        cash_id: CashId,
        creator: AccountId,
        refunded: u64,
    },
    EpochRotated {
        merchant_id: MerchantId,
        epoch_id: EpochId,
        epoch_public: PublicKey,
    },
    SettlementProcessed {
        merchant_id: MerchantId,
        settled: u32,
        rejected: u32,
    },
    AllowlistUpdated {
        merchant_id: MerchantId,
        allowed: Vec<AccountId>,
    },
}

/// The unit of durability: all events of one committed operation.
pub type Record = Vec<LedgerEvent>;

impl EventPayload {
    /// Net change this event makes to Σ balances + Σ outstanding notes.
    /// Only account creation mints; every other event moves value.
    pub fn minted(&self) -> u64 {
        match self {
            EventPayload::AccountCreated { initial_balance, .. } => *initial_balance,
            _ => 0,
        }
    }
}
