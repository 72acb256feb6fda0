use serde::{Deserialize, Serialize};

use crate::amount::MoneyAmount;
use crate::ids::{CashId, EpochId, MerchantId};
use crate::keys::{PublicKey, SecretSeed, Signature};
use crate::messages::{endorsement_message, issuance_message};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    /// Redeemable by whoever holds it.
    Standard,
    /// Endorsed for exactly one merchant; that merchant can accept it offline.
    MerchantBound,
}

impl NoteKind {
    pub fn to_byte(self) -> u8 {
        match self {
            NoteKind::Standard => 0x00,
            NoteKind::MerchantBound => 0x01,
        }
    }

    pub fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0x00 => Some(NoteKind::Standard),
            0x01 => Some(NoteKind::MerchantBound),
            _ => None,
        }
    }
}

/// The ledger's endorsement that a note may only be paid to `merchant_id`,
/// signed by that merchant's epoch key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerchantBinding {
    pub merchant_id: MerchantId,
    pub epoch_id: EpochId,
    pub endorsement_sig: Signature,
}

/// A printable bearer note.
///
/// `cash_public` is carried in memory for convenience but never encoded: the
/// decoder re-derives it from `cash_secret`. Fields are public so that test
/// harnesses can build deliberately inconsistent notes; [`CashNote::check`]
/// enforces the structural invariants and the encoder refuses notes that fail
/// it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CashNote {
    pub cash_id: CashId,
    pub amount: MoneyAmount,
    pub cash_secret: SecretSeed,
    pub cash_public: PublicKey,
    pub issuance_sig: Signature,
    pub binding: Option<MerchantBinding>,
}

impl CashNote {
    pub fn kind(&self) -> NoteKind {
        if self.binding.is_some() {
            NoteKind::MerchantBound
        } else {
            NoteKind::Standard
        }
    }

    pub fn issuance_message(&self) -> [u8; crate::messages::ISSUANCE_MESSAGE_LEN] {
        issuance_message(self.kind(), &self.amount, &self.cash_id, &self.cash_public)
    }

    /// Endorsement message for the note's own binding, if any.
    pub fn endorsement_message(&self) -> Option<[u8; crate::messages::ENDORSEMENT_MESSAGE_LEN]> {
        self.binding.as_ref().map(|b| {
            endorsement_message(
                &self.cash_id,
                &self.amount,
                &self.cash_public,
                &b.merchant_id,
                b.epoch_id,
            )
        })
    }

    /// Structural invariants only; signatures are checked by the
    /// [`crate::verify`] functions.
    pub fn check(&self) -> Result<(), NoteError> {
        if self.amount.is_zero() {
            return Err(NoteError::ZeroAmount);
        }
        if self.cash_secret.public_key() != self.cash_public {
            return Err(NoteError::KeyMismatch);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum NoteError {
    #[error("note value must be positive")]
    ZeroAmount,
    #[error("cash_public does not derive from cash_secret")]
    KeyMismatch,
}
