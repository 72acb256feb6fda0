//! Signature checks a payee can run with nothing but cached public keys.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{EpochId, MerchantId};
use crate::keys::{self, PublicKey};
use crate::note::CashNote;

/// `true` iff the mint's issuance signature covers this note's kind, value,
/// id and verification key.
pub fn verify_issuance(note: &CashNote, mint_public: &PublicKey) -> bool {
    keys::verify(mint_public, &note.issuance_message(), &note.issuance_sig)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("standard notes carry no merchant endorsement")]
pub struct NotApplicable;

impl NotApplicable {
    pub fn code(&self) -> &'static str {
        "not-applicable"
    }
}

pub fn verify_endorsement(note: &CashNote, epoch_public: &PublicKey) -> Result<bool, NotApplicable> {
    let (binding, message) = match (&note.binding, note.endorsement_message()) {
        (Some(b), Some(m)) => (b, m),
        _ => return Err(NotApplicable),
    };
    Ok(keys::verify(epoch_public, &message, &binding.endorsement_sig))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// Unbound notes are never accepted offline.
    NotMerchantBound,
    /// The secret on the note does not derive the verification key.
    KeyMismatch,
    /// The mint's issuance signature does not verify.
    NotAuthentic,
    WrongMerchant,
    /// The note's epoch is not among the merchant's accepted epochs.
    StaleEpoch,
    /// The epoch is accepted but the endorsement does not verify under it.
    BadEndorsement,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::NotMerchantBound => "not-merchant-bound",
            RejectReason::KeyMismatch => "key-mismatch",
            RejectReason::NotAuthentic => "not-authentic",
            RejectReason::WrongMerchant => "wrong-merchant",
            RejectReason::StaleEpoch => "stale-epoch",
            RejectReason::BadEndorsement => "bad-endorsement",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

/// Outcome of [`offline_verify`]. `bound_ok` is `None` for standard notes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub authentic: bool,
    pub key_consistent: bool,
    pub bound_ok: Option<bool>,
    pub overall: Verdict,
}

impl VerifyReport {
    pub fn accepted(&self) -> bool {
        self.overall == Verdict::Accept
    }
}

/// Everything a merchant checks before accepting a note with no network.
///
/// All three checks always run so the report is complete. When several fail,
/// the reason reported is the first in this order: not bound, key mismatch,
/// not authentic, wrong merchant, stale epoch, bad endorsement.
pub fn offline_verify(
    note: &CashNote,
    expected_merchant: &MerchantId,
    accepted_epochs: &[(EpochId, PublicKey)],
    mint_public: &PublicKey,
) -> VerifyReport {
    let authentic = verify_issuance(note, mint_public);
    let key_consistent = note.cash_secret.public_key() == note.cash_public;

    let (bound_ok, bound_reason) = match &note.binding {
        None => (None, Some(RejectReason::NotMerchantBound)),
        Some(binding) if binding.merchant_id != *expected_merchant => {
            (Some(false), Some(RejectReason::WrongMerchant))
        }
        Some(binding) => match accepted_epochs.iter().find(|(id, _)| *id == binding.epoch_id) {
            None => (Some(false), Some(RejectReason::StaleEpoch)),
            Some((_, key)) => {
                let ok = verify_endorsement(note, key).unwrap_or(false);
                (Some(ok), (!ok).then_some(RejectReason::BadEndorsement))
            }
        },
    };

    let overall = if bound_reason == Some(RejectReason::NotMerchantBound) {
        Verdict::Reject(RejectReason::NotMerchantBound)
    } else if !key_consistent {
        Verdict::Reject(RejectReason::KeyMismatch)
    } else if !authentic {
        Verdict::Reject(RejectReason::NotAuthentic)
    } else if let Some(reason) = bound_reason {
        Verdict::Reject(reason)
    } else {
        Verdict::Accept
    };

    VerifyReport { authentic, key_consistent, bound_ok, overall }
}
