//! Byte strings that get signed. Each starts with its own ASCII tag so a
//! signature made for one purpose never verifies for another.

use crate::amount::MoneyAmount;
use crate::ids::{AccountId, CashId, EpochId, MerchantId};
use crate::keys::{self, PublicKey, SecretSeed, Signature};
use crate::note::NoteKind;

pub const ISSUE_TAG: &[u8; 10] = b"PYOM-ISSUE";
pub const ENDORSE_TAG: &[u8; 10] = b"PYOM-MERCH";
pub const REDEEM_TAG: &[u8; 11] = b"PYOM-REDEEM";
pub const MESSAGE_VERSION: u8 = 0x01;

pub const ISSUANCE_MESSAGE_LEN: usize = 71;
pub const ENDORSEMENT_MESSAGE_LEN: usize = 90;
pub const REDEEM_MESSAGE_LEN: usize = 43;

/// Fixed-capacity writer; panics if the declared length is wrong, which
/// the unit tests pin.
struct Builder<const N: usize> {
    buf: [u8; N],
    at: usize,
}

impl<const N: usize> Builder<N> {
    fn new() -> Self {
        Self { buf: [0; N], at: 0 }
    }

    fn put(mut self, bytes: &[u8]) -> Self {
        self.buf[self.at..self.at + bytes.len()].copy_from_slice(bytes);
        self.at += bytes.len();
        self
    }

    fn finish(self) -> [u8; N] {
        assert_eq!(self.at, N, "message layout does not fill its buffer");
        self.buf
    }
}

/// `PYOM-ISSUE || 0x01 || kind || currency || minor_units(BE) || cash_id || cash_public`
pub fn issuance_message(
    kind: NoteKind,
    amount: &MoneyAmount,
    cash_id: &CashId,
    cash_public: &PublicKey,
) -> [u8; ISSUANCE_MESSAGE_LEN] {
    Builder::new()
        .put(ISSUE_TAG)
        .put(&[MESSAGE_VERSION, kind.to_byte()])
        .put(amount.currency.as_bytes())
        .put(&amount.minor_units.to_be_bytes())
        .put(cash_id.as_bytes())
        .put(cash_public.as_bytes())
        .finish()
}

/// `PYOM-MERCH || 0x01 || currency || minor_units || cash_id || cash_public || merchant_id || epoch_id(BE)`
pub fn endorsement_message(
    cash_id: &CashId,
    amount: &MoneyAmount,
    cash_public: &PublicKey,
    merchant_id: &MerchantId,
    epoch_id: EpochId,
) -> [u8; ENDORSEMENT_MESSAGE_LEN] {
    Builder::new()
        .put(ENDORSE_TAG)
        .put(&[MESSAGE_VERSION])
        .put(amount.currency.as_bytes())
        .put(&amount.minor_units.to_be_bytes())
        .put(cash_id.as_bytes())
        .put(cash_public.as_bytes())
        .put(merchant_id.as_bytes())
        .put(&epoch_id.to_be_bytes())
        .finish()
}

/// `PYOM-REDEEM || cash_id || payee_account`
pub fn redeem_message(cash_id: &CashId, payee: &AccountId) -> [u8; REDEEM_MESSAGE_LEN] {
    Builder::new().put(REDEEM_TAG).put(cash_id.as_bytes()).put(payee.as_bytes()).finish()
}

/// Signature a payee presents to move a note's value into `payee`.
pub fn redeem_signature(cash_secret: &SecretSeed, cash_id: &CashId, payee: &AccountId) -> Signature {
    cash_secret.sign(&redeem_message(cash_id, payee))
}

pub fn verify_redeem(
    cash_public: &PublicKey,
    cash_id: &CashId,
    payee: &AccountId,
    signature: &Signature,
) -> bool {
    keys::verify(cash_public, &redeem_message(cash_id, payee), signature)
}
