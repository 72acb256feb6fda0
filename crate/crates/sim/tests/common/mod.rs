#![allow(dead_code)]

use pyom_core::{
    assemble_note, encode_note, generate_cash_keypair, redeem_signature, AccountId, CashNote, Currency,
    MerchantId, MoneyAmount, NoteKind,
};
use pyom_ledger::api::OfflineReceipt;
use pyom_ledger::{AccountKind, Ledger, LedgerError, MintSeed, Token};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const SEED: MintSeed = MintSeed::new([3; 32]);

pub fn usd(cents: u64) -> MoneyAmount {
    MoneyAmount::new(cents, Currency::USD)
}

pub struct Party {
    pub id: AccountId,
    pub token: Token,
}

pub fn user(ledger: &Ledger, cents: u64) -> Party {
    let (id, token) = ledger.create_account(AccountKind::User, usd(cents)).unwrap();
    Party { id, token }
}

pub fn merchant(ledger: &Ledger) -> Party {
    let (id, token) = ledger.create_account(AccountKind::Merchant, usd(0)).unwrap();
    Party { id, token }
}

pub fn cents(ledger: &Ledger, id: &AccountId) -> u64 {
    Ledger::balance(ledger, id).unwrap().minor_units
}

/// Client side of printing, with its own deterministic entropy.
pub struct Printer {
    rng: ChaCha20Rng,
}

impl Printer {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn print(
        &mut self,
        ledger: &Ledger,
        payer: &Party,
        cents: u64,
        target: Option<MerchantId>,
    ) -> Result<CashNote, LedgerError> {
        let mut entropy = [0u8; 32];
        self.rng.fill_bytes(&mut entropy);
        let keys = generate_cash_keypair(&entropy).unwrap();
        let kind = if target.is_some() { NoteKind::MerchantBound } else { NoteKind::Standard };
        let issued = ledger.issue_cash(&payer.token, usd(cents), keys.public(), kind, target)?;
        Ok(assemble_note(&keys, usd(cents), issued))
    }
}

pub fn receipt(note: &CashNote, payee: &MerchantId) -> OfflineReceipt {
    OfflineReceipt {
        note: encode_note(note).unwrap().into_bytes(),
        payee_merchant: *payee,
        redeem_sig: redeem_signature(&note.cash_secret, &note.cash_id, payee),
        accepted_at: 0,
    }
}
