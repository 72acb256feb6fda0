#![allow(dead_code)]

use pyom_core::{
    assemble_note, generate_cash_keypair, redeem_signature, AccountId, CashNote, Currency,
    MerchantId, MoneyAmount, NoteKind, Signature,
};
use pyom_ledger::{AccountKind, Ledger, MintSeed, Token};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const SEED: MintSeed = MintSeed::new([7; 32]);

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

/// Client side of printing: fresh keypair, ask the ledger, assemble.
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
    ) -> Result<CashNote, pyom_ledger::LedgerError> {
        let mut entropy = [0u8; 32];
        self.rng.fill_bytes(&mut entropy);
        let keys = generate_cash_keypair(&entropy).unwrap();
        let kind = if target.is_some() { NoteKind::MerchantBound } else { NoteKind::Standard };
        let issued = ledger.issue_cash(&payer.token, usd(cents), keys.public(), kind, target)?;
        Ok(assemble_note(&keys, usd(cents), issued))
    }
}

pub fn sig_for(note: &CashNote, payee: &AccountId) -> Signature {
    redeem_signature(&note.cash_secret, &note.cash_id, payee)
}

pub fn cents(ledger: &Ledger, id: &AccountId) -> u64 {
    ledger.balance(id).unwrap().minor_units
}

/// Drives `steps` random operations (many of them invalid) against `ledger`,
/// calling `check` after each one.
pub fn random_ops(ledger: &Ledger, seed: u64, steps: usize, mut check: impl FnMut(&Ledger, usize)) {
    use rand::seq::SliceRandom;
    use rand::Rng;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut printer = Printer::new(seed ^ 0x5eed);
    let mut users: Vec<Party> = (0..3).map(|_| user(ledger, 10_000)).collect();
    let merchants: Vec<Party> = (0..2).map(|_| merchant(ledger)).collect();
    let mut notes: Vec<(CashNote, usize)> = Vec::new();

    for step in 0..steps {
        match rng.gen_range(0..10) {
            0 if users.len() < 8 => users.push(user(ledger, rng.gen_range(0..5_000))),
            0..=2 => {
                let payer = rng.gen_range(0..users.len());
                let target = rng.gen_bool(0.4).then(|| merchants.choose(&mut rng).unwrap().id);
                if let Ok(n) = printer.print(ledger, &users[payer], rng.gen_range(1..3_000), target) {
                    notes.push((n, payer));
                }
            }
            3 | 4 if !notes.is_empty() => {
                let (note, _) = notes.choose(&mut rng).unwrap();
                let payee = match &note.binding {
                    Some(b) if rng.gen_bool(0.9) => b.merchant_id,
                    _ => users.choose(&mut rng).unwrap().id,
                };
                let sig = if rng.gen_bool(0.9) { sig_for(note, &payee) } else { Signature([1; 64]) };
                let _ = ledger.redeem_cash(&note.cash_id, &payee, &sig);
            }
            5 if !notes.is_empty() => {
                let (note, creator) = notes.choose(&mut rng).unwrap();
                let who = if rng.gen_bool(0.8) { *creator } else { rng.gen_range(0..users.len()) };
                let _ = ledger.revoke_cash(&note.cash_id, &users[who].token);
            }
            6 => {
                let m = merchants.choose(&mut rng).unwrap();
                let _ = ledger.rotate_merchant_epoch(&m.id, &m.token);
            }
            7 if !notes.is_empty() => {
                let m = merchants.choose(&mut rng).unwrap();
                let receipts: Vec<_> = (0..rng.gen_range(1..5))
                    .map(|_| {
                        let (note, _) = notes.choose(&mut rng).unwrap();
                        pyom_ledger::api::OfflineReceipt {
                            note: pyom_core::encode_note(note).unwrap().into_bytes(),
                            payee_merchant: m.id,
                            redeem_sig: sig_for(note, &m.id),
                            accepted_at: step as u64,
                        }
                    })
                    .collect();
                let _ = ledger.settle_offline_receipts(&m.id, &m.token, &receipts);
            }
            8 if !notes.is_empty() => {
                let payee = users.choose(&mut rng).unwrap().id;
                let batch: Vec<_> = (0..rng.gen_range(1..4))
                    .map(|_| {
                        let (note, _) = notes.choose(&mut rng).unwrap();
                        pyom_ledger::api::BatchNote { cash_id: note.cash_id, redeem_sig: sig_for(note, &payee) }
                    })
                    .collect();
                let _ = ledger.redeem_batch_with_change(&batch, usd(rng.gen_range(1..6_000)), &payee);
            }
            _ => {
                let (a, b) = (rng.gen_range(0..users.len()), rng.gen_range(0..users.len()));
                let _ = ledger.balance(&users[a].id);
                // Unauthorized attempt: someone else's token on a merchant.
                let _ = ledger.rotate_merchant_epoch(&merchants[0].id, &users[b].token);
            }
        }
        check(ledger, step);
    }
}
