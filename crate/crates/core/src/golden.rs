//! Fixed conformance vectors for independent codec implementations.
//!
//! The set is generated from fixed seeds, so it is reproducible bit for bit.
//! `golden_vectors.json` at the crate root is the checked-in rendering; a test
//! fails if it drifts from [`golden_vectors`].

use serde::{Deserialize, Serialize};

use crate::amount::{Currency, MoneyAmount};
use crate::codec::{decode_note, encode_note};
use crate::ids::{AccountId, CashId, EpochId};
use crate::issue::{sign_endorsement, sign_issuance};
use crate::keys::{CashKeypair, PublicKey, Signature};
use crate::messages::{redeem_message, redeem_signature};
use crate::note::{CashNote, MerchantBinding, NoteKind};
use crate::verify::{offline_verify, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenSet {
    pub mint_public: PublicKey,
    pub merchant_id: AccountId,
    pub epochs: Vec<(EpochId, PublicKey)>,
    pub vectors: Vec<GoldenVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenVector {
    pub name: String,
    pub payload_hex: String,
    pub text: String,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // test data, built once
pub enum Expected {
    Note {
        kind: NoteKind,
        currency: Currency,
        minor_units: u64,
        cash_id: CashId,
        cash_public: PublicKey,
        issuance_sig: Signature,
        binding: Option<MerchantBinding>,
        /// Verdict of offline verification at `GoldenSet::merchant_id` with
        /// `GoldenSet::epochs` accepted.
        offline: Verdict,
        redeem: RedeemVector,
    },
    Error {
        code: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedeemVector {
    pub payee: AccountId,
    pub message_hex: String,
    pub signature: Signature,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn vector(name: &str, bytes: Vec<u8>, set: &GoldenSet) -> GoldenVector {
    let payload = crate::b64::encode(&bytes);
    let expected = match decode_note(&bytes) {
        Err(err) => Expected::Error { code: err.code().to_owned() },
        Ok(note) => {
            let payee = AccountId([0xEE; 16]);
            Expected::Note {
                kind: note.kind(),
                currency: note.amount.currency,
                minor_units: note.amount.minor_units,
                cash_id: note.cash_id,
                cash_public: note.cash_public,
                issuance_sig: note.issuance_sig,
                binding: note.binding,
                offline: offline_verify(&note, &set.merchant_id, &set.epochs, &set.mint_public)
                    .overall,
                redeem: RedeemVector {
                    payee,
                    message_hex: hex(&redeem_message(&note.cash_id, &payee)),
                    signature: redeem_signature(&note.cash_secret, &note.cash_id, &payee),
                },
            }
        }
    };
    GoldenVector {
        name: name.to_owned(),
        payload_hex: hex(&bytes),
        text: format!("{}{payload}", crate::codec::TEXT_PREFIX),
        expected,
    }
}

pub fn golden_vectors() -> GoldenSet {
    let mint = CashKeypair::from_seed([0x4D; 32]);
    let epoch1 = CashKeypair::from_seed([0xE1; 32]);
    let epoch2 = CashKeypair::from_seed([0xE2; 32]);
    let merchant = AccountId([0x3A; 16]);
    let other_merchant = AccountId([0x3B; 16]);
    let mut set = GoldenSet {
        mint_public: mint.public(),
        merchant_id: merchant,
        epochs: vec![(2, epoch2.public())],
        vectors: Vec::new(),
    };

    let make = |seed: u8, minor_units: u64, bind: Option<(AccountId, EpochId, &CashKeypair)>| {
        let cash = CashKeypair::from_seed([seed; 32]);
        let amount = MoneyAmount::new(minor_units, Currency::USD);
        let cash_id = CashId([seed.wrapping_add(1); 16]);
        let kind = if bind.is_some() { NoteKind::MerchantBound } else { NoteKind::Standard };
        let issuance_sig = sign_issuance(mint.secret(), kind, &amount, &cash_id, &cash.public());
        let binding = bind.map(|(m, epoch, key)| {
            sign_endorsement(key.secret(), &cash_id, &amount, &cash.public(), m, epoch)
        });
        CashNote {
            cash_id,
            amount,
            cash_secret: cash.secret().clone(),
            cash_public: cash.public(),
            issuance_sig,
            binding,
        }
    };
    let bytes = |note: &CashNote| encode_note(note).expect("valid note").into_bytes();

    let standard = bytes(&make(0x10, 1000, None));
    let bound = bytes(&make(0x20, 1000, Some((merchant, 2, &epoch2))));
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("standard-10.00", standard.clone()),
        ("standard-0.01", bytes(&make(0x11, 1, None))),
        ("standard-max", bytes(&make(0x12, u64::MAX, None))),
        ("bound-10.00-current-epoch", bound.clone()),
        ("bound-stale-epoch", bytes(&make(0x21, 1000, Some((merchant, 1, &epoch1))))),
        ("bound-other-merchant", bytes(&make(0x22, 750, Some((other_merchant, 2, &epoch2))))),
        ("bound-tampered-value", {
            let mut b = bound.clone();
            b[16] ^= 0x01;
            b
        }),
        ("empty", Vec::new()),
        ("truncated", standard[..128].to_vec()),
        ("trailing-bytes", [standard.as_slice(), &[0]].concat()),
        ("bad-magic", [b"PYOX".as_slice(), &standard[4..]].concat()),
        ("bad-version", {
            let mut b = standard.clone();
            b[4] = 0x02;
            b
        }),
        ("bad-kind", {
            let mut b = standard.clone();
            b[5] = 0x02;
            b
        }),
        ("bad-currency", {
            let mut b = standard.clone();
            b[6] = b'u';
            b
        }),
        ("zero-amount", {
            let mut b = standard.clone();
            b[9..17].fill(0);
            b
        }),
    ];
    let vectors = cases.into_iter().map(|(name, b)| vector(name, b, &set)).collect();
    set.vectors = vectors;
    set
}
