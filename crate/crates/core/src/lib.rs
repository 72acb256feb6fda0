//! Protocol core for self-printed digital cash.
//!
//! A note is a bearer payload holding a per-note Ed25519 secret together with
//! the mint's signature over its value and verification key. Merchant-bound
//! notes additionally carry an endorsement from one merchant's current epoch
//! key, which is what lets that merchant accept the note with no network.
//!
//! Everything here is a pure function of its inputs. Randomness (note
//! entropy) is always supplied by the caller.
//!
//! ```
//! use pyom_core::{
//!     assemble_note, decode_note, encode_note, generate_cash_keypair, sign_issuance,
//!     verify_issuance, CashId, CashKeypair, Currency, IssuedMaterials, MoneyAmount, NoteKind,
//! };
//!
//! let mint = CashKeypair::from_seed([42; 32]);
//! let cash = generate_cash_keypair(&[7; 32]).unwrap();
//! let amount = MoneyAmount::new(1000, Currency::USD);
//! let cash_id = CashId([1; 16]);
//! let issuance_sig =
//!     sign_issuance(mint.secret(), NoteKind::Standard, &amount, &cash_id, &cash.public());
//! let note = assemble_note(&cash, amount, IssuedMaterials { cash_id, issuance_sig, binding: None });
//!
//! let payload = encode_note(&note).unwrap();
//! assert_eq!(payload.len(), 129);
//! let decoded = decode_note(payload.as_bytes()).unwrap();
//! assert!(verify_issuance(&decoded, &mint.public()));
//! ```

pub mod amount;
pub mod b64;
pub mod codec;
pub mod golden;
pub mod ids;
pub mod issue;
pub mod keys;
pub mod messages;
pub mod note;
pub mod verify;

pub use amount::{AmountError, Currency, MoneyAmount};
pub use codec::{
    decode_any, decode_note, decode_note_text, encode_note, CodecError, NotePayload,
    MERCHANT_BOUND_LEN, NFC_BUDGET, STANDARD_LEN, TEXT_PREFIX,
};
pub use ids::{AccountId, CashId, EpochId, MerchantId};
pub use issue::{assemble_note, sign_endorsement, sign_issuance, IssuedMaterials};
pub use keys::{generate_cash_keypair, CashKeypair, KeyError, PublicKey, SecretSeed, Signature};
pub use messages::{
    endorsement_message, issuance_message, redeem_message, redeem_signature, verify_redeem,
};
pub use note::{CashNote, MerchantBinding, NoteError, NoteKind};
pub use verify::{
    offline_verify, verify_endorsement, verify_issuance, NotApplicable, RejectReason, Verdict,
    VerifyReport,
};
