//! Canonical note encoding.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PYOM"
//!      4     1  version 0x01
//!      5     1  kind (0x00 standard, 0x01 merchant-bound)
//!      6     3  currency, ASCII uppercase
//!      9     8  minor_units, big-endian
//!     17    16  cash_id
//!     33    32  cash_secret
//!     65    64  issuance_sig                       (standard ends at 129)
//!    129    16  merchant_id                         (bound only)
//!    145     4  epoch_id, big-endian                (bound only)
//!    149    64  endorsement_sig                     (bound ends at 213)
//! ```
//!
//! The verification key is not stored; decoding derives it from the secret.
//! The text form is `PYOM1:` followed by the unpadded base64url of the bytes
//! and is exactly what goes into the QR code.

use std::fmt;

use crate::amount::{Currency, MoneyAmount};
use crate::b64;
use crate::ids::{AccountId, CashId};
use crate::keys::{SecretSeed, Signature};
use crate::note::{CashNote, MerchantBinding, NoteError, NoteKind};

pub const MAGIC: &[u8; 4] = b"PYOM";
pub const VERSION: u8 = 0x01;
pub const TEXT_PREFIX: &str = "PYOM1:";

pub const STANDARD_LEN: usize = 129;
pub const MERCHANT_BOUND_LEN: usize = 213;
/// Capacity of the NFC tags notes are written to.
pub const NFC_BUDGET: usize = 888;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("invalid note: {0}")]
    InvalidNote(#[from] NoteError),
    #[error("payload does not start with the note magic")]
    BadMagic,
    #[error("unsupported payload version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown note kind {0:#04x}")]
    BadKind(u8),
    #[error("payload truncated: need {needed} bytes, have {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("payload has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("currency is not three uppercase ASCII letters")]
    BadCurrency,
    #[error("note value is zero")]
    ZeroAmount,
    #[error("text form is not valid base64url")]
    BadText,
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::InvalidNote(_) => "invalid-note",
            CodecError::BadMagic => "bad-magic",
            CodecError::BadVersion(_) => "bad-version",
            CodecError::BadKind(_) => "bad-kind",
            CodecError::Truncated { .. } => "truncated",
            CodecError::TrailingBytes(_) => "trailing-bytes",
            CodecError::BadCurrency => "bad-currency",
            CodecError::ZeroAmount => "zero-amount",
            CodecError::BadText => "bad-text",
        }
    }
}

/// Canonical bytes of one note.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NotePayload {
    bytes: Vec<u8>,
}

impl NotePayload {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// `PYOM1:` + unpadded base64url.
    pub fn text(&self) -> String {
        format!("{TEXT_PREFIX}{}", b64::encode(&self.bytes))
    }

    pub fn decode(&self) -> Result<CashNote, CodecError> {
        decode_note(&self.bytes)
    }
}

impl fmt::Debug for NotePayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NotePayload({} bytes)", self.bytes.len())
    }
}

pub fn encode_note(note: &CashNote) -> Result<NotePayload, CodecError> {
    note.check()?;
    let len = match note.kind() {
        NoteKind::Standard => STANDARD_LEN,
        NoteKind::MerchantBound => MERCHANT_BOUND_LEN,
    };
    let mut bytes = Vec::with_capacity(len);
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.push(note.kind().to_byte());
    bytes.extend_from_slice(note.amount.currency.as_bytes());
    bytes.extend_from_slice(&note.amount.minor_units.to_be_bytes());
    bytes.extend_from_slice(note.cash_id.as_bytes());
    bytes.extend_from_slice(note.cash_secret.as_bytes());
    bytes.extend_from_slice(note.issuance_sig.as_bytes());
    if let Some(binding) = &note.binding {
        bytes.extend_from_slice(binding.merchant_id.as_bytes());
        bytes.extend_from_slice(&binding.epoch_id.to_be_bytes());
        bytes.extend_from_slice(binding.endorsement_sig.as_bytes());
    }
    debug_assert_eq!(bytes.len(), len);
    Ok(NotePayload { bytes })
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.at..self.at + N].try_into().expect("length checked up front");
        self.at += N;
        out
    }
}

/// Structural decode of canonical bytes. Signatures are not checked here.
pub fn decode_note(bytes: &[u8]) -> Result<CashNote, CodecError> {
    let truncated = |needed| CodecError::Truncated { needed, actual: bytes.len() };
    if bytes.len() < MAGIC.len() {
        return Err(truncated(MAGIC.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = *bytes.get(4).ok_or(truncated(5))?;
    if version != VERSION {
        return Err(CodecError::BadVersion(version));
    }
    let kind_byte = *bytes.get(5).ok_or(truncated(6))?;
    let kind = NoteKind::from_byte(kind_byte).ok_or(CodecError::BadKind(kind_byte))?;
    let expected = match kind {
        NoteKind::Standard => STANDARD_LEN,
        NoteKind::MerchantBound => MERCHANT_BOUND_LEN,
    };
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(CodecError::TrailingBytes(bytes.len() - expected));
    }

    let mut r = Reader { bytes, at: 6 };
    let currency = Currency::new(r.take::<3>()).map_err(|_| CodecError::BadCurrency)?;
    let minor_units = u64::from_be_bytes(r.take::<8>());
    if minor_units == 0 {
        return Err(CodecError::ZeroAmount);
    }
    let cash_id = CashId(r.take::<16>());
    let cash_secret = SecretSeed(r.take::<32>());
    let issuance_sig = Signature(r.take::<64>());
    let binding = match kind {
        NoteKind::Standard => None,
        NoteKind::MerchantBound => Some(MerchantBinding {
            merchant_id: AccountId(r.take::<16>()),
            epoch_id: u32::from_be_bytes(r.take::<4>()),
            endorsement_sig: Signature(r.take::<64>()),
        }),
    };
    debug_assert_eq!(r.at, expected);

    let cash_public = cash_secret.public_key();
    Ok(CashNote {
        cash_id,
        amount: MoneyAmount::new(minor_units, currency),
        cash_secret,
        cash_public,
        issuance_sig,
        binding,
    })
}

/// Decodes the `PYOM1:` text form. Surrounding whitespace is ignored.
pub fn decode_note_text(text: &str) -> Result<CashNote, CodecError> {
    let body = text.trim().strip_prefix(TEXT_PREFIX).ok_or(CodecError::BadMagic)?;
    let bytes = b64::decode(body).map_err(|_| CodecError::BadText)?;
    decode_note(&bytes)
}

/// Accepts either canonical bytes or the text form, e.g. the contents of
/// `note.bin` or `note.txt`.
pub fn decode_any(input: &[u8]) -> Result<CashNote, CodecError> {
    let trimmed = input.trim_ascii();
    if trimmed.starts_with(TEXT_PREFIX.as_bytes()) {
        let text = std::str::from_utf8(trimmed).map_err(|_| CodecError::BadText)?;
        decode_note_text(text)
    } else {
        decode_note(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::CashKeypair;

    fn sample(bound: bool) -> CashNote {
        let pair = CashKeypair::from_seed([3; 32]);
        CashNote {
            cash_id: CashId([1; 16]),
            amount: MoneyAmount::new(1000, Currency::USD),
            cash_secret: pair.secret().clone(),
            cash_public: pair.public(),
            issuance_sig: Signature([4; 64]),
            binding: bound.then_some(MerchantBinding {
                merchant_id: AccountId([5; 16]),
                epoch_id: 3,
                endorsement_sig: Signature([6; 64]),
            }),
        }
    }

    #[test]
    fn sizes_match_layout() {
        let std = encode_note(&sample(false)).unwrap();
        let bound = encode_note(&sample(true)).unwrap();
        assert_eq!(std.len(), 4 + 1 + 1 + 3 + 8 + 16 + 32 + 64);
        assert_eq!(std.len(), STANDARD_LEN);
        assert_eq!(bound.len(), STANDARD_LEN + 16 + 4 + 64);
        assert_eq!(bound.len(), MERCHANT_BOUND_LEN);
        assert!(bound.len() <= NFC_BUDGET);
    }

    #[test]
    fn field_offsets() {
        let bytes = encode_note(&sample(true)).unwrap().into_bytes();
        assert_eq!(&bytes[0..4], b"PYOM");
        assert_eq!(bytes[4], 0x01);
        assert_eq!(bytes[5], 0x01);
        assert_eq!(&bytes[6..9], b"USD");
        assert_eq!(bytes[9..17], 1000u64.to_be_bytes());
        assert_eq!(bytes[17..33], [1; 16]);
        assert_eq!(bytes[33..65], [3; 32]);
        assert_eq!(bytes[65..129], [4; 64]);
        assert_eq!(bytes[129..145], [5; 16]);
        assert_eq!(bytes[145..149], [0, 0, 0, 3]);
        assert_eq!(bytes[149..213], [6; 64]);
    }

    #[test]
    fn decode_errors() {
        let good = encode_note(&sample(false)).unwrap().into_bytes();
        assert_eq!(decode_note(&[]).unwrap_err().code(), "truncated");
        assert_eq!(decode_note(&good[..100]).unwrap_err().code(), "truncated");
        assert_eq!(decode_note(&good[..5]).unwrap_err().code(), "truncated");

        let mut long = good.clone();
        long.push(0);
        assert_eq!(decode_note(&long).unwrap_err(), CodecError::TrailingBytes(1));

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode_note(&bad).unwrap_err().code(), "bad-magic");

        let mut bad = good.clone();
        bad[4] = 0x02;
        assert_eq!(decode_note(&bad).unwrap_err().code(), "bad-version");

        let mut bad = good.clone();
        bad[5] = 0x07;
        assert_eq!(decode_note(&bad).unwrap_err().code(), "bad-kind");

        let mut bad = good.clone();
        bad[7] = b's';
        assert_eq!(decode_note(&bad).unwrap_err().code(), "bad-currency");

        let mut bad = good;
        bad[9..17].fill(0);
        assert_eq!(decode_note(&bad).unwrap_err().code(), "zero-amount");
    }

    #[test]
    fn standard_kind_byte_with_bound_length_is_trailing() {
        let mut bytes = encode_note(&sample(true)).unwrap().into_bytes();
        bytes[5] = 0x00;
        assert_eq!(decode_note(&bytes).unwrap_err(), CodecError::TrailingBytes(84));
    }

    #[test]
    fn encoder_refuses_inconsistent_notes() {
        let mut note = sample(false);
        note.cash_public = CashKeypair::from_seed([9; 32]).public();
        assert_eq!(encode_note(&note).unwrap_err().code(), "invalid-note");
        let mut note = sample(false);
        note.amount.minor_units = 0;
        assert_eq!(encode_note(&note).unwrap_err().code(), "invalid-note");
    }

    #[test]
    fn text_form() {
        let payload = encode_note(&sample(true)).unwrap();
        let text = payload.text();
        assert!(text.starts_with("PYOM1:"));
        assert!(!text.contains('='));
        assert_eq!(decode_note_text(&text).unwrap(), sample(true));
        assert_eq!(decode_any(format!("  {text}\n").as_bytes()).unwrap(), sample(true));
        assert_eq!(decode_any(payload.as_bytes()).unwrap(), sample(true));
        assert_eq!(decode_note_text("PYOM1:!!").unwrap_err().code(), "bad-text");
        assert_eq!(decode_note_text("HELLO").unwrap_err().code(), "bad-magic");
    }
}
