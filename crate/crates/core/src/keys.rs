//! Ed25519 keys and detached signatures.
//!
//! Every key in the system (mint root, merchant epochs, per-note cash keys) is
//! a 32-byte seed with a 32-byte verification key; signatures are 64 bytes and
//! deterministic.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::b64::byte_newtype;

byte_newtype!(
    /// Ed25519 verification key.
    PublicKey,
    32
);

byte_newtype!(
    /// Detached Ed25519 signature.
    Signature,
    64
);

/// 32-byte signing seed. `Debug` never prints the bytes.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SecretSeed(#[serde(with = "crate::b64::array")] pub [u8; 32]);

impl SecretSeed {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(SigningKey::from_bytes(&self.0).verifying_key().to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(SigningKey::from_bytes(&self.0).sign(message).to_bytes())
    }
}

impl fmt::Debug for SecretSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretSeed(..)")
    }
}

/// A signing seed together with its derived verification key.
#[derive(Clone, PartialEq, Eq)]
pub struct CashKeypair {
    secret: SecretSeed,
    public: PublicKey,
}

impl CashKeypair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let secret = SecretSeed(seed);
        let public = secret.public_key();
        Self { secret, public }
    }

    pub fn secret(&self) -> &SecretSeed {
        &self.secret
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        self.secret.sign(message)
    }
}

impl fmt::Debug for CashKeypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CashKeypair").field("public", &self.public).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("entropy must be exactly 32 bytes, got {0}")]
    InvalidArgument(usize),
}

impl KeyError {
    pub fn code(&self) -> &'static str {
        "invalid-argument"
    }
}

/// Builds the keypair for a new note from caller-supplied entropy.
///
/// The function is deterministic: the caller is responsible for drawing the
/// entropy from a cryptographically secure source.
pub fn generate_cash_keypair(entropy: &[u8]) -> Result<CashKeypair, KeyError> {
    let seed: [u8; 32] = entropy.try_into().map_err(|_| KeyError::InvalidArgument(entropy.len()))?;
    Ok(CashKeypair::from_seed(seed))
}

/// Strict Ed25519 verification. Malformed keys and non-canonical signatures
/// verify as `false`.
pub fn verify(public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(&public.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}
