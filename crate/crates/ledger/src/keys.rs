//! Everything the ledger would otherwise draw from an RNG is derived from the
//! mint seed and the sequence number of the event that introduces it. Folding
//! the log with the same seed therefore rebuilds identical secrets, and a
//! recovered ledger keeps producing the same ids a never-crashed one would.

use std::fmt;
use std::str::FromStr;

use pyom_core::{AccountId, CashId, CashKeypair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Root secret of a ledger instance, stored as `mint.seed` in the data
/// directory.
#[derive(Clone, PartialEq, Eq)]
pub struct MintSeed([u8; 32]);

impl MintSeed {
    pub const fn new(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn derive(&self, label: &str, seq: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"PYOM-KDF");
        h.update([label.len() as u8]);
        h.update(label.as_bytes());
        h.update(self.0);
        h.update(seq.to_be_bytes());
        h.finalize().into()
    }

    fn derive16(&self, label: &str, seq: u64) -> [u8; 16] {
        self.derive(label, seq)[..16].try_into().unwrap()
    }

    pub fn mint_keypair(&self) -> CashKeypair {
        CashKeypair::from_seed(self.derive("mint-root", 0))
    }

    pub fn epoch_keypair(&self, seq: u64) -> CashKeypair {
        CashKeypair::from_seed(self.derive("merchant-epoch", seq))
    }

    pub fn account_id(&self, seq: u64) -> AccountId {
        AccountId(self.derive16("account-id", seq))
    }

    pub fn cash_id(&self, seq: u64) -> CashId {
        CashId(self.derive16("cash-id", seq))
    }

    pub fn token(&self, seq: u64) -> Token {
        Token(self.derive("bearer-token", seq))
    }
}

impl fmt::Debug for MintSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MintSeed(..)")
    }
}

/// Opaque bearer token handed out at account creation.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(#[serde(with = "pyom_core::b64::array")] pub [u8; 32]);

impl Token {
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.0).into()
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pyom_core::b64::encode(self.0))
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Token(..)")
    }
}

impl FromStr for Token {
    type Err = pyom_core::b64::FixedDecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        pyom_core::b64::decode_array(s.trim()).map(Token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivations_are_label_and_seq_separated() {
        let seed = MintSeed::new([1; 32]);
        assert_eq!(seed.cash_id(5), seed.cash_id(5));
        assert_ne!(seed.cash_id(5), seed.cash_id(6));
        assert_ne!(seed.cash_id(5).0, seed.account_id(5).0);
        assert_ne!(seed.cash_id(5), MintSeed::new([2; 32]).cash_id(5));
        assert_ne!(seed.epoch_keypair(1).public(), seed.mint_keypair().public());
    }
}
