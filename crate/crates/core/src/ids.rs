use crate::b64::byte_newtype;

byte_newtype!(
    /// Ledger-assigned note identifier.
    CashId,
    16
);

byte_newtype!(
    /// Account identifier. Merchant accounts use the same space, so a
    /// merchant id is simply the merchant's account id.
    AccountId,
    16
);

pub type MerchantId = AccountId;

/// Merchant epoch counter; the first epoch is 1.
pub type EpochId = u32;
