//! Signing side of issuance: what the ledger produces and how a wallet
//! assembles the final note from it.

use serde::{Deserialize, Serialize};

use crate::amount::MoneyAmount;
use crate::ids::{CashId, EpochId, MerchantId};
use crate::keys::{CashKeypair, PublicKey, SecretSeed, Signature};
use crate::messages::{endorsement_message, issuance_message};
use crate::note::{CashNote, MerchantBinding, NoteKind};

pub fn sign_issuance(
    mint_secret: &SecretSeed,
    kind: NoteKind,
    amount: &MoneyAmount,
    cash_id: &CashId,
    cash_public: &PublicKey,
) -> Signature {
    mint_secret.sign(&issuance_message(kind, amount, cash_id, cash_public))
}

pub fn sign_endorsement(
    epoch_secret: &SecretSeed,
    cash_id: &CashId,
    amount: &MoneyAmount,
    cash_public: &PublicKey,
    merchant_id: MerchantId,
    epoch_id: EpochId,
) -> MerchantBinding {
    let message = endorsement_message(cash_id, amount, cash_public, &merchant_id, epoch_id);
    MerchantBinding { merchant_id, epoch_id, endorsement_sig: epoch_secret.sign(&message) }
}

/// What the ledger hands back for a successful issue request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedMaterials {
    pub cash_id: CashId,
    pub issuance_sig: Signature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<MerchantBinding>,
}

/// Combines the wallet's locally generated keypair with the ledger's
/// signatures into a printable note.
pub fn assemble_note(keypair: &CashKeypair, amount: MoneyAmount, issued: IssuedMaterials) -> CashNote {
    CashNote {
        cash_id: issued.cash_id,
        amount,
        cash_secret: keypair.secret().clone(),
        cash_public: keypair.public(),
        issuance_sig: issued.issuance_sig,
        binding: issued.binding,
    }
}
