//! Oracles that check the service by independent means.

use std::collections::{BTreeMap, HashMap};

use pyom_core::{decode_note, AccountId, CashId, Currency, MerchantId};
use pyom_ledger::api::{
    LedgerApi, OfflineReceipt, ReceiptOutcome, ReceiptResult, RedeemRequest, SettleReason,
};
use pyom_ledger::{ErrorCode, EventPayload, Ledger, LedgerError, MemLog, MintSeed};
use serde::{Deserialize, Serialize};

use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub agrees: bool,
    /// Steps at which an observation was compared.
    pub steps_checked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<Divergence>,
}

/// Recomputes balances and outstanding note value from the trace's events
/// alone, and at every step where the service was observed checks that
///
/// * Σ balances + Σ outstanding equals everything ever minted, and
/// * both sums match what the service reported.
///
/// Shares no code with the ledger's own fold.
pub fn conservation_oracle(trace: &Trace) -> OracleReport {
    let mut balances: HashMap<AccountId, i128> = HashMap::new();
    let mut notes: HashMap<CashId, (i128, bool)> = HashMap::new();
    let mut minted: i128 = 0;
    let mut steps_checked = 0;
    let diverge = |step, detail: String, steps_checked| OracleReport {
        agrees: false,
        steps_checked,
        first_divergence: Some(Divergence { step, detail }),
    };

    for entry in &trace.entries {
        for event in &entry.events {
            match &event.payload {
                EventPayload::AccountCreated { account_id, initial_balance, .. } => {
                    balances.insert(*account_id, *initial_balance as i128);
                    minted += *initial_balance as i128;
                }
                EventPayload::CashIssued { cash_id, creator, amount, .. } => {
                    *balances.entry(*creator).or_default() -= *amount as i128;
                    notes.insert(*cash_id, (*amount as i128, true));
                }
                EventPayload::CashRedeemed { cash_id, payee, credited } => {
                    if let Some(n) = notes.get_mut(cash_id) {
                        n.1 = false;
                    }
                    *balances.entry(*payee).or_default() += *credited as i128;
                }
                EventPayload::ChangeReturned { creator, amount, .. } => {
                    *balances.entry(*creator).or_default() += *amount as i128;
                }
                EventPayload::CashRevoked { cash_id, creator, refunded } => {
                    if let Some(n) = notes.get_mut(cash_id) {
                        n.1 = false;
                    }
                    *balances.entry(*creator).or_default() += *refunded as i128;
                }
                EventPayload::RevocationRequested { .. }
                | EventPayload::EpochRotated { .. }
                | EventPayload::SettlementProcessed { .. }
                | EventPayload::AllowlistUpdated { .. } => {}
            }
        }
        let Some(observed) = &entry.observed else { continue };
        steps_checked += 1;

        let total: i128 = balances.values().sum();
        let outstanding: i128 = notes.values().filter(|n| n.1).map(|n| n.0).sum();
        if total + outstanding != minted {
            return diverge(
                entry.step,
                format!("balances {total} + outstanding {outstanding} != minted {minted}"),
                steps_checked,
            );
        }
        if outstanding != observed.outstanding as i128 {
            return diverge(
                entry.step,
                format!("outstanding {outstanding}, service reports {}", observed.outstanding),
                steps_checked,
            );
        }
        let ours: BTreeMap<AccountId, i128> = balances.iter().map(|(k, v)| (*k, *v)).collect();
        let theirs: BTreeMap<AccountId, i128> = observed.balances.iter().map(|(k, v)| (*k, *v as i128)).collect();
        if ours != theirs {
            let which = ours
                .keys()
                .chain(theirs.keys())
                .find(|k| ours.get(k) != theirs.get(k))
                .expect("maps differ");
            return diverge(
                entry.step,
                format!("balance of {which}: {:?}, service reports {:?}", ours.get(which), theirs.get(which)),
                steps_checked,
            );
        }
    }
    OracleReport { agrees: true, steps_checked, first_divergence: None }
}

/// What settling `receipts` for `merchant` should produce: each receipt is
/// checked for shape and binding, then redeemed one at a time through the
/// public API of a shadow ledger recovered from `log`.
pub fn replay_oracle(
    seed: &MintSeed,
    currency: Currency,
    log: &[u8],
    merchant: &MerchantId,
    receipts: &[OfflineReceipt],
) -> Result<Vec<ReceiptResult>, LedgerError> {
    let shadow = Ledger::recover(seed.clone(), currency, Box::new(MemLog::from_bytes(log.to_vec())))?;
    let api: &dyn LedgerApi = &shadow;
    let rejected = |cash_id, reason| ReceiptResult { cash_id, outcome: ReceiptOutcome::Rejected { reason } };

    Ok(receipts
        .iter()
        .map(|r| {
            let Ok(note) = decode_note(&r.note) else {
                return rejected(None, SettleReason::Malformed);
            };
            let id = Some(note.cash_id);
            let Some(binding) = note.binding else {
                return rejected(id, SettleReason::NotMerchantBound);
            };
            if binding.merchant_id != *merchant || r.payee_merchant != *merchant {
                return rejected(id, SettleReason::WrongMerchant);
            }
            let req = RedeemRequest { cash_id: note.cash_id, payee: *merchant, redeem_sig: r.redeem_sig };
            match api.redeem(&req) {
                Ok(resp) => ReceiptResult { cash_id: id, outcome: ReceiptOutcome::Settled { credited: resp.credited } },
                Err(e) => rejected(
                    id,
                    match e.ledger_code() {
                        Some(ErrorCode::UnknownCash) => SettleReason::UnknownCash,
                        Some(ErrorCode::AlreadyRedeemed) => SettleReason::DoubleSpent,
                        Some(ErrorCode::AlreadyRevoked) => SettleReason::Revoked,
                        Some(ErrorCode::WrongMerchant) => SettleReason::WrongMerchant,
                        _ => SettleReason::BadSignature,
                    },
                ),
            }
        })
        .collect())
}
