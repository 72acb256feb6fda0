//! Ledger state as a fold over committed events.
//!
//! [`LedgerState::apply`] never decides anything: it replays an event that the
//! service already validated. Any event that does not fit the current state
//! means the log is corrupt (or was written under a different mint seed).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pyom_core::{AccountId, CashId, Currency, EpochId, MerchantId, NoteKind, PublicKey, SecretSeed};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{ErrorCode, LedgerError};
use crate::events::{AccountKind, EventPayload, LedgerEvent, Record};
use crate::keys::MintSeed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Account {
    pub id: AccountId,
    pub kind: AccountKind,
    pub balance: u64,
    #[serde(skip)]
    pub(crate) token_hash: [u8; 32],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CashStatus {
    Active,
    /// Bound note whose revocation waits for the merchant's next epoch.
    RevokePending { requested_at: u64 },
    Redeemed { payee: AccountId, event: u64, credited: u64 },
    Revoked { event: u64 },
}

impl CashStatus {
    /// Active or revoke-pending: the note's value is still outstanding.
    pub fn is_outstanding(&self) -> bool {
        matches!(self, CashStatus::Active | CashStatus::RevokePending { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CashRecord {
    pub cash_id: CashId,
    pub amount: u64,
    pub cash_public: PublicKey,
    pub creator: AccountId,
    pub kind: NoteKind,
    pub binding: Option<(MerchantId, EpochId)>,
    pub status: CashStatus,
    pub created_at: u64,
}

#[derive(Clone, PartialEq, Eq, Serialize)]
pub struct Epoch {
    pub epoch_id: EpochId,
    pub public: PublicKey,
    #[serde(skip)]
    pub(crate) secret: SecretSeed,
    pub retired: bool,
    pub created_at: u64,
}

impl std::fmt::Debug for Epoch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Epoch")
            .field("epoch_id", &self.epoch_id)
            .field("public", &self.public)
            .field("retired", &self.retired)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerState {
    pub currency: Currency,
    pub next_seq: u64,
    pub accounts: BTreeMap<AccountId, Account>,
    pub cash: BTreeMap<CashId, CashRecord>,
    pub epochs: BTreeMap<MerchantId, Vec<Epoch>>,
    pub allowlists: BTreeMap<MerchantId, BTreeSet<AccountId>>,
    #[serde(skip)]
    tokens: HashMap<[u8; 32], AccountId>,
}

fn corrupt(event: &LedgerEvent, why: &str) -> LedgerError {
    LedgerError::new(ErrorCode::CorruptedLog, format!("event {} does not apply: {why}", event.seq))
}

impl LedgerState {
    pub fn new(currency: Currency) -> Self {
        Self {
            currency,
            next_seq: 0,
            accounts: BTreeMap::new(),
            cash: BTreeMap::new(),
            epochs: BTreeMap::new(),
            allowlists: BTreeMap::new(),
            tokens: HashMap::new(),
        }
    }

    pub fn fold<'a>(
        seed: &MintSeed,
        currency: Currency,
        records: impl IntoIterator<Item = &'a Record>,
    ) -> Result<Self, LedgerError> {
        let mut state = Self::new(currency);
        for record in records {
            for event in record {
                state.apply(seed, event)?;
            }
        }
        Ok(state)
    }

    pub fn account_for_token(&self, token_hash: &[u8; 32]) -> Option<&Account> {
        self.tokens.get(token_hash).and_then(|id| self.accounts.get(id))
    }

    pub fn current_epoch(&self, merchant: &MerchantId) -> Option<&Epoch> {
        self.epochs.get(merchant).and_then(|e| e.last())
    }

    pub fn is_merchant(&self, id: &AccountId) -> bool {
        self.accounts.get(id).is_some_and(|a| a.kind == AccountKind::Merchant)
    }

    /// Σ balances + Σ outstanding note values.
    pub fn total_value(&self) -> u128 {
        let balances: u128 = self.accounts.values().map(|a| a.balance as u128).sum();
        let outstanding: u128 = self
            .cash
            .values()
            .filter(|c| c.status.is_outstanding())
            .map(|c| c.amount as u128)
            .sum();
        balances + outstanding
    }

    /// SHA-256 over a canonical rendering of all public state.
    pub fn state_hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        Sha256::digest(bytes).into()
    }

    fn account_mut(&mut self, id: &AccountId, event: &LedgerEvent) -> Result<&mut Account, LedgerError> {
        self.accounts.get_mut(id).ok_or_else(|| corrupt(event, "unknown account"))
    }

    fn credit(&mut self, id: &AccountId, amount: u64, event: &LedgerEvent) -> Result<(), LedgerError> {
        let account = self.account_mut(id, event)?;
        account.balance =
            account.balance.checked_add(amount).ok_or_else(|| corrupt(event, "balance overflow"))?;
        Ok(())
    }

    pub fn apply(&mut self, seed: &MintSeed, event: &LedgerEvent) -> Result<(), LedgerError> {
        if event.seq != self.next_seq {
            return Err(corrupt(event, &format!("expected seq {}", self.next_seq)));
        }
        match &event.payload {
            EventPayload::AccountCreated { account_id, kind, initial_balance, token_hash, epoch_public } => {
                if self.accounts.contains_key(account_id) || self.tokens.contains_key(token_hash) {
                    return Err(corrupt(event, "duplicate account"));
                }
                match (kind, epoch_public) {
                    (AccountKind::Merchant, Some(public)) => {
                        let keys = seed.epoch_keypair(event.seq);
                        if keys.public() != *public {
                            return Err(corrupt(event, "epoch key does not match mint seed"));
                        }
                        self.epochs.insert(
                            *account_id,
                            vec![Epoch {
                                epoch_id: 1,
                                public: *public,
                                secret: keys.secret().clone(),
                                retired: false,
                                created_at: event.seq,
                            }],
                        );
                    }
                    (AccountKind::User, None) => {}
                    _ => return Err(corrupt(event, "epoch key iff merchant")),
                }
                self.tokens.insert(*token_hash, *account_id);
                self.accounts.insert(
                    *account_id,
                    Account { id: *account_id, kind: *kind, balance: *initial_balance, token_hash: *token_hash },
                );
            }
            EventPayload::CashIssued { cash_id, creator, amount, cash_public, kind, binding } => {
                if self.cash.contains_key(cash_id) || *amount == 0 {
                    return Err(corrupt(event, "duplicate or zero-value note"));
                }
                if (*kind == NoteKind::MerchantBound) != binding.is_some() {
                    return Err(corrupt(event, "binding iff merchant-bound"));
                }
                if let Some((merchant, epoch)) = binding {
                    let known = self.epochs.get(merchant).is_some_and(|e| e.iter().any(|x| x.epoch_id == *epoch));
                    if !known {
                        return Err(corrupt(event, "binding names unknown epoch"));
                    }
                }
                let account = self.account_mut(creator, event)?;
                account.balance =
                    account.balance.checked_sub(*amount).ok_or_else(|| corrupt(event, "overdraft"))?;
                self.cash.insert(
                    *cash_id,
                    CashRecord {
                        cash_id: *cash_id,
                        amount: *amount,
                        cash_public: *cash_public,
                        creator: *creator,
                        kind: *kind,
                        binding: *binding,
                        status: CashStatus::Active,
                        created_at: event.seq,
                    },
                );
            }
            EventPayload::CashRedeemed { cash_id, payee, credited } => {
                let record = self.cash.get_mut(cash_id).ok_or_else(|| corrupt(event, "unknown note"))?;
                if !record.status.is_outstanding() || *credited == 0 || *credited > record.amount {
                    return Err(corrupt(event, "note not redeemable for that amount"));
                }
                record.status = CashStatus::Redeemed { payee: *payee, event: event.seq, credited: *credited };
                self.credit(payee, *credited, event)?;
            }
            EventPayload::ChangeReturned { cash_id, creator, amount } => {
                let record = self.cash.get(cash_id).ok_or_else(|| corrupt(event, "unknown note"))?;
                let ok = match record.status {
                    CashStatus::Redeemed { credited, .. } => {
                        record.creator == *creator && credited.checked_add(*amount) == Some(record.amount)
                    }
                    _ => false,
                };
                if !ok || *amount == 0 {
                    return Err(corrupt(event, "change does not complete a partial redemption"));
                }
                self.credit(creator, *amount, event)?;
            }
            EventPayload::RevocationRequested { cash_id } => {
                let record = self.cash.get_mut(cash_id).ok_or_else(|| corrupt(event, "unknown note"))?;
                if record.status != CashStatus::Active || record.kind != NoteKind::MerchantBound {
                    return Err(corrupt(event, "only active bound notes go pending"));
                }
                record.status = CashStatus::RevokePending { requested_at: event.seq };
            }
            EventPayload::CashRevoked { cash_id, creator, refunded } => {
                let record = self.cash.get_mut(cash_id).ok_or_else(|| corrupt(event, "unknown note"))?;
                if !record.status.is_outstanding() || record.creator != *creator || record.amount != *refunded {
                    return Err(corrupt(event, "revocation does not match note"));
                }
                record.status = CashStatus::Revoked { event: event.seq };
                self.credit(creator, *refunded, event)?;
            }
            EventPayload::EpochRotated { merchant_id, epoch_id, epoch_public } => {
                let keys = seed.epoch_keypair(event.seq);
                let epochs = self.epochs.get_mut(merchant_id).ok_or_else(|| corrupt(event, "unknown merchant"))?;
                let last = epochs.last_mut().expect("merchants start with epoch 1");
                if *epoch_id != last.epoch_id + 1 || keys.public() != *epoch_public {
                    return Err(corrupt(event, "epoch out of sequence or key mismatch"));
                }
                last.retired = true;
                epochs.push(Epoch {
                    epoch_id: *epoch_id,
                    public: *epoch_public,
                    secret: keys.secret().clone(),
                    retired: false,
                    created_at: event.seq,
                });
            }
            EventPayload::SettlementProcessed { merchant_id, .. } => {
                if !self.is_merchant(merchant_id) {
                    return Err(corrupt(event, "unknown merchant"));
                }
            }
            EventPayload::AllowlistUpdated { merchant_id, allowed } => {
                if !self.is_merchant(merchant_id) {
                    return Err(corrupt(event, "unknown merchant"));
                }
                self.allowlists.insert(*merchant_id, allowed.iter().copied().collect());
            }
        }
        self.next_seq += 1;
        Ok(())
    }
}
