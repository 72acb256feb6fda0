//! The ledger service: validates requests against current state, commits the
//! resulting events to the log, then folds them into memory.
//!
//! All mutations run under one mutex, so every operation is linearizable and
//! multi-note operations are atomic without a lock ordering protocol. The log
//! append is the commit point: if it fails, memory is left untouched.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use parking_lot::Mutex;
use pyom_core::{
    decode_note, sign_endorsement, sign_issuance, verify_redeem, AccountId, CashId, CashKeypair,
    Currency, EpochId, IssuedMaterials, MerchantId, MoneyAmount, NoteKind, PublicKey, Signature,
};
use rand::RngCore;

use crate::api::{
    BatchNote, BatchSettlement, ChangeCredit, EpochResponse, NoteCredit, NoteStatus,
    OfflineReceipt, ReceiptOutcome, ReceiptResult, RevocationOutcome, SettleReason,
};
use crate::error::{err, ErrorCode, LedgerError, NoteFailure};
use crate::events::{AccountKind, EventPayload, LedgerEvent, Record};
use crate::keys::{MintSeed, Token};
use crate::log::{encode_frame, scan, EventLog, FileLog};
use crate::state::{Account, CashRecord, CashStatus, LedgerState};

pub const SEED_FILE: &str = "mint.seed";
pub const LOG_FILE: &str = "events.log";
pub const META_FILE: &str = "ledger.json";

struct Inner {
    seed: MintSeed,
    mint: CashKeypair,
    state: LedgerState,
    log: Box<dyn EventLog>,
    log_len: u64,
    history: Vec<LedgerEvent>,
}

pub struct Ledger {
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.inner.lock();
        f.debug_struct("Ledger")
            .field("currency", &inner.state.currency)
            .field("next_seq", &inner.state.next_seq)
            .finish_non_exhaustive()
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Meta {
    currency: Currency,
}

impl Ledger {
    /// Rebuilds a ledger by folding `log`. A torn final frame is truncated
    /// away; any other damage fails with `corrupted-log`.
    pub fn recover(seed: MintSeed, currency: Currency, mut log: Box<dyn EventLog>) -> Result<Self, LedgerError> {
        let bytes = log.read_all()?;
        let scanned = scan(&bytes)?;
        if scanned.torn_tail {
            tracing::warn!(valid = scanned.valid_len, total = bytes.len(), "truncating torn log tail");
            log.truncate(scanned.valid_len)?;
        }
        let state = LedgerState::fold(&seed, currency, &scanned.records)?;
        let history = scanned.records.into_iter().flatten().collect();
        Ok(Self {
            inner: Mutex::new(Inner {
                mint: seed.mint_keypair(),
                seed,
                state,
                log,
                log_len: scanned.valid_len,
                history,
            }),
        })
    }

    /// A ledger with an empty in-memory log.
    pub fn in_memory(seed: MintSeed, currency: Currency) -> Self {
        Self::recover(seed, currency, Box::new(crate::log::MemLog::new())).expect("empty log folds")
    }

    /// Opens (or initializes) a data directory holding `mint.seed`,
    /// `ledger.json` and `events.log`.
    pub fn open(dir: impl AsRef<Path>, currency: Currency) -> Result<Self, LedgerError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let seed_path = dir.join(SEED_FILE);
        let seed = match fs::read(&seed_path) {
            Ok(bytes) => {
                let bytes: [u8; 32] = bytes.try_into().map_err(|_| {
                    LedgerError::new(ErrorCode::CorruptedLog, format!("{} is not 32 bytes", seed_path.display()))
                })?;
                MintSeed::new(bytes)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let mut bytes = [0u8; 32];
                rand::rngs::OsRng.fill_bytes(&mut bytes);
                write_private(&seed_path, &bytes)?;
                MintSeed::new(bytes)
            }
            Err(e) => return Err(e.into()),
        };

        let meta_path = dir.join(META_FILE);
        match fs::read(&meta_path) {
            Ok(bytes) => {
                let meta: Meta = serde_json::from_slice(&bytes)
                    .map_err(|e| LedgerError::new(ErrorCode::CorruptedLog, format!("ledger.json: {e}")))?;
                if meta.currency != currency {
                    return err(
                        ErrorCode::CurrencyMismatch,
                        format!("data directory holds a {} ledger, not {currency}", meta.currency),
                    );
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                fs::write(&meta_path, serde_json::to_vec(&Meta { currency }).expect("meta serializes"))?;
            }
            Err(e) => return Err(e.into()),
        }

        let log = FileLog::open(dir.join(LOG_FILE))?;
        Self::recover(seed, currency, Box::new(log))
    }

    pub fn currency(&self) -> Currency {
        self.inner.lock().state.currency
    }

    pub fn mint_public(&self) -> PublicKey {
        self.inner.lock().mint.public()
    }

    /// Read access to the folded state.
    pub fn with_state<R>(&self, f: impl FnOnce(&LedgerState) -> R) -> R {
        f(&self.inner.lock().state)
    }

    pub fn state_hash(&self) -> [u8; 32] {
        self.with_state(LedgerState::state_hash)
    }

    pub fn next_seq(&self) -> u64 {
        self.with_state(|s| s.next_seq)
    }

    /// Committed events with `seq >= from`.
    pub fn events_since(&self, from: u64) -> Vec<LedgerEvent> {
        let inner = self.inner.lock();
        inner.history.iter().skip(from as usize).cloned().collect()
    }

    pub fn create_account(&self, kind: AccountKind, initial: MoneyAmount) -> Result<(AccountId, Token), LedgerError> {
        let mut inner = self.inner.lock();
        inner.check_currency(&initial)?;
        let seq = inner.state.next_seq;
        let account_id = inner.seed.account_id(seq);
        let token = inner.seed.token(seq);
        let epoch_public = (kind == AccountKind::Merchant).then(|| inner.seed.epoch_keypair(seq).public());
        inner.commit(vec![EventPayload::AccountCreated {
            account_id,
            kind,
            initial_balance: initial.minor_units,
            token_hash: token.hash(),
            epoch_public,
        }])?;
        Ok((account_id, token))
    }

    pub fn issue_cash(
        &self,
        token: &Token,
        amount: MoneyAmount,
        cash_public: PublicKey,
        kind: NoteKind,
        target_merchant: Option<MerchantId>,
    ) -> Result<IssuedMaterials, LedgerError> {
        let mut inner = self.inner.lock();
        let creator = inner.authenticate(token)?.clone();
        inner.check_currency(&amount)?;
        if amount.is_zero() {
            return err(ErrorCode::ZeroAmount, "notes must have positive value");
        }
        let merchant_epoch = match (kind, target_merchant) {
            (NoteKind::Standard, None) => None,
            (NoteKind::Standard, Some(_)) => {
                return err(ErrorCode::InvalidArgument, "standard notes take no target merchant")
            }
            (NoteKind::MerchantBound, None) => {
                return err(ErrorCode::InvalidArgument, "merchant-bound notes need a target merchant")
            }
            (NoteKind::MerchantBound, Some(merchant)) => {
                let epoch = inner
                    .state
                    .current_epoch(&merchant)
                    .ok_or_else(|| LedgerError::new(ErrorCode::UnknownMerchant, format!("no merchant {merchant}")))?;
                let allowed = inner.state.allowlists.get(&merchant);
                if allowed.is_some_and(|list| !list.is_empty() && !list.contains(&creator.id)) {
                    return err(ErrorCode::NotAllowlisted, format!("merchant {merchant} does not accept notes from {}", creator.id));
                }
                Some((merchant, epoch.epoch_id, epoch.secret.clone()))
            }
        };
        if creator.balance < amount.minor_units {
            return err(
                ErrorCode::InsufficientBalance,
                format!("balance {} is below {amount}", MoneyAmount::new(creator.balance, amount.currency)),
            );
        }

        let cash_id = inner.seed.cash_id(inner.state.next_seq);
        let issuance_sig = sign_issuance(inner.mint.secret(), kind, &amount, &cash_id, &cash_public);
        let binding = merchant_epoch.as_ref().map(|(merchant, epoch_id, secret)| {
            sign_endorsement(secret, &cash_id, &amount, &cash_public, *merchant, *epoch_id)
        });
        inner.commit(vec![EventPayload::CashIssued {
            cash_id,
            creator: creator.id,
            amount: amount.minor_units,
            cash_public,
            kind,
            binding: merchant_epoch.map(|(m, e, _)| (m, e)),
        }])?;
        Ok(IssuedMaterials { cash_id, issuance_sig, binding })
    }

    pub fn redeem_cash(&self, cash_id: &CashId, payee: &AccountId, redeem_sig: &Signature) -> Result<MoneyAmount, LedgerError> {
        let mut inner = self.inner.lock();
        if !inner.state.accounts.contains_key(payee) {
            return err(ErrorCode::UnknownPayee, format!("no account {payee}"));
        }
        let record = inner.state.redeemable(cash_id, payee, redeem_sig, &HashSet::new()).map_err(|code| {
            LedgerError::new(code, format!("note {cash_id} cannot be redeemed to {payee}"))
        })?;
        let amount = record.amount;
        inner.commit(vec![EventPayload::CashRedeemed { cash_id: *cash_id, payee: *payee, credited: amount }])?;
        Ok(MoneyAmount::new(amount, inner.state.currency))
    }

    /// Consumes `notes` in order against `bill`. The note that crosses the bill
    /// splits: its remainder goes back to that note's creator. Notes after it
    /// are an error, as is any note that could not be redeemed on its own.
    pub fn redeem_batch_with_change(
        &self,
        notes: &[BatchNote],
        bill: MoneyAmount,
        payee: &AccountId,
    ) -> Result<BatchSettlement, LedgerError> {
        let mut inner = self.inner.lock();
        inner.check_currency(&bill)?;
        let currency = bill.currency;
        if bill.is_zero() {
            return err(ErrorCode::ZeroAmount, "bill must be positive");
        }
        if notes.is_empty() {
            return err(ErrorCode::InvalidArgument, "batch has no notes");
        }
        if !inner.state.accounts.contains_key(payee) {
            return err(ErrorCode::UnknownPayee, format!("no account {payee}"));
        }

        let mut seen = HashSet::new();
        let mut offending = Vec::new();
        let mut records: Vec<CashRecord> = Vec::with_capacity(notes.len());
        for note in notes {
            if !seen.insert(note.cash_id) {
                offending.push(NoteFailure { cash_id: note.cash_id, error_code: ErrorCode::InvalidArgument });
                continue;
            }
            match inner.state.redeemable(&note.cash_id, payee, &note.redeem_sig, &HashSet::new()) {
                Ok(record) => records.push(record.clone()),
                Err(code) => offending.push(NoteFailure { cash_id: note.cash_id, error_code: code }),
            }
        }
        if !offending.is_empty() {
            return Err(LedgerError {
                error_code: ErrorCode::WholeBatchRejected,
                message: format!("{} of {} notes cannot be redeemed", offending.len(), notes.len()),
                offending,
            });
        }

        let total: u128 = records.iter().map(|r| r.amount as u128).sum();
        if total < bill.minor_units as u128 {
            return err(
                ErrorCode::InsufficientTotal,
                format!("notes total {} minor units, bill is {bill}", total),
            );
        }
        let mut running = 0u64;
        let boundary = records
            .iter()
            .position(|r| {
                running += r.amount;
                running >= bill.minor_units
            })
            .expect("total covers bill");
        if boundary + 1 != records.len() {
            return err(
                ErrorCode::ExcessNotes,
                format!("bill is covered after {} of {} notes", boundary + 1, records.len()),
            );
        }

        let change = running - bill.minor_units;
        let mut events = Vec::with_capacity(records.len() + 1);
        let mut per_note = Vec::with_capacity(records.len());
        let mut change_credits = Vec::new();
        for (i, record) in records.iter().enumerate() {
            let credited = if i == boundary { record.amount - change } else { record.amount };
            events.push(EventPayload::CashRedeemed { cash_id: record.cash_id, payee: *payee, credited });
            per_note.push(NoteCredit { cash_id: record.cash_id, credited: MoneyAmount::new(credited, currency) });
        }
        if change > 0 {
            let boundary_note = &records[boundary];
            events.push(EventPayload::ChangeReturned {
                cash_id: boundary_note.cash_id,
                creator: boundary_note.creator,
                amount: change,
            });
            change_credits.push(ChangeCredit {
                account_id: boundary_note.creator,
                amount: MoneyAmount::new(change, currency),
            });
        }
        inner.commit(events)?;
        Ok(BatchSettlement { merchant_credit: bill, change_credits, per_note })
    }

    /// Standard notes are revoked at once. Bound notes wait for the merchant's
    /// next epoch so an offline merchant who already accepted the note can
    /// still settle it first.
    pub fn revoke_cash(&self, cash_id: &CashId, token: &Token) -> Result<RevocationOutcome, LedgerError> {
        let mut inner = self.inner.lock();
        let requester = inner.authenticate(token)?.id;
        let record = inner
            .state
            .cash
            .get(cash_id)
            .ok_or_else(|| LedgerError::new(ErrorCode::UnknownCash, format!("no note {cash_id}")))?
            .clone();
        if record.creator != requester {
            return err(ErrorCode::NotCreator, format!("{requester} did not create {cash_id}"));
        }
        match record.status {
            CashStatus::Redeemed { .. } => return err(ErrorCode::AlreadyRedeemed, format!("{cash_id} was redeemed")),
            CashStatus::Revoked { .. } => return err(ErrorCode::AlreadyRevoked, format!("{cash_id} was revoked")),
            CashStatus::RevokePending { .. } => return Ok(RevocationOutcome::Pending),
            CashStatus::Active => {}
        }
        let finalize = match record.binding {
            None => true,
            Some((merchant, epoch)) => inner.state.current_epoch(&merchant).map(|e| e.epoch_id) != Some(epoch),
        };
        if finalize {
            inner.commit(vec![EventPayload::CashRevoked {
                cash_id: *cash_id,
                creator: record.creator,
                refunded: record.amount,
            }])?;
            Ok(RevocationOutcome::Finalized)
        } else {
            inner.commit(vec![EventPayload::RevocationRequested { cash_id: *cash_id }])?;
            Ok(RevocationOutcome::Pending)
        }
    }

    /// Retires the current epoch and finalizes every revocation that was
    /// waiting on it.
    pub fn rotate_merchant_epoch(&self, merchant: &MerchantId, token: &Token) -> Result<EpochResponse, LedgerError> {
        let mut inner = self.inner.lock();
        inner.authenticate_merchant(token, merchant)?;
        let seq = inner.state.next_seq;
        let epoch_id = inner.state.current_epoch(merchant).expect("authenticated merchant").epoch_id + 1;
        let epoch_public = inner.seed.epoch_keypair(seq).public();
        let mut events = vec![EventPayload::EpochRotated { merchant_id: *merchant, epoch_id, epoch_public }];
        events.extend(
            inner
                .state
                .cash
                .values()
                .filter(|r| {
                    matches!(r.status, CashStatus::RevokePending { .. })
                        && r.binding.is_some_and(|(m, e)| m == *merchant && e < epoch_id)
                })
                .map(|r| EventPayload::CashRevoked { cash_id: r.cash_id, creator: r.creator, refunded: r.amount }),
        );
        inner.commit(events)?;
        Ok(EpochResponse { epoch_id, epoch_public })
    }

    /// Processes receipts in order, each exactly as a redemption to
    /// `merchant` would be after checking that the payload is well formed and
    /// bound to `merchant`. The ledger's own record decides everything else.
    /// The whole batch commits as one record.
    pub fn settle_offline_receipts(
        &self,
        merchant: &MerchantId,
        token: &Token,
        receipts: &[OfflineReceipt],
    ) -> Result<Vec<ReceiptResult>, LedgerError> {
        let mut inner = self.inner.lock();
        inner.authenticate_merchant(token, merchant)?;
        let currency = inner.state.currency;
        let mut consumed = HashSet::new();
        let mut events = Vec::new();
        let mut results = Vec::with_capacity(receipts.len());
        for receipt in receipts {
            let (cash_id, outcome) = match inner.state.settle_one(merchant, receipt, &consumed) {
                Ok(record) => {
                    consumed.insert(record.cash_id);
                    events.push(EventPayload::CashRedeemed {
                        cash_id: record.cash_id,
                        payee: *merchant,
                        credited: record.amount,
                    });
                    (
                        Some(record.cash_id),
                        ReceiptOutcome::Settled { credited: MoneyAmount::new(record.amount, currency) },
                    )
                }
                Err((cash_id, reason)) => (cash_id, ReceiptOutcome::Rejected { reason }),
            };
            results.push(ReceiptResult { cash_id, outcome });
        }
        let settled = events.len() as u32;
        events.push(EventPayload::SettlementProcessed {
            merchant_id: *merchant,
            settled,
            rejected: receipts.len() as u32 - settled,
        });
        inner.commit(events)?;
        Ok(results)
    }

    /// Restricts who may print notes bound to this merchant. Empty allows
    /// everyone.
    pub fn set_allowlist(&self, merchant: &MerchantId, token: &Token, allowed: &[AccountId]) -> Result<(), LedgerError> {
        let mut inner = self.inner.lock();
        inner.authenticate_merchant(token, merchant)?;
        if let Some(missing) = allowed.iter().find(|a| !inner.state.accounts.contains_key(a)) {
            return err(ErrorCode::UnknownAccount, format!("no account {missing}"));
        }
        let mut allowed = allowed.to_vec();
        allowed.sort();
        allowed.dedup();
        inner.commit(vec![EventPayload::AllowlistUpdated { merchant_id: *merchant, allowed }])?;
        Ok(())
    }

    pub fn balance(&self, account: &AccountId) -> Result<MoneyAmount, LedgerError> {
        self.with_state(|s| {
            s.accounts
                .get(account)
                .map(|a| MoneyAmount::new(a.balance, s.currency))
                .ok_or_else(|| LedgerError::new(ErrorCode::UnknownAccount, format!("no account {account}")))
        })
    }

    pub fn status(&self, cash_id: &CashId) -> Result<NoteStatus, LedgerError> {
        self.with_state(|s| {
            s.cash
                .get(cash_id)
                .map(|r| match r.status {
                    CashStatus::Active => NoteStatus::Active,
                    CashStatus::RevokePending { .. } => NoteStatus::RevokePending,
                    CashStatus::Redeemed { .. } => NoteStatus::Redeemed,
                    CashStatus::Revoked { .. } => NoteStatus::Revoked,
                })
                .ok_or_else(|| LedgerError::new(ErrorCode::UnknownCash, format!("no note {cash_id}")))
        })
    }

    pub fn epoch(&self, merchant: &MerchantId) -> Result<EpochResponse, LedgerError> {
        self.with_state(|s| {
            s.current_epoch(merchant)
                .map(|e| EpochResponse { epoch_id: e.epoch_id, epoch_public: e.public })
                .ok_or_else(|| LedgerError::new(ErrorCode::UnknownMerchant, format!("no merchant {merchant}")))
        })
    }

    /// All epochs of a merchant, oldest first, as `(epoch_id, public, retired)`.
    pub fn epochs(&self, merchant: &MerchantId) -> Result<Vec<(EpochId, PublicKey, bool)>, LedgerError> {
        self.with_state(|s| {
            s.epochs
                .get(merchant)
                .map(|es| es.iter().map(|e| (e.epoch_id, e.public, e.retired)).collect())
                .ok_or_else(|| LedgerError::new(ErrorCode::UnknownMerchant, format!("no merchant {merchant}")))
        })
    }
}

impl Inner {
    fn commit(&mut self, payloads: Vec<EventPayload>) -> Result<(), LedgerError> {
        let base = self.state.next_seq;
        let record: Record = payloads
            .into_iter()
            .enumerate()
            .map(|(i, payload)| LedgerEvent { seq: base + i as u64, payload })
            .collect();
        let frame = encode_frame(&record);
        if let Err(e) = self.log.append(&frame) {
            // Drop any partial frame so later appends do not land behind it.
            let _ = self.log.truncate(self.log_len);
            return Err(e.into());
        }
        self.log_len += frame.len() as u64;
        for event in &record {
            self.state.apply(&self.seed, event).expect("validated event applies to state");
        }
        self.history.extend(record);
        Ok(())
    }

    fn check_currency(&self, amount: &MoneyAmount) -> Result<(), LedgerError> {
        if amount.currency != self.state.currency {
            return err(
                ErrorCode::CurrencyMismatch,
                format!("ledger currency is {}, got {}", self.state.currency, amount.currency),
            );
        }
        Ok(())
    }

    fn authenticate(&self, token: &Token) -> Result<&Account, LedgerError> {
        self.state
            .account_for_token(&token.hash())
            .ok_or_else(|| LedgerError::new(ErrorCode::Unauthorized, "unknown bearer token"))
    }

    fn authenticate_merchant(&self, token: &Token, merchant: &MerchantId) -> Result<(), LedgerError> {
        if !self.state.is_merchant(merchant) {
            return err(ErrorCode::UnknownMerchant, format!("no merchant {merchant}"));
        }
        if self.authenticate(token)?.id != *merchant {
            return err(ErrorCode::Unauthorized, "token does not belong to this merchant");
        }
        Ok(())
    }
}

impl LedgerState {
    /// Checks shared by every redemption path. `consumed` holds notes already
    /// taken earlier in the same batch.
    pub(crate) fn redeemable(
        &self,
        cash_id: &CashId,
        payee: &AccountId,
        redeem_sig: &Signature,
        consumed: &HashSet<CashId>,
    ) -> Result<&CashRecord, ErrorCode> {
        let record = self.cash.get(cash_id).ok_or(ErrorCode::UnknownCash)?;
        if !verify_redeem(&record.cash_public, cash_id, payee, redeem_sig) {
            return Err(ErrorCode::BadSignature);
        }
        if record.binding.is_some_and(|(merchant, _)| merchant != *payee) {
            return Err(ErrorCode::WrongMerchant);
        }
        if consumed.contains(cash_id) {
            return Err(ErrorCode::AlreadyRedeemed);
        }
        match record.status {
            CashStatus::Active | CashStatus::RevokePending { .. } => Ok(record),
            CashStatus::Redeemed { .. } => Err(ErrorCode::AlreadyRedeemed),
            CashStatus::Revoked { .. } => Err(ErrorCode::AlreadyRevoked),
        }
    }

    fn settle_one(
        &self,
        merchant: &MerchantId,
        receipt: &OfflineReceipt,
        consumed: &HashSet<CashId>,
    ) -> Result<&CashRecord, (Option<CashId>, SettleReason)> {
        let note = decode_note(&receipt.note).map_err(|_| (None, SettleReason::Malformed))?;
        let id = Some(note.cash_id);
        let binding = note.binding.ok_or((id, SettleReason::NotMerchantBound))?;
        if binding.merchant_id != *merchant || receipt.payee_merchant != *merchant {
            return Err((id, SettleReason::WrongMerchant));
        }
        let record = self.redeemable(&note.cash_id, merchant, &receipt.redeem_sig, consumed).map_err(|code| {
            let reason = match code {
                ErrorCode::UnknownCash => SettleReason::UnknownCash,
                ErrorCode::BadSignature => SettleReason::BadSignature,
                ErrorCode::WrongMerchant => SettleReason::WrongMerchant,
                ErrorCode::AlreadyRedeemed => SettleReason::DoubleSpent,
                ErrorCode::AlreadyRevoked => SettleReason::Revoked,
                other => unreachable!("redeemable does not return {other}"),
            };
            (id, reason)
        })?;
        Ok(record)
    }
}

fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut options = fs::OpenOptions::new();
    options.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path)?;
    io::Write::write_all(&mut file, bytes)?;
    file.sync_all()
}
