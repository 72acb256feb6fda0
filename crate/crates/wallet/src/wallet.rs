use std::path::PathBuf;

use pyom_core::{
    assemble_note, decode_any, encode_note, generate_cash_keypair, offline_verify, redeem_signature,
    verify_endorsement, verify_issuance, AccountId, CashId, CashNote, MerchantId, MoneyAmount,
    NoteKind, VerifyReport,
};
use pyom_ledger::api::*;
use pyom_ledger::AccountKind;
use rand::RngCore;

use crate::error::{Result, WalletError};
use crate::qr::qr_png;
use crate::store::{CachedEpoch, Credentials, KeyCache, RejectedReceipt, WalletStore};

/// A wallet bound to its store. Operations that need the ledger take it as a
/// [`LedgerApi`]; offline acceptance deliberately does not.
#[derive(Debug, Clone)]
pub struct Wallet {
    store: WalletStore,
    creds: Credentials,
}

#[derive(Debug, Clone)]
pub struct PrintedNote {
    pub note: CashNote,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrintOptions {
    /// Also render `note.png`.
    pub png: bool,
}

impl Default for PrintOptions {
    fn default() -> Self {
        Self { png: true }
    }
}

#[derive(Debug, Clone)]
pub struct Acceptance {
    pub report: VerifyReport,
    /// The queued receipt, present iff accepted.
    pub queued: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyncReport {
    pub settled: Vec<(CashId, MoneyAmount)>,
    pub rejected: Vec<(Option<CashId>, String)>,
}

impl std::fmt::Display for SyncReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} settled, {} rejected", self.settled.len(), self.rejected.len())?;
        if !self.rejected.is_empty() {
            let reasons: Vec<_> = self.rejected.iter().map(|(_, r)| r.as_str()).collect();
            write!(f, ": {}", reasons.join(", "))?;
        }
        Ok(())
    }
}

impl Wallet {
    /// Creates an account on the ledger and stores its credentials. Refuses a
    /// store that already holds credentials.
    pub fn init(
        store: WalletStore,
        api: &dyn LedgerApi,
        kind: AccountKind,
        initial: MoneyAmount,
        server: Option<String>,
    ) -> Result<Wallet> {
        if store.credentials()?.is_some() {
            return Err(WalletError::AlreadyInitialized(store.root().to_owned()));
        }
        let resp = api.create_account(&CreateAccountRequest {
            kind,
            initial_minor_units: initial.minor_units,
            currency: initial.currency,
        })?;
        let creds = Credentials { account_id: resp.account_id, token: resp.token, kind, currency: initial.currency, server };
        store.write_credentials(&creds)?;
        let wallet = Wallet { store, creds };
        wallet.refresh_keys(api)?;
        Ok(wallet)
    }

    pub fn open(store: WalletStore) -> Result<Wallet> {
        let creds = store.require_credentials()?;
        Ok(Wallet { store, creds })
    }

    pub fn store(&self) -> &WalletStore {
        &self.store
    }

    pub fn credentials(&self) -> &Credentials {
        &self.creds
    }

    pub fn account_id(&self) -> AccountId {
        self.creds.account_id
    }

    pub fn balance(&self, api: &dyn LedgerApi) -> Result<MoneyAmount> {
        Ok(api.balance(&self.creds.account_id)?.amount())
    }

    /// Caches the mint key and, for merchants, the current epoch key.
    pub fn refresh_keys(&self, api: &dyn LedgerApi) -> Result<KeyCache> {
        let mint_public = api.mint_public()?.mint_public;
        let epochs = match self.creds.kind {
            AccountKind::Merchant => {
                let e = api.epoch(&self.creds.account_id)?;
                vec![CachedEpoch { epoch_id: e.epoch_id, epoch_public: e.epoch_public }]
            }
            AccountKind::User => Vec::new(),
        };
        let keys = KeyCache { mint_public, epochs };
        self.store.write_keys(&keys)?;
        Ok(keys)
    }

    /// Generates a note key locally, has the ledger issue against it, and
    /// writes the note files. Nothing is written unless issuance succeeded and
    /// the assembled note re-verifies.
    pub fn print(
        &self,
        api: &dyn LedgerApi,
        rng: &mut dyn RngCore,
        amount: MoneyAmount,
        merchant: Option<MerchantId>,
        options: PrintOptions,
    ) -> Result<PrintedNote> {
        let mut entropy = [0u8; 32];
        rng.fill_bytes(&mut entropy);
        let keys = generate_cash_keypair(&entropy).expect("32 bytes of entropy");
        let kind = if merchant.is_some() { NoteKind::MerchantBound } else { NoteKind::Standard };
        let issued = api.issue_cash(
            &self.creds.token,
            &IssueRequest { amount, cash_public: keys.public(), kind, target_merchant: merchant },
        )?;
        let note = assemble_note(&keys, amount, issued);
        self.check_printed(api, &note)?;

        let payload = encode_note(&note)?;
        let text = payload.text();
        let png = if options.png {
            Some(qr_png(&text).map_err(|e| WalletError::Usage(format!("cannot render QR: {e}")))?)
        } else {
            None
        };
        let mut files: Vec<(&str, &[u8])> = vec![("note.bin", payload.as_bytes()), ("note.txt", text.as_bytes())];
        if let Some(png) = &png {
            files.push(("note.png", png));
        }
        let dir = self.store.write_note(&note.cash_id, &files, rng)?;
        Ok(PrintedNote { note, dir })
    }

    fn check_printed(&self, api: &dyn LedgerApi, note: &CashNote) -> Result<()> {
        let mint = match self.store.keys()? {
            Some(keys) => keys.mint_public,
            None => api.mint_public()?.mint_public,
        };
        let mut ok = verify_issuance(note, &mint) && note.check().is_ok();
        if let Some(binding) = &note.binding {
            let epoch = api.epoch(&binding.merchant_id)?;
            // A rotation racing the print leaves nothing to check against.
            if epoch.epoch_id == binding.epoch_id {
                ok &= verify_endorsement(note, &epoch.epoch_public) == Ok(true);
            }
        }
        if ok {
            Ok(())
        } else {
            Err(WalletError::Ledger(pyom_ledger::LedgerError::new(
                pyom_ledger::ErrorCode::BadSignature,
                format!("ledger returned materials for {} that do not verify", note.cash_id),
            )))
        }
    }

    /// Redeems a note into this wallet's account.
    pub fn deposit(&self, api: &dyn LedgerApi, input: &[u8]) -> Result<MoneyAmount> {
        let note = decode_any(input)?;
        let redeem_sig = redeem_signature(&note.cash_secret, &note.cash_id, &self.creds.account_id);
        let credited = api
            .redeem(&RedeemRequest { cash_id: note.cash_id, payee: self.creds.account_id, redeem_sig })?
            .credited;
        self.store.mark_spent(&note.cash_id)?;
        Ok(credited)
    }

    /// Verifies a note against cached keys only and, if it passes, durably
    /// queues a receipt before returning.
    pub fn accept_offline(&self, rng: &mut dyn RngCore, now: u64, input: &[u8]) -> Result<Acceptance> {
        if self.creds.kind != AccountKind::Merchant {
            return Err(WalletError::NotMerchant);
        }
        let keys = self.store.keys()?.ok_or(WalletError::NoCachedKeys)?;
        let note = decode_any(input)?;
        let epochs: Vec<_> = keys.epochs.iter().map(|e| (e.epoch_id, e.epoch_public)).collect();
        let report = offline_verify(&note, &self.creds.account_id, &epochs, &keys.mint_public);
        if !report.accepted() {
            return Ok(Acceptance { report, queued: None });
        }
        let receipt = OfflineReceipt {
            note: encode_note(&note)?.into_bytes(),
            payee_merchant: self.creds.account_id,
            redeem_sig: redeem_signature(&note.cash_secret, &note.cash_id, &self.creds.account_id),
            accepted_at: now,
        };
        let queued = self.store.enqueue(&receipt, rng)?;
        Ok(Acceptance { report, queued: Some(queued) })
    }

    /// Submits the whole queue. Settled receipts are removed, refused ones
    /// move to `rejected/`. On a transport failure the queue is untouched;
    /// resubmitting is safe because the ledger refuses anything it already
    /// settled.
    pub fn sync(&self, api: &dyn LedgerApi) -> Result<SyncReport> {
        if self.creds.kind != AccountKind::Merchant {
            return Err(WalletError::NotMerchant);
        }
        let mut report = SyncReport::default();
        let mut pending = Vec::new();
        for entry in self.store.queue()? {
            match entry.receipt {
                Ok(receipt) => pending.push((entry.path, receipt)),
                Err(e) => {
                    let record = RejectedReceipt { reason: "unreadable".into(), cash_id: None, receipt: None };
                    self.store.move_rejected(&entry.path, &record)?;
                    report.rejected.push((None, format!("unreadable ({e})")));
                }
            }
        }
        if pending.is_empty() {
            return Ok(report);
        }
        let receipts: Vec<_> = pending.iter().map(|(_, r)| r.clone()).collect();
        let results = api.settle(&self.creds.token, &self.creds.account_id, &SettleRequest { receipts })?.results;
        if results.len() != pending.len() {
            return Err(WalletError::Network(format!(
                "ledger answered {} results for {} receipts",
                results.len(),
                pending.len()
            )));
        }
        for ((path, receipt), result) in pending.into_iter().zip(results) {
            match result.outcome {
                ReceiptOutcome::Settled { credited } => {
                    self.store.remove_settled(&path)?;
                    report.settled.push((result.cash_id.expect("settled receipts decode"), credited));
                }
                ReceiptOutcome::Rejected { reason } => {
                    let record =
                        RejectedReceipt { reason: reason.to_string(), cash_id: result.cash_id, receipt: Some(receipt) };
                    self.store.move_rejected(&path, &record)?;
                    report.rejected.push((result.cash_id, reason.to_string()));
                }
            }
        }
        Ok(report)
    }

    /// Takes several notes against one bill; the remainder of the last note
    /// goes back to whoever printed it.
    pub fn redeem_batch(&self, api: &dyn LedgerApi, inputs: &[&[u8]], bill: MoneyAmount) -> Result<BatchSettlement> {
        let payee = self.creds.account_id;
        let notes = inputs
            .iter()
            .map(|input| {
                let note = decode_any(input)?;
                Ok(BatchNote { cash_id: note.cash_id, redeem_sig: redeem_signature(&note.cash_secret, &note.cash_id, &payee) })
            })
            .collect::<Result<Vec<_>>>()?;
        let settlement = api.redeem_batch(&RedeemBatchRequest { notes, bill, payee })?;
        for n in &settlement.per_note {
            self.store.mark_spent(&n.cash_id)?;
        }
        Ok(settlement)
    }

    pub fn revoke(&self, api: &dyn LedgerApi, cash_id: &CashId) -> Result<RevocationOutcome> {
        Ok(api.revoke(&self.creds.token, cash_id)?.revocation)
    }

    /// Rotates this merchant's epoch and re-caches the new key.
    pub fn rotate_epoch(&self, api: &dyn LedgerApi) -> Result<EpochResponse> {
        if self.creds.kind != AccountKind::Merchant {
            return Err(WalletError::NotMerchant);
        }
        let epoch = api.rotate_epoch(&self.creds.token, &self.creds.account_id)?;
        self.refresh_keys(api)?;
        Ok(epoch)
    }

    pub fn status(&self, api: &dyn LedgerApi, cash_id: &CashId) -> Result<NoteStatus> {
        Ok(api.status(cash_id)?.status)
    }

    pub fn queue_len(&self) -> Result<usize> {
        Ok(self.store.queue()?.len())
    }
}
