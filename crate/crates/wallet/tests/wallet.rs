use std::sync::atomic::{AtomicBool, Ordering};

use pyom_core::{
    decode_note, offline_verify, Currency, MoneyAmount, RejectReason, Verdict, MERCHANT_BOUND_LEN, STANDARD_LEN,
};
use pyom_ledger::api::*;
use pyom_ledger::{AccountKind, Ledger, MintSeed, Token};
use pyom_wallet::{PrintOptions, Wallet, WalletError, WalletStore};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn usd(cents: u64) -> MoneyAmount {
    MoneyAmount::new(cents, Currency::USD)
}

struct World {
    ledger: Ledger,
    dir: tempfile::TempDir,
    rng: ChaCha20Rng,
}

impl World {
    fn new() -> Self {
        Self {
            ledger: Ledger::in_memory(MintSeed::new([1; 32]), Currency::USD),
            dir: tempfile::tempdir().unwrap(),
            rng: ChaCha20Rng::seed_from_u64(7),
        }
    }

    fn wallet(&self, name: &str, kind: AccountKind, cents: u64) -> Wallet {
        Wallet::init(WalletStore::new(self.dir.path().join(name)), &self.ledger, kind, usd(cents), None).unwrap()
    }
}

/// Fails every call, as a partitioned network would.
struct Down<'a> {
    inner: &'a dyn LedgerApi,
    down: AtomicBool,
}

macro_rules! gate {
    ($self:ident, $call:expr) => {
        if $self.down.load(Ordering::SeqCst) {
            Err(ApiError::Transport("connection refused".into()))
        } else {
            $call
        }
    };
}

impl LedgerApi for Down<'_> {
    fn create_account(&self, r: &CreateAccountRequest) -> Result<CreateAccountResponse, ApiError> {
        gate!(self, self.inner.create_account(r))
    }
    fn balance(&self, a: &pyom_core::AccountId) -> Result<BalanceResponse, ApiError> {
        gate!(self, self.inner.balance(a))
    }
    fn issue_cash(&self, t: &Token, r: &IssueRequest) -> Result<pyom_core::IssuedMaterials, ApiError> {
        gate!(self, self.inner.issue_cash(t, r))
    }
    fn redeem(&self, r: &RedeemRequest) -> Result<RedeemResponse, ApiError> {
        gate!(self, self.inner.redeem(r))
    }
    fn redeem_batch(&self, r: &RedeemBatchRequest) -> Result<BatchSettlement, ApiError> {
        gate!(self, self.inner.redeem_batch(r))
    }
    fn revoke(&self, t: &Token, c: &pyom_core::CashId) -> Result<RevokeResponse, ApiError> {
        gate!(self, self.inner.revoke(t, c))
    }
    fn status(&self, c: &pyom_core::CashId) -> Result<StatusResponse, ApiError> {
        gate!(self, self.inner.status(c))
    }
    fn mint_public(&self) -> Result<MintKeyResponse, ApiError> {
        gate!(self, self.inner.mint_public())
    }
    fn epoch(&self, m: &pyom_core::MerchantId) -> Result<EpochResponse, ApiError> {
        gate!(self, self.inner.epoch(m))
    }
    fn rotate_epoch(&self, t: &Token, m: &pyom_core::MerchantId) -> Result<EpochResponse, ApiError> {
        gate!(self, self.inner.rotate_epoch(t, m))
    }
    fn settle(&self, t: &Token, m: &pyom_core::MerchantId, r: &SettleRequest) -> Result<SettleResponse, ApiError> {
        gate!(self, self.inner.settle(t, m, r))
    }
    fn set_allowlist(&self, t: &Token, m: &pyom_core::MerchantId, r: &AllowlistRequest) -> Result<(), ApiError> {
        gate!(self, self.inner.set_allowlist(t, m, r))
    }
}

#[test]
fn init_balance_and_double_init() {
    let w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 10_000);
    assert_eq!(alice.balance(&w.ledger).unwrap().to_string(), "100.00 USD");
    let again = Wallet::init(WalletStore::new(w.dir.path().join("alice")), &w.ledger, AccountKind::User, usd(1), None);
    let e = again.unwrap_err();
    assert!(matches!(e, WalletError::AlreadyInitialized(_)));
    assert!(e.to_string().starts_with("already initialized"));
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn print_five_then_sixth_fails() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 5_000);
    let opts = PrintOptions { png: false };
    for _ in 0..5 {
        alice.print(&w.ledger, &mut w.rng, usd(1_000), None, opts).unwrap();
    }
    let notes_before = std::fs::read_dir(alice.store().root().join("notes")).unwrap().count();
    let e = alice.print(&w.ledger, &mut w.rng, usd(1_000), None, opts).unwrap_err();
    assert_eq!(e.code(), Some("insufficient-balance"));
    let notes_after = std::fs::read_dir(alice.store().root().join("notes")).unwrap().count();
    assert_eq!(notes_before, notes_after, "failed print leaves no files");
}

#[test]
fn printed_files_decode_and_verify() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 5_000);
    let shop = w.wallet("shop", AccountKind::Merchant, 0);

    let std_note = alice.print(&w.ledger, &mut w.rng, usd(1_000), None, PrintOptions::default()).unwrap();
    let bin = std::fs::read(std_note.dir.join("note.bin")).unwrap();
    assert_eq!(bin.len(), STANDARD_LEN);
    let txt = std::fs::read_to_string(std_note.dir.join("note.txt")).unwrap();
    assert!(txt.starts_with("PYOM1:"));

    let png = image::load_from_memory(&std::fs::read(std_note.dir.join("note.png")).unwrap()).unwrap().to_luma8();
    let mut prepared = rqrr::PreparedImage::prepare(png);
    let grids = prepared.detect_grids();
    assert_eq!(grids.len(), 1);
    let (_, content) = grids[0].decode().unwrap();
    assert_eq!(content, txt);

    let bound = alice.print(&w.ledger, &mut w.rng, usd(1_000), Some(shop.account_id()), PrintOptions::default()).unwrap();
    let bin = std::fs::read(bound.dir.join("note.bin")).unwrap();
    assert_eq!(bin.len(), MERCHANT_BOUND_LEN);
    let note = decode_note(&bin).unwrap();
    let epoch = w.ledger.epoch(&shop.account_id()).unwrap();
    let report = offline_verify(&note, &shop.account_id(), &[(epoch.epoch_id, epoch.epoch_public)], &w.ledger.mint_public());
    assert!(report.accepted());
}

#[test]
fn deposit_then_again_then_truncated() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 5_000);
    let bob = w.wallet("bob", AccountKind::User, 0);
    let printed = alice.print(&w.ledger, &mut w.rng, usd(1_000), None, PrintOptions { png: false }).unwrap();
    let bin = std::fs::read(printed.dir.join("note.bin")).unwrap();

    let credited = bob.deposit(&w.ledger, &bin).unwrap();
    assert_eq!(format!("credited {credited}"), "credited 10.00 USD");
    let e = bob.deposit(&w.ledger, &bin).unwrap_err();
    assert_eq!((e.code(), e.exit_code()), (Some("already-redeemed"), 1));
    let e = bob.deposit(&w.ledger, &bin[..60]).unwrap_err();
    assert_eq!((e.code(), e.exit_code()), (Some("truncated"), 1));

    // Text form works too; the payer's own copy is marked spent when they deposit.
    let second = alice.print(&w.ledger, &mut w.rng, usd(500), None, PrintOptions { png: false }).unwrap();
    let txt = std::fs::read(second.dir.join("note.txt")).unwrap();
    alice.deposit(&w.ledger, &txt).unwrap();
    assert!(alice.store().is_spent(&second.note.cash_id));
}

#[test]
fn offline_accept_queue_and_sync() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 10_000);
    let shop = w.wallet("shop", AccountKind::Merchant, 0);
    let other = w.wallet("other", AccountKind::Merchant, 0);
    let opts = PrintOptions { png: false };

    let mut payloads = Vec::new();
    for _ in 0..3 {
        let p = alice.print(&w.ledger, &mut w.rng, usd(1_000), Some(shop.account_id()), opts).unwrap();
        payloads.push(std::fs::read(p.dir.join("note.bin")).unwrap());
    }
    for (i, bytes) in payloads.iter().enumerate() {
        let a = shop.accept_offline(&mut w.rng, i as u64, bytes).unwrap();
        assert_eq!(a.report.overall, Verdict::Accept);
        assert_eq!(shop.queue_len().unwrap(), i + 1);
    }

    let theirs = alice.print(&w.ledger, &mut w.rng, usd(1_000), Some(other.account_id()), opts).unwrap();
    let a = shop.accept_offline(&mut w.rng, 9, &std::fs::read(theirs.dir.join("note.bin")).unwrap()).unwrap();
    assert_eq!(a.report.overall, Verdict::Reject(RejectReason::WrongMerchant));
    assert!(a.queued.is_none());
    let standard = alice.print(&w.ledger, &mut w.rng, usd(1_000), None, opts).unwrap();
    let a = shop.accept_offline(&mut w.rng, 9, &std::fs::read(standard.dir.join("note.bin")).unwrap()).unwrap();
    assert_eq!(a.report.overall, Verdict::Reject(RejectReason::NotMerchantBound));
    assert_eq!(shop.queue_len().unwrap(), 3);

    let report = shop.sync(&w.ledger).unwrap();
    assert_eq!(report.to_string(), "3 settled, 0 rejected");
    assert_eq!(shop.balance(&w.ledger).unwrap(), usd(3_000));
    assert_eq!(shop.queue_len().unwrap(), 0);
}

#[test]
fn duplicate_acceptance_settles_once() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 10_000);
    let shop = w.wallet("shop", AccountKind::Merchant, 0);
    let p = alice.print(&w.ledger, &mut w.rng, usd(1_000), Some(shop.account_id()), PrintOptions { png: false }).unwrap();
    let bytes = std::fs::read(p.dir.join("note.bin")).unwrap();
    shop.accept_offline(&mut w.rng, 1, &bytes).unwrap();
    shop.accept_offline(&mut w.rng, 2, &bytes).unwrap();
    assert_eq!(shop.queue_len().unwrap(), 2);
    let report = shop.sync(&w.ledger).unwrap();
    assert_eq!(report.to_string(), "1 settled, 1 rejected: double-spent");
    let rejected = shop.store().rejected().unwrap();
    assert_eq!(rejected.len(), 1);
    assert_eq!(rejected[0].reason, "double-spent");
    assert_eq!(shop.balance(&w.ledger).unwrap(), usd(1_000));
}

#[test]
fn sync_while_partitioned_keeps_queue() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 10_000);
    let shop = w.wallet("shop", AccountKind::Merchant, 0);
    let p = alice.print(&w.ledger, &mut w.rng, usd(1_000), Some(shop.account_id()), PrintOptions { png: false }).unwrap();
    shop.accept_offline(&mut w.rng, 1, &std::fs::read(p.dir.join("note.bin")).unwrap()).unwrap();

    let net = Down { inner: &w.ledger, down: AtomicBool::new(true) };
    let e = shop.sync(&net).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert_eq!(shop.queue_len().unwrap(), 1);

    net.down.store(false, Ordering::SeqCst);
    assert_eq!(shop.sync(&net).unwrap().to_string(), "1 settled, 0 rejected");
}

#[test]
fn stale_cache_after_rotation_rejects() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 10_000);
    let shop = w.wallet("shop", AccountKind::Merchant, 0);
    let p = alice.print(&w.ledger, &mut w.rng, usd(1_000), Some(shop.account_id()), PrintOptions { png: false }).unwrap();
    let epoch = shop.rotate_epoch(&w.ledger).unwrap();
    assert_eq!(epoch.epoch_id, 2);
    let a = shop.accept_offline(&mut w.rng, 1, &std::fs::read(p.dir.join("note.bin")).unwrap()).unwrap();
    assert_eq!(a.report.overall, Verdict::Reject(RejectReason::StaleEpoch));
}

#[test]
fn revoke_and_status() {
    let mut w = World::new();
    let alice = w.wallet("alice", AccountKind::User, 10_000);
    let p = alice.print(&w.ledger, &mut w.rng, usd(1_000), None, PrintOptions { png: false }).unwrap();
    assert_eq!(alice.status(&w.ledger, &p.note.cash_id).unwrap(), NoteStatus::Active);
    assert_eq!(alice.revoke(&w.ledger, &p.note.cash_id).unwrap(), RevocationOutcome::Finalized);
    assert_eq!(alice.status(&w.ledger, &p.note.cash_id).unwrap(), NoteStatus::Revoked);
    assert_eq!(alice.balance(&w.ledger).unwrap(), usd(10_000));
    let e = alice.status(&w.ledger, &pyom_core::CashId([0; 16])).unwrap_err();
    assert_eq!(e.code(), Some("unknown-cash"));
}
