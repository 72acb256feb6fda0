//! The simulated service: a ledger over an in-memory log that survives
//! crashes, reachable in-process or over HTTP, with a switchable partition.

use std::io;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use pyom_core::{AccountId, CashId, Currency, IssuedMaterials, MerchantId};
use pyom_ledger::api::*;
use pyom_ledger::http::BackgroundServer;
use pyom_ledger::{EventLog, Ledger, LedgerError, MemLog, MintSeed, Token};
use pyom_wallet::HttpClient;

use crate::scenario::Transport;

#[derive(Default)]
struct Fault {
    /// The next append writes half its frame and then the "process" dies.
    tear_next: AtomicBool,
    dead: AtomicBool,
}

/// A [`MemLog`] that can be told to die mid-write. A dead log accepts
/// nothing, not even the ledger's attempt to cut the partial frame off: the
/// process that would have done it is gone.
struct FaultyLog {
    inner: MemLog,
    fault: Arc<Fault>,
}

impl EventLog for FaultyLog {
    fn append(&mut self, frame: &[u8]) -> io::Result<()> {
        if self.fault.dead.load(Ordering::SeqCst) {
            return Err(io::Error::other("service is dead"));
        }
        if self.fault.tear_next.swap(false, Ordering::SeqCst) {
            self.inner.append(&frame[..frame.len() / 2])?;
            self.fault.dead.store(true, Ordering::SeqCst);
            return Err(io::Error::other("crashed mid-write"));
        }
        self.inner.append(frame)
    }

    fn read_all(&mut self) -> io::Result<Vec<u8>> {
        self.inner.read_all()
    }

    fn truncate(&mut self, len: u64) -> io::Result<()> {
        if self.fault.dead.load(Ordering::SeqCst) {
            return Err(io::Error::other("service is dead"));
        }
        self.inner.truncate(len)
    }
}

enum Backend {
    Loopback(Arc<Ledger>),
    Http { ledger: Arc<Ledger>, client: HttpClient, _server: BackgroundServer },
}

impl Backend {
    fn ledger(&self) -> &Arc<Ledger> {
        match self {
            Backend::Loopback(l) | Backend::Http { ledger: l, .. } => l,
        }
    }

    fn api(&self) -> &dyn LedgerApi {
        match self {
            Backend::Loopback(l) => &**l,
            Backend::Http { client, .. } => client,
        }
    }
}

/// Implements [`LedgerApi`] for the wallets. While partitioned or down,
/// every call fails as a transport error, exactly as a dead socket would.
pub struct Service {
    seed: MintSeed,
    currency: Currency,
    transport: Transport,
    log: MemLog,
    fault: RwLock<Arc<Fault>>,
    backend: RwLock<Option<Backend>>,
    partitioned: AtomicBool,
}

impl Service {
    pub fn start(seed: MintSeed, currency: Currency, transport: Transport) -> Result<Self, LedgerError> {
        let service = Service {
            seed,
            currency,
            transport,
            log: MemLog::new(),
            fault: RwLock::new(Arc::default()),
            backend: RwLock::new(None),
            partitioned: AtomicBool::new(false),
        };
        service.restart()?;
        Ok(service)
    }

    pub fn seed(&self) -> &MintSeed {
        &self.seed
    }

    pub fn currency(&self) -> Currency {
        self.currency
    }

    /// The ledger, if the service is up. Bypasses the partition.
    pub fn ledger(&self) -> Option<Arc<Ledger>> {
        self.backend.read().as_ref().map(|b| b.ledger().clone())
    }

    pub fn is_up(&self) -> bool {
        self.backend.read().is_some()
    }

    /// Current log bytes, torn tail included.
    pub fn log_bytes(&self) -> Vec<u8> {
        self.log.snapshot()
    }

    pub fn set_partition(&self, on: bool) {
        self.partitioned.store(on, Ordering::SeqCst);
    }

    /// Makes the next log append write half a frame and kill the service.
    pub fn arm_torn_write(&self) {
        self.fault.read().tear_next.store(true, Ordering::SeqCst);
    }

    /// Drops the service. With `torn`, garbage that looks like the start of
    /// a frame is left at the tail of the log.
    pub fn crash(&self, torn: bool) {
        let backend = self.backend.write().take();
        drop(backend);
        self.fault.read().dead.store(true, Ordering::SeqCst);
        if torn {
            let mut log = self.log.clone();
            let _ = log.append(&[0, 0, 0, 64, 0xde, 0xad, 0xbe, 0xef, b'{']);
        }
    }

    /// Recovers a fresh ledger from the log.
    pub fn restart(&self) -> Result<(), LedgerError> {
        if self.is_up() {
            self.crash(false);
        }
        let fault = Arc::new(Fault::default());
        *self.fault.write() = fault.clone();
        let log = FaultyLog { inner: self.log.clone(), fault };
        let ledger = Arc::new(Ledger::recover(self.seed.clone(), self.currency, Box::new(log))?);
        let backend = match self.transport {
            Transport::Loopback => Backend::Loopback(ledger),
            Transport::Http => {
                let server = BackgroundServer::start(([127, 0, 0, 1], 0).into(), ledger.clone())?;
                Backend::Http { client: HttpClient::new(&server.url()), ledger, _server: server }
            }
        };
        *self.backend.write() = Some(backend);
        Ok(())
    }

    fn call<T>(&self, f: impl FnOnce(&dyn LedgerApi) -> Result<T, ApiError>) -> Result<T, ApiError> {
        if self.partitioned.load(Ordering::SeqCst) {
            return Err(ApiError::Transport("partitioned".into()));
        }
        match &*self.backend.read() {
            Some(b) => f(b.api()),
            None => Err(ApiError::Transport("service down".into())),
        }
    }
}

impl LedgerApi for Service {
    fn create_account(&self, req: &CreateAccountRequest) -> Result<CreateAccountResponse, ApiError> {
        self.call(|a| a.create_account(req))
    }
    fn balance(&self, account: &AccountId) -> Result<BalanceResponse, ApiError> {
        self.call(|a| a.balance(account))
    }
    fn issue_cash(&self, token: &Token, req: &IssueRequest) -> Result<IssuedMaterials, ApiError> {
        self.call(|a| a.issue_cash(token, req))
    }
    fn redeem(&self, req: &RedeemRequest) -> Result<RedeemResponse, ApiError> {
        self.call(|a| a.redeem(req))
    }
    fn redeem_batch(&self, req: &RedeemBatchRequest) -> Result<BatchSettlement, ApiError> {
        self.call(|a| a.redeem_batch(req))
    }
    fn revoke(&self, token: &Token, cash_id: &CashId) -> Result<RevokeResponse, ApiError> {
        self.call(|a| a.revoke(token, cash_id))
    }
    fn status(&self, cash_id: &CashId) -> Result<StatusResponse, ApiError> {
        self.call(|a| a.status(cash_id))
    }
    fn mint_public(&self) -> Result<MintKeyResponse, ApiError> {
        self.call(|a| a.mint_public())
    }
    fn epoch(&self, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        self.call(|a| a.epoch(merchant))
    }
    fn rotate_epoch(&self, token: &Token, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        self.call(|a| a.rotate_epoch(token, merchant))
    }
    fn settle(&self, token: &Token, merchant: &MerchantId, req: &SettleRequest) -> Result<SettleResponse, ApiError> {
        self.call(|a| a.settle(token, merchant, req))
    }
    fn set_allowlist(&self, token: &Token, merchant: &MerchantId, req: &AllowlistRequest) -> Result<(), ApiError> {
        self.call(|a| a.set_allowlist(token, merchant, req))
    }
}
