//! On-disk wallet layout.
//!
//! ```text
//! credentials.json        account id + bearer token (0600)
//! keys.json               cached mint key and, for merchants, epoch keys
//! notes/<cash_id>/        note.bin, note.txt, note.png; `spent` once deposited
//! queue/<ts>-<rand>.json  one offline receipt per file, fsynced before ACCEPT
//! rejected/<same name>    receipts the ledger refused, with the reason
//! ```
//!
//! Every file is written to a temporary name, synced, and renamed into place,
//! so readers never see a partial file and concurrent processes never collide.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pyom_core::{AccountId, CashId, Currency, EpochId, PublicKey};
use pyom_ledger::api::OfflineReceipt;
use pyom_ledger::{AccountKind, Token};
use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalletError};

const CREDENTIALS: &str = "credentials.json";
const KEYS: &str = "keys.json";
const NOTES: &str = "notes";
const QUEUE: &str = "queue";
const REJECTED: &str = "rejected";
const SPENT: &str = "spent";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Credentials {
    pub account_id: AccountId,
    pub token: Token,
    pub kind: AccountKind,
    pub currency: Currency,
    /// Server the wallet was initialized against; flags override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedEpoch {
    pub epoch_id: EpochId,
    pub epoch_public: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyCache {
    pub mint_public: PublicKey,
    /// The merchant's own epochs that offline acceptance honours.
    #[serde(default)]
    pub epochs: Vec<CachedEpoch>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedReceipt {
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash_id: Option<CashId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt: Option<OfflineReceipt>,
}

/// A queue entry; `receipt` is an error if the file could not be parsed.
#[derive(Debug)]
pub struct QueueEntry {
    pub path: PathBuf,
    pub receipt: Result<OfflineReceipt>,
}

#[derive(Debug, Clone)]
pub struct WalletStore {
    root: PathBuf,
}

impl WalletStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn credentials(&self) -> Result<Option<Credentials>> {
        read_json(&self.root.join(CREDENTIALS))
    }

    pub fn require_credentials(&self) -> Result<Credentials> {
        self.credentials()?.ok_or_else(|| WalletError::NotInitialized(self.root.clone()))
    }

    /// Fails if credentials already exist.
    pub fn write_credentials(&self, creds: &Credentials) -> Result<()> {
        let path = self.root.join(CREDENTIALS);
        if path.exists() {
            return Err(WalletError::AlreadyInitialized(self.root.clone()));
        }
        self.ensure_dir(&self.root)?;
        let bytes = serde_json::to_vec_pretty(creds).expect("credentials serialize");
        write_atomic(&self.root, CREDENTIALS, &bytes, true)
    }

    pub fn keys(&self) -> Result<Option<KeyCache>> {
        read_json(&self.root.join(KEYS))
    }

    pub fn write_keys(&self, keys: &KeyCache) -> Result<()> {
        self.ensure_dir(&self.root)?;
        write_atomic(&self.root, KEYS, &serde_json::to_vec_pretty(keys).expect("keys serialize"), false)
    }

    pub fn note_dir(&self, cash_id: &CashId) -> PathBuf {
        self.root.join(NOTES).join(cash_id.to_string())
    }

    /// Writes all of a note's files or none of them.
    pub fn write_note(&self, cash_id: &CashId, files: &[(&str, &[u8])], rng: &mut dyn RngCore) -> Result<PathBuf> {
        let notes = self.root.join(NOTES);
        self.ensure_dir(&notes)?;
        let staging = notes.join(format!(".tmp-{:016x}", rng.next_u64()));
        let result = (|| {
            fs::create_dir(&staging).map_err(WalletError::io(&staging))?;
            for (name, bytes) in files {
                let path = staging.join(name);
                let mut f = fs::File::create(&path).map_err(WalletError::io(&path))?;
                f.write_all(bytes).and_then(|()| f.sync_all()).map_err(WalletError::io(&path))?;
            }
            sync_dir(&staging)?;
            let target = self.note_dir(cash_id);
            fs::rename(&staging, &target).map_err(WalletError::io(&target))?;
            sync_dir(&notes)?;
            Ok(target)
        })();
        if result.is_err() {
            let _ = fs::remove_dir_all(&staging);
        }
        result
    }

    pub fn mark_spent(&self, cash_id: &CashId) -> Result<bool> {
        let dir = self.note_dir(cash_id);
        if !dir.is_dir() {
            return Ok(false);
        }
        write_atomic(&dir, SPENT, b"", false)?;
        Ok(true)
    }

    pub fn is_spent(&self, cash_id: &CashId) -> bool {
        self.note_dir(cash_id).join(SPENT).exists()
    }

    /// Durably appends a receipt to the queue and returns its file.
    pub fn enqueue(&self, receipt: &OfflineReceipt, rng: &mut dyn RngCore) -> Result<PathBuf> {
        let queue = self.root.join(QUEUE);
        self.ensure_dir(&queue)?;
        let name = format!("{:020}-{:016x}.json", receipt.accepted_at, rng.next_u64());
        write_atomic(&queue, &name, &serde_json::to_vec_pretty(receipt).expect("receipt serializes"), false)?;
        Ok(queue.join(name))
    }

    /// Queue entries, oldest first.
    pub fn queue(&self) -> Result<Vec<QueueEntry>> {
        let mut paths = list_json(&self.root.join(QUEUE))?;
        paths.sort();
        Ok(paths
            .into_iter()
            .map(|path| {
                let receipt = fs::read(&path)
                    .map_err(WalletError::io(&path))
                    .and_then(|b| serde_json::from_slice(&b).map_err(|source| WalletError::BadFile { path: path.clone(), source }));
                QueueEntry { path, receipt }
            })
            .collect())
    }

    /// Drops a settled receipt from the queue.
    pub fn remove_settled(&self, entry: &Path) -> Result<()> {
        fs::remove_file(entry).map_err(WalletError::io(entry))?;
        sync_dir(&self.root.join(QUEUE))
    }

    /// Moves a refused receipt to `rejected/` along with the reason.
    pub fn move_rejected(&self, entry: &Path, record: &RejectedReceipt) -> Result<PathBuf> {
        let rejected = self.root.join(REJECTED);
        self.ensure_dir(&rejected)?;
        let name = entry.file_name().expect("queue entries are files").to_string_lossy().into_owned();
        write_atomic(&rejected, &name, &serde_json::to_vec_pretty(record).expect("record serializes"), false)?;
        self.remove_settled(entry)?;
        Ok(rejected.join(name))
    }

    pub fn rejected(&self) -> Result<Vec<RejectedReceipt>> {
        let mut paths = list_json(&self.root.join(REJECTED))?;
        paths.sort();
        paths.iter().map(|p| read_json(p).map(|r| r.expect("listed file exists"))).collect()
    }

    fn ensure_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(WalletError::io(dir))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|source| WalletError::BadFile { path: path.to_owned(), source }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(WalletError::io(path)(e)),
    }
}

fn list_json(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(WalletError::io(dir)(e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(WalletError::io(dir))?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        if !name.starts_with('.') && name.ends_with(".json") {
            out.push(path);
        }
    }
    Ok(out)
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8], private: bool) -> Result<()> {
    let tmp = dir.join(format!(".{name}.{:016x}.tmp", rand::random::<u64>()));
    let mut options = fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = private;
    let mut f = options.open(&tmp).map_err(WalletError::io(&tmp))?;
    f.write_all(bytes).and_then(|()| f.sync_all()).map_err(WalletError::io(&tmp))?;
    let target = dir.join(name);
    fs::rename(&tmp, &target).map_err(WalletError::io(&target))?;
    sync_dir(dir)
}

fn sync_dir(dir: &Path) -> Result<()> {
    #[cfg(unix)]
    fs::File::open(dir).and_then(|d| d.sync_all()).map_err(WalletError::io(dir))?;
    #[cfg(not(unix))]
    let _ = dir;
    Ok(())
}
