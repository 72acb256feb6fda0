//! Durable event log.
//!
//! The file is a sequence of frames:
//!
//! ```text
//! u32 BE  payload length
//! u32 BE  CRC-32 of payload
//! [u8]    payload: JSON array of events (one committed record)
//! ```
//!
//! A frame that runs past end-of-file, or whose checksum fails while being the
//! last frame in the file, is a torn write: it is dropped and the file is
//! truncated back to the last complete frame. Damage anywhere before the last
//! frame is fatal.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::{ErrorCode, LedgerError};
use crate::events::Record;

const HEADER_LEN: usize = 8;

/// Append-only byte storage behind the ledger.
pub trait EventLog: Send {
    /// Appends one frame and makes it durable before returning.
    fn append(&mut self, frame: &[u8]) -> io::Result<()>;
    fn read_all(&mut self) -> io::Result<Vec<u8>>;
    fn truncate(&mut self, len: u64) -> io::Result<()>;
}

pub fn encode_frame(record: &Record) -> Vec<u8> {
    let payload = serde_json::to_vec(record).expect("events serialize");
    let mut frame = Vec::with_capacity(HEADER_LEN + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&crc32fast::hash(&payload).to_be_bytes());
    frame.extend_from_slice(&payload);
    frame
}

/// Result of scanning a log image.
#[derive(Debug)]
pub struct Scan {
    pub records: Vec<Record>,
    /// Length of the valid prefix; anything after it was a torn tail.
    pub valid_len: u64,
    pub torn_tail: bool,
}

pub fn scan(bytes: &[u8]) -> Result<Scan, LedgerError> {
    let corrupted =
        |at: usize, what: &str| LedgerError::new(ErrorCode::CorruptedLog, format!("{what} at byte {at}"));
    let mut records = Vec::new();
    let mut at = 0usize;
    while at < bytes.len() {
        let rest = &bytes[at..];
        if rest.len() < HEADER_LEN {
            return Ok(Scan { records, valid_len: at as u64, torn_tail: true });
        }
        let len = u32::from_be_bytes(rest[0..4].try_into().unwrap()) as usize;
        let crc = u32::from_be_bytes(rest[4..8].try_into().unwrap());
        let end = HEADER_LEN + len;
        if rest.len() < end {
            return Ok(Scan { records, valid_len: at as u64, torn_tail: true });
        }
        let payload = &rest[HEADER_LEN..end];
        if crc32fast::hash(payload) != crc {
            if rest.len() == end {
                return Ok(Scan { records, valid_len: at as u64, torn_tail: true });
            }
            return Err(corrupted(at, "checksum mismatch"));
        }
        let record: Record =
            serde_json::from_slice(payload).map_err(|e| corrupted(at, &format!("undecodable record ({e})")))?;
        if record.is_empty() {
            return Err(corrupted(at, "empty record"));
        }
        records.push(record);
        at += end;
    }
    Ok(Scan { records, valid_len: at as u64, torn_tail: false })
}

/// Log file in a data directory. Every append is followed by `fsync`.
pub struct FileLog {
    path: PathBuf,
    file: File,
}

impl FileLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventLog for FileLog {
    fn append(&mut self, frame: &[u8]) -> io::Result<()> {
        self.file.write_all(frame)?;
        self.file.sync_data()
    }

    fn read_all(&mut self) -> io::Result<Vec<u8>> {
        let mut bytes = Vec::new();
        self.file.seek(SeekFrom::Start(0))?;
        self.file.read_to_end(&mut bytes)?;
        Ok(bytes)
    }

    fn truncate(&mut self, len: u64) -> io::Result<()> {
        self.file.set_len(len)?;
        self.file.sync_all()
    }
}

/// In-memory log whose buffer outlives the ledger that writes to it, so tests
/// and the simulator can "crash" a ledger and recover from the same bytes.
#[derive(Clone, Default)]
pub struct MemLog {
    bytes: Arc<Mutex<Vec<u8>>>,
}

impl MemLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes: Arc::new(Mutex::new(bytes)) }
    }

    pub fn snapshot(&self) -> Vec<u8> {
        self.bytes.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.bytes.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EventLog for MemLog {
    fn append(&mut self, frame: &[u8]) -> io::Result<()> {
        self.bytes.lock().extend_from_slice(frame);
        Ok(())
    }

    fn read_all(&mut self) -> io::Result<Vec<u8>> {
        Ok(self.snapshot())
    }

    fn truncate(&mut self, len: u64) -> io::Result<()> {
        self.bytes.lock().truncate(len as usize);
        Ok(())
    }
}
