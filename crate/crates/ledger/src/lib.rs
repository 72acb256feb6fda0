//! Central ledger for self-printed notes.
//!
//! The ledger keeps accounts, one record per issued note, and each merchant's
//! sequence of epoch keys. All state is a fold over an append-only event log
//! ([`log`]), so recovery after a crash is just replaying the file.
//!
//! [`Ledger`] is the service; [`LedgerApi`] is its transport-neutral surface,
//! implemented in-process by `Ledger` itself and over HTTP by [`http`] plus a
//! client elsewhere.

pub mod api;
pub mod error;
pub mod events;
#[cfg(feature = "server")]
pub mod http;
pub mod keys;
pub mod log;
mod loopback;
pub mod service;
pub mod state;

pub use api::{ApiError, LedgerApi};
pub use error::{ErrorCode, LedgerError, NoteFailure};
pub use events::{AccountKind, EventPayload, LedgerEvent, Record};
pub use keys::{MintSeed, Token};
pub use log::{EventLog, FileLog, MemLog};
pub use service::Ledger;
pub use state::{CashRecord, CashStatus, LedgerState};
