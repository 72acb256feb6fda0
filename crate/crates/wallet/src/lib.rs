//! Wallet and merchant terminal for printed notes.
//!
//! [`Wallet`] holds the logic behind every `pyom` subcommand and works over
//! any [`LedgerApi`](pyom_ledger::LedgerApi): [`HttpClient`] for the real
//! service, or an in-process ledger in tests and simulations. Offline
//! acceptance takes no API handle at all, so it cannot touch the network.

mod client;
mod error;
mod qr;
pub mod store;
mod wallet;

pub use client::HttpClient;
pub use error::{Result, WalletError};
pub use qr::qr_png;
pub use store::WalletStore;
pub use wallet::{Acceptance, PrintOptions, PrintedNote, SyncReport, Wallet};
