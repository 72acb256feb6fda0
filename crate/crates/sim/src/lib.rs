//! Deterministic end-to-end simulation of the ledger and its wallets.
//!
//! A [`Scenario`] names some actors and a schedule of steps: printing,
//! paying online and offline, syncing, revoking, rotating, crashing and
//! restarting the service, partitioning the network, and adversary actions
//! that work only from copied payloads. [`run_scenario`] plays it against a
//! fresh in-process service (optionally over real HTTP), checks the global
//! invariants after every step and returns a [`Trace`] plus a [`Report`].
//!
//! All randomness comes from the scenario seed, so equal seeds give
//! byte-identical traces.
//!
//! ```
//! let scenario = pyom_sim::Scenario::from_json(r#"{
//!     "name": "hello", "seed": 1,
//!     "actors": [{"name": "alice", "kind": "user", "balance": "20.00"},
//!                {"name": "bob", "kind": "user"}],
//!     "steps": [
//!         {"op": "print", "actor": "alice", "amount": "5.00", "as": "n1"},
//!         {"op": "deposit", "actor": "bob", "note": "n1", "expect": "credited 5.00 USD"},
//!         {"op": "deposit", "actor": "bob", "note": "n1", "expect": "error already-redeemed"}
//!     ],
//!     "expect": {"balances": {"alice": "15.00", "bob": "5.00"}}
//! }"#).unwrap();
//! let run = pyom_sim::run_scenario(&scenario).unwrap();
//! assert!(run.report.passed, "{:?}", run.report.failures);
//! ```

pub mod corpus;
pub mod generate;
pub mod oracle;
pub mod runner;
pub mod scenario;
pub mod service;
pub mod trace;

pub use oracle::{conservation_oracle, replay_oracle, OracleReport};
pub use runner::{run_scenario, Check, Failure, Report, Run};
pub use scenario::{Adversary, Scenario, Step, StepSpec, Transport};
pub use trace::{Observed, Trace, TraceEntry};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/notes.md")]
    mod notes {}
    #[doc = include_str!("../../../book/src/spending.md")]
    mod spending {}
    #[doc = include_str!("../../../book/src/offline.md")]
    mod offline {}
    #[doc = include_str!("../../../book/src/revocation.md")]
    mod revocation {}
    #[doc = include_str!("../../../book/src/durability.md")]
    mod durability {}
    #[doc = include_str!("../../../book/src/wallet.md")]
    mod wallet {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("bad scenario: {0}")]
    Scenario(String),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
