use std::collections::BTreeMap;

use pyom_core::AccountId;
use pyom_ledger::LedgerEvent;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything a run did, step by step. Two runs of a scenario with the same
/// seed serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub scenario: String,
    pub seed: u64,
    pub entries: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 0 is actor setup; schedule steps count from 1.
    pub step: usize,
    pub op: String,
    pub outcome: String,
    /// Events the ledger committed during this step.
    pub events: Vec<LedgerEvent>,
    /// What the service reported after the step; absent while it was down.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Observed>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observed {
    pub balances: BTreeMap<AccountId, u64>,
    /// Σ amounts of active and revoke-pending notes.
    pub outstanding: u64,
}

impl Trace {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("trace serializes")
    }

    /// SHA-256 of the JSON form, hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_json()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn events(&self) -> impl Iterator<Item = &LedgerEvent> {
        self.entries.iter().flat_map(|e| &e.events)
    }
}
