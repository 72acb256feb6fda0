//! The shipped scenarios, compiled in so that `pyom-sim corpus` and the tests
//! do not depend on the working directory.

use crate::{Scenario, SimError};

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        pub const FILES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../scenarios/", $name, ".json")))),*
        ];
    };
}

corpus!(
    "print-and-deposit",
    "duplicate-bound-note",
    "forge-random",
    "forge-bitflip",
    "replay-redeem",
    "stale-epoch",
    "splice-notes",
    "tamper-value",
    "change-mechanism-a",
    "change-mechanism-b",
    "revocation-orderings",
    "partition-and-sync",
    "crash-mid-batch",
    "redeem-race",
    "allowlist",
    "over-http",
);

pub fn load() -> Result<Vec<Scenario>, SimError> {
    FILES
        .iter()
        .map(|(name, text)| Scenario::from_json(text).map_err(|e| SimError::Scenario(format!("{name}: {e}"))))
        .collect()
}
