//! Scenario documents.
//!
//! A scenario is a JSON file: actors, an ordered list of steps, and optional
//! expectations. Amounts are written in major units (`"7.50"`) in the
//! scenario's currency. Notes are referred to by the name given when they were
//! printed (`"as": "n1"`).

use std::collections::BTreeMap;

use pyom_core::{Currency, MoneyAmount};
use pyom_ledger::api::NoteStatus;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub seed: u64,
    #[serde(default)]
    pub transport: Transport,
    #[serde(default = "usd")]
    pub currency: Currency,
    /// Render `note.png` for every print. Off by default: it is slow and the
    /// scenarios never look at it.
    #[serde(default)]
    pub png: bool,
    pub actors: Vec<ActorSpec>,
    pub steps: Vec<StepSpec>,
    #[serde(default)]
    pub expect: Expectations,
}

fn usd() -> Currency {
    Currency::USD
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Wallets call the ledger in-process.
    #[default]
    Loopback,
    /// Wallets talk HTTP to a server on 127.0.0.1.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    User,
    Merchant,
    /// A second wallet holding the credentials of the merchant named in `of`:
    /// another till of the same shop, with its own offline queue.
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub name: String,
    pub kind: ActorKind,
    /// Opening balance in major units.
    #[serde(default = "zero")]
    pub balance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub of: Option<String>,
}

fn zero() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    #[serde(flatten)]
    pub step: Step,
    /// Exact outcome string the step must produce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
}

impl From<Step> for StepSpec {
    fn from(step: Step) -> Self {
        StepSpec { step, expect: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Print {
        actor: String,
        amount: String,
        /// Bind the note to this merchant.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        merchant: Option<String>,
        #[serde(rename = "as")]
        name: String,
    },
    /// Online redemption into the actor's own account.
    Deposit { actor: String, note: String },
    AcceptOffline { actor: String, note: String },
    Sync { actor: String },
    RefreshKeys { actor: String },
    Revoke { actor: String, note: String },
    Rotate { actor: String },
    RedeemBatch { actor: String, notes: Vec<String>, bill: String },
    Allowlist { actor: String, allowed: Vec<String> },
    Balance { actor: String },
    Status { note: String },
    /// Kills the service. With `torn`, a partial frame is left at the log tail
    /// as if a write was in flight.
    Crash {
        #[serde(default)]
        torn: bool,
    },
    /// Runs `step` with the log set to die halfway through its next write,
    /// then kills the service.
    CrashDuring { step: Box<StepSpec> },
    /// Recovers the service from its log (crashing it first if it is up).
    Restart,
    Partition { on: bool },
    Adversary(Adversary),
    /// Runs `repeat` copies of `steps` on parallel threads and joins.
    Concurrent {
        #[serde(default = "one")]
        repeat: usize,
        steps: Vec<StepSpec>,
    },
}

fn one() -> usize {
    1
}

/// What a holder of copied payloads can do. Adversaries never see keys other
/// than those printed on notes they have handled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Adversary {
    /// Presents a copy of `note` to `at`: offline to a merchant, as a deposit
    /// by a user.
    DuplicateNote { note: String, at: String },
    /// Presents `count` fabricated notes to `at`.
    ForgeNote {
        #[serde(default = "one")]
        count: usize,
        mode: ForgeMode,
        /// Payload to flip bits in (`bitflip`) or to copy the binding from.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<String>,
        at: String,
    },
    /// Resubmits the last redeem request seen for `note`, optionally with the
    /// payee swapped.
    ReplayRedeem {
        note: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payee: Option<String>,
    },
    /// Offers a bound note to its merchant after the merchant rotated.
    StaleEpochSpend { note: String, at: String },
    /// Puts `b`'s secret on `a`.
    SpliceNotes { a: String, b: String, at: String },
    /// Rewrites the value printed on `note`.
    TamperValue { note: String, amount: String, at: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgeMode {
    /// Fresh random id, secret and signatures.
    Random,
    /// A seen payload with one signature bit flipped.
    Bitflip,
}

/// Checked once the schedule has run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectations {
    /// Actor name to balance in major units.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub balances: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub statuses: BTreeMap<String, NoteStatus>,
    /// Actor name to offline queue length.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub queues: BTreeMap<String, usize>,
    /// Final balances and statuses equal those of the same scenario with every
    /// crash and restart removed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub matches_crash_free_run: bool,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn amount(&self, text: &str) -> Result<MoneyAmount, SimError> {
        MoneyAmount::parse_major(text, self.currency)
            .map_err(|e| SimError::Scenario(format!("bad amount {text:?}: {e}")))
    }

    /// The same schedule with crashes, restarts and injected write failures
    /// removed.
    pub fn without_crashes(&self) -> Scenario {
        fn strip(steps: &[StepSpec]) -> Vec<StepSpec> {
            steps
                .iter()
                .filter_map(|s| match &s.step {
                    Step::Crash { .. } | Step::Restart => None,
                    Step::CrashDuring { step } => Some(StepSpec { step: step.step.clone(), expect: None }),
                    Step::Concurrent { repeat, steps } => {
                        Some(StepSpec { step: Step::Concurrent { repeat: *repeat, steps: strip(steps) }, expect: None })
                    }
                    other => Some(StepSpec { step: other.clone(), expect: None }),
                })
                .collect()
        }
        Scenario {
            name: format!("{} (crash-free)", self.name),
            steps: strip(&self.steps),
            expect: Expectations::default(),
            ..self.clone()
        }
    }

    /// Rejects references to undeclared actors and unparsable amounts. Note
    /// names are only known at run time.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut names = BTreeMap::new();
        for a in &self.actors {
            if names.insert(a.name.as_str(), a.kind).is_some() {
                return Err(SimError::Scenario(format!("actor {:?} declared twice", a.name)));
            }
            self.amount(&a.balance)?;
            match (a.kind, &a.of) {
                (ActorKind::Terminal, Some(of)) if names.get(of.as_str()) == Some(&ActorKind::Merchant) => {}
                (ActorKind::Terminal, _) => {
                    return Err(SimError::Scenario(format!(
                        "terminal {:?} needs `of` naming a merchant declared before it",
                        a.name
                    )))
                }
                (_, Some(_)) => return Err(SimError::Scenario(format!("only terminals take `of` ({:?})", a.name))),
                _ => {}
            }
        }
        let actor = |n: &String| {
            names.contains_key(n.as_str()).then_some(()).ok_or_else(|| SimError::Scenario(format!("unknown actor {n:?}")))
        };
        fn walk(
            steps: &[StepSpec],
            s: &Scenario,
            actor: &dyn Fn(&String) -> Result<(), SimError>,
        ) -> Result<(), SimError> {
            for spec in steps {
                match &spec.step {
                    Step::Print { actor: a, amount, merchant, .. } => {
                        actor(a)?;
                        s.amount(amount)?;
                        merchant.iter().try_for_each(actor)?;
                    }
                    Step::Deposit { actor: a, .. }
                    | Step::AcceptOffline { actor: a, .. }
                    | Step::Sync { actor: a }
                    | Step::RefreshKeys { actor: a }
                    | Step::Revoke { actor: a, .. }
                    | Step::Rotate { actor: a }
                    | Step::Balance { actor: a } => actor(a)?,
                    Step::RedeemBatch { actor: a, bill, .. } => {
                        actor(a)?;
                        s.amount(bill)?;
                    }
                    Step::Allowlist { actor: a, allowed } => {
                        actor(a)?;
                        allowed.iter().try_for_each(actor)?;
                    }
                    Step::Status { .. } | Step::Crash { .. } | Step::Restart | Step::Partition { .. } => {}
                    Step::CrashDuring { step } => walk(std::slice::from_ref(step), s, actor)?,
                    Step::Concurrent { steps, .. } => {
                        for inner in steps {
                            if matches!(
                                inner.step,
                                Step::Crash { .. }
                                    | Step::CrashDuring { .. }
                                    | Step::Restart
                                    | Step::Partition { .. }
                                    | Step::Concurrent { .. }
                            ) {
                                return Err(SimError::Scenario("concurrent groups hold client operations only".into()));
                            }
                        }
                        walk(steps, s, actor)?
                    }
                    Step::Adversary(adv) => match adv {
                        Adversary::DuplicateNote { at, .. }
                        | Adversary::ForgeNote { at, .. }
                        | Adversary::StaleEpochSpend { at, .. }
                        | Adversary::SpliceNotes { at, .. } => actor(at)?,
                        Adversary::TamperValue { at, amount, .. } => {
                            actor(at)?;
                            s.amount(amount)?;
                        }
                        Adversary::ReplayRedeem { payee, .. } => payee.iter().try_for_each(actor)?,
                    },
                }
            }
            Ok(())
        }
        walk(&self.steps, self, &actor)?;
        for name in self.expect.balances.keys().chain(self.expect.queues.keys()) {
            actor(name)?;
        }
        for amount in self.expect.balances.values() {
            self.amount(amount)?;
        }
        Ok(())
    }
}
