//! Executes a [`Scenario`] against a fresh service and real wallets.

use std::collections::{BTreeMap, HashMap};

use pyom_core::{
    encode_note, offline_verify, redeem_signature, AccountId, CashId, CashNote, MoneyAmount,
    SecretSeed, Signature, Verdict,
};
use pyom_ledger::api::{AllowlistRequest, LedgerApi, NoteStatus, RedeemRequest, RevocationOutcome};
use pyom_ledger::log::scan;
use pyom_ledger::{AccountKind, EventPayload, LedgerEvent, LedgerState, MintSeed};
use pyom_wallet::{PrintOptions, Wallet, WalletError, WalletStore};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::oracle::{conservation_oracle, replay_oracle, OracleReport};
use crate::scenario::{ActorKind, Adversary, ForgeMode, Scenario, Step, StepSpec, Transport};
use crate::service::Service;
use crate::trace::{Observed, Trace, TraceEntry};
use crate::SimError;

/// Byte offsets inside a canonical payload.
mod layout {
    use std::ops::Range;
    pub const MINOR_UNITS: Range<usize> = 9..17;
    pub const SECRET: Range<usize> = 33..65;
    pub const ISSUANCE_SIG: Range<usize> = 65..129;
    pub const ENDORSEMENT_SIG: Range<usize> = 149..213;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// A step's outcome or a final expectation did not match.
    Expectation,
    Conservation,
    /// A redeemed or revoked note changed state again.
    TerminalStatus,
    DoubleSpend,
    /// A settlement differed from one-by-one replay.
    Replay,
    /// A restarted service did not come back in its committed state.
    Recovery,
    Oracle,
    CrashFreeRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub step: usize,
    pub check: Check,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub transport: Transport,
    pub passed: bool,
    pub steps: usize,
    pub events: usize,
    pub failures: Vec<Failure>,
    pub oracle: OracleReport,
    /// Final balance of every user and merchant.
    pub balances: BTreeMap<String, String>,
    /// Final status of every printed note.
    pub statuses: BTreeMap<String, NoteStatus>,
    pub trace_digest: String,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub trace: Trace,
    pub report: Report,
}

/// Runs `scenario` from a fresh service. After every step it checks
/// conservation, that no note is redeemed twice and that terminal notes stay
/// terminal; every sync is compared against [`replay_oracle`] and every
/// restart against a fold of the log. The trace is then handed to
/// [`conservation_oracle`].
///
/// Errors only for malformed scenarios or a broken environment; invariant
/// violations are failures in the report.
pub fn run_scenario(scenario: &Scenario) -> Result<Run, SimError> {
    scenario.validate()?;
    let mut world = World::new(scenario)?;
    for (i, spec) in scenario.steps.iter().enumerate() {
        world.step(i + 1, spec);
    }
    if !world.service.is_up() {
        world.step(scenario.steps.len() + 1, &StepSpec::from(Step::Restart));
    }
    world.finish()
}

struct Actor {
    kind: ActorKind,
    wallet: Wallet,
}

#[derive(Clone)]
struct NoteEntry {
    note: CashNote,
    payload: Vec<u8>,
}

/// What one client operation produced; merged into the world afterwards so
/// that concurrent groups can run against a shared `&World`.
#[derive(Default)]
struct Exec {
    outcome: String,
    notes: Vec<(String, NoteEntry)>,
    redeems: Vec<(String, RedeemRequest)>,
    failures: Vec<(Check, String)>,
}

impl Exec {
    fn outcome(outcome: impl Into<String>) -> Self {
        Exec { outcome: outcome.into(), ..Default::default() }
    }
}

fn error_outcome(e: &WalletError) -> String {
    match e {
        WalletError::Network(_) => "error network".into(),
        WalletError::Rejected(r) => format!("REJECT {}", r.code()),
        e => match e.code() {
            Some(code) => format!("error {code}"),
            None => format!("error {e}"),
        },
    }
}

fn verdict(v: Verdict) -> String {
    match v {
        Verdict::Accept => "ACCEPT".into(),
        Verdict::Reject(r) => format!("REJECT {}", r.code()),
    }
}

struct World<'s> {
    scenario: &'s Scenario,
    service: Service,
    _dir: tempfile::TempDir,
    actors: BTreeMap<String, Actor>,
    names: HashMap<AccountId, String>,
    notes: BTreeMap<String, NoteEntry>,
    redeems: BTreeMap<String, RedeemRequest>,
    rng: ChaCha20Rng,
    cursor: u64,
    minted: u128,
    terminal: HashMap<CashId, u64>,
    /// State hash when the service last went down.
    crash_hash: Option<[u8; 32]>,
    pending: Vec<LedgerEvent>,
    entries: Vec<TraceEntry>,
    failures: Vec<Failure>,
}

impl<'s> World<'s> {
    fn new(scenario: &'s Scenario) -> Result<Self, SimError> {
        let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let seed = MintSeed::new(rng.gen());
        let service = Service::start(seed, scenario.currency, scenario.transport)
            .map_err(|e| SimError::Setup(e.to_string()))?;
        let dir = tempfile::tempdir()?;
        let mut world = World {
            scenario,
            service,
            actors: BTreeMap::new(),
            names: HashMap::new(),
            notes: BTreeMap::new(),
            redeems: BTreeMap::new(),
            rng,
            cursor: 0,
            minted: 0,
            terminal: HashMap::new(),
            crash_hash: None,
            pending: Vec::new(),
            entries: Vec::new(),
            failures: Vec::new(),
            _dir: dir,
        };

        for spec in &scenario.actors {
            let store = WalletStore::new(world._dir.path().join(&spec.name));
            let setup = |e: WalletError| SimError::Setup(format!("actor {}: {e}", spec.name));
            let wallet = match spec.kind {
                ActorKind::User | ActorKind::Merchant => {
                    let kind = if spec.kind == ActorKind::User { AccountKind::User } else { AccountKind::Merchant };
                    let initial = scenario.amount(&spec.balance)?;
                    Wallet::init(store, &world.service, kind, initial, None).map_err(setup)?
                }
                ActorKind::Terminal => {
                    let of = spec.of.as_ref().expect("validated");
                    store.write_credentials(world.actors[of].wallet.credentials()).map_err(setup)?;
                    let wallet = Wallet::open(store).map_err(setup)?;
                    wallet.refresh_keys(&world.service).map_err(setup)?;
                    wallet
                }
            };
            world.names.entry(wallet.account_id()).or_insert_with(|| spec.name.clone());
            world.actors.insert(spec.name.clone(), Actor { kind: spec.kind, wallet });
        }
        world.record(0, "setup".into(), format!("{} actors", scenario.actors.len()));
        Ok(world)
    }

    fn actor(&self, name: &str) -> &Actor {
        &self.actors[name]
    }

    fn account(&self, name: &str) -> AccountId {
        self.actor(name).wallet.account_id()
    }

    fn name_of(&self, id: &AccountId) -> String {
        self.names.get(id).cloned().unwrap_or_else(|| id.to_string())
    }

    fn amount(&self, text: &str) -> MoneyAmount {
        self.scenario.amount(text).expect("validated")
    }

    fn step(&mut self, index: usize, spec: &StepSpec) {
        let op = op_name(&spec.step);
        let now = index as u64;
        let outcome = match &spec.step {
            Step::Crash { torn } => {
                if self.service.is_up() {
                    self.crash(index, *torn);
                    "crashed".into()
                } else {
                    "already down".into()
                }
            }
            Step::CrashDuring { step } => {
                self.service.arm_torn_write();
                let mut rng = ChaCha20Rng::seed_from_u64(self.rng.next_u64());
                let exec = self.exec(&step.step, &mut rng, now, false);
                let inner = self.merge(index, exec);
                self.crash(index, false);
                format!("crashed during {}: {inner}", op_name(&step.step))
            }
            Step::Restart => self.restart(index),
            Step::Partition { on } => {
                self.service.set_partition(*on);
                format!("partition {}", if *on { "on" } else { "off" })
            }
            Step::Concurrent { repeat, steps } => {
                let jobs: Vec<(&StepSpec, u64)> = (0..*repeat)
                    .flat_map(|_| steps.iter())
                    .map(|s| (s, self.rng.next_u64()))
                    .collect();
                let world = &*self;
                let results: Vec<(Exec, Option<&String>)> = std::thread::scope(|scope| {
                    let handles: Vec<_> = jobs
                        .iter()
                        .map(|(s, seed)| {
                            scope.spawn(move || {
                                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                                (world.exec(&s.step, &mut rng, now, false), s.expect.as_ref())
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("step thread panicked")).collect()
                });
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for (exec, expect) in results {
                    if let Some(expect) = expect {
                        if *expect != exec.outcome {
                            self.fail(index, Check::Expectation, format!("expected {expect:?}, got {:?}", exec.outcome));
                        }
                    }
                    let outcome = self.merge(index, exec);
                    *counts.entry(outcome).or_default() += 1;
                }
                counts.iter().map(|(o, n)| format!("{n}x {o}")).collect::<Vec<_>>().join(", ")
            }
            step => {
                let mut rng = ChaCha20Rng::seed_from_u64(self.rng.next_u64());
                let exec = self.exec(step, &mut rng, now, true);
                self.merge(index, exec)
            }
        };
        if let Some(expect) = &spec.expect {
            if *expect != outcome {
                self.fail(index, Check::Expectation, format!("expected {expect:?}, got {outcome:?}"));
            }
        }
        self.record(index, op, outcome);
    }

    fn merge(&mut self, index: usize, exec: Exec) -> String {
        self.notes.extend(exec.notes);
        self.redeems.extend(exec.redeems);
        for (check, detail) in exec.failures {
            self.fail(index, check, detail);
        }
        exec.outcome
    }

    fn fail(&mut self, step: usize, check: Check, detail: String) {
        self.failures.push(Failure { step, check, detail });
    }

    fn crash(&mut self, index: usize, torn: bool) {
        self.collect(index);
        self.crash_hash = self.service.ledger().map(|l| l.state_hash());
        self.service.crash(torn);
    }

    fn restart(&mut self, index: usize) -> String {
        if self.service.is_up() {
            self.crash(index, false);
        }
        if let Err(e) = self.service.restart() {
            self.fail(index, Check::Recovery, format!("recovery failed: {e}"));
            return format!("error {}", e.error_code);
        }
        let ledger = self.service.ledger().expect("just restarted");
        let hash = ledger.state_hash();
        if let Some(before) = self.crash_hash.take() {
            if before != hash {
                self.fail(index, Check::Recovery, "recovered state differs from the committed state".into());
            }
        }
        let folded = scan(&self.service.log_bytes())
            .and_then(|s| LedgerState::fold(self.service.seed(), self.service.currency(), &s.records));
        match folded {
            Ok(state) if state.state_hash() == hash => {}
            Ok(_) => self.fail(index, Check::Recovery, "recovered state differs from a fold of the log".into()),
            Err(e) => self.fail(index, Check::Recovery, format!("log does not fold: {e}")),
        }
        if ledger.next_seq() != self.cursor {
            self.fail(
                index,
                Check::Recovery,
                format!("recovered {} events, {} were committed", ledger.next_seq(), self.cursor),
            );
        }
        format!("recovered {} events", ledger.next_seq())
    }

    /// Pulls newly committed events and checks the per-event invariants.
    fn collect(&mut self, index: usize) {
        let Some(ledger) = self.service.ledger() else { return };
        let events = ledger.events_since(self.cursor);
        self.cursor += events.len() as u64;
        for event in &events {
            let seq = event.seq;
            match &event.payload {
                EventPayload::AccountCreated { initial_balance, .. } => self.minted += *initial_balance as u128,
                EventPayload::CashRedeemed { cash_id, .. } => {
                    if let Some(prev) = self.terminal.insert(*cash_id, seq) {
                        self.fail(index, Check::DoubleSpend, format!("{cash_id} redeemed at {seq}, already final at {prev}"));
                    }
                }
                EventPayload::CashRevoked { cash_id, .. } | EventPayload::RevocationRequested { cash_id } => {
                    if let Some(prev) = self.terminal.get(cash_id) {
                        self.fail(index, Check::TerminalStatus, format!("{cash_id} changed at {seq}, already final at {prev}"));
                    }
                    if matches!(event.payload, EventPayload::CashRevoked { .. }) {
                        self.terminal.insert(*cash_id, seq);
                    }
                }
                _ => {}
            }
        }
        self.pending.extend(events);
    }

    fn record(&mut self, index: usize, op: String, outcome: String) {
        self.collect(index);
        let observed = self.service.ledger().map(|ledger| {
            let (observed, total) = ledger.with_state(|s| {
                let balances = s.accounts.iter().map(|(id, a)| (*id, a.balance)).collect();
                let outstanding =
                    s.cash.values().filter(|c| c.status.is_outstanding()).map(|c| c.amount).sum();
                (Observed { balances, outstanding }, s.total_value())
            });
            if total != self.minted {
                self.fail(index, Check::Conservation, format!("total value {total}, minted {}", self.minted));
            }
            observed
        });
        let events = std::mem::take(&mut self.pending);
        self.entries.push(TraceEntry { step: index, op, outcome, events, observed });
    }

    /// One client operation. Takes `&self` so concurrent groups can share the
    /// world; all mutation comes back in the [`Exec`].
    fn exec(&self, step: &Step, rng: &mut ChaCha20Rng, now: u64, check_sync: bool) -> Exec {
        let api: &dyn LedgerApi = &self.service;
        macro_rules! note {
            ($name:expr) => {
                match self.notes.get($name.as_str()) {
                    Some(n) => n,
                    None => return Exec::outcome(format!("skipped: unknown note {}", $name)),
                }
            };
        }
        match step {
            Step::Print { actor, amount, merchant, name } => {
                let wallet = &self.actor(actor).wallet;
                let merchant = merchant.as_ref().map(|m| self.account(m));
                let amount = self.amount(amount);
                match wallet.print(api, rng, amount, merchant, PrintOptions { png: self.scenario.png }) {
                    Ok(printed) => {
                        let payload = encode_note(&printed.note).expect("printed note encodes").into_bytes();
                        Exec {
                            outcome: format!("printed {name} {amount}"),
                            notes: vec![(name.clone(), NoteEntry { note: printed.note, payload })],
                            ..Default::default()
                        }
                    }
                    Err(e) => Exec::outcome(error_outcome(&e)),
                }
            }
            Step::Deposit { actor, note } => {
                let entry = note!(note);
                self.deposit(actor, note, &entry.payload)
            }
            Step::AcceptOffline { actor, note } => {
                let entry = note!(note);
                Exec::outcome(self.accept(actor, rng, now, &entry.payload))
            }
            Step::Sync { actor } => self.sync(actor, check_sync),
            Step::RefreshKeys { actor } => match self.actor(actor).wallet.refresh_keys(api) {
                Ok(_) => Exec::outcome("refreshed"),
                Err(e) => Exec::outcome(error_outcome(&e)),
            },
            Step::Revoke { actor, note } => {
                let entry = note!(note);
                Exec::outcome(match self.actor(actor).wallet.revoke(api, &entry.note.cash_id) {
                    Ok(RevocationOutcome::Finalized) => "finalized".into(),
                    Ok(RevocationOutcome::Pending) => "pending".into(),
                    Err(e) => error_outcome(&e),
                })
            }
            Step::Rotate { actor } => Exec::outcome(match self.actor(actor).wallet.rotate_epoch(api) {
                Ok(epoch) => format!("epoch {}", epoch.epoch_id),
                Err(e) => error_outcome(&e),
            }),
            Step::RedeemBatch { actor, notes, bill } => {
                let mut payloads = Vec::new();
                for n in notes {
                    payloads.push(note!(n).payload.as_slice());
                }
                Exec::outcome(match self.actor(actor).wallet.redeem_batch(api, &payloads, self.amount(bill)) {
                    Ok(settlement) => {
                        let mut out = format!("credited {}", settlement.merchant_credit);
                        for c in &settlement.change_credits {
                            out += &format!(", change {} to {}", c.amount, self.name_of(&c.account_id));
                        }
                        out
                    }
                    Err(e) => error_outcome(&e),
                })
            }
            Step::Allowlist { actor, allowed } => {
                let creds = self.actor(actor).wallet.credentials();
                let req = AllowlistRequest { allowed: allowed.iter().map(|a| self.account(a)).collect() };
                Exec::outcome(match api.set_allowlist(&creds.token, &creds.account_id, &req) {
                    Ok(()) => "allowlist set".into(),
                    Err(e) => error_outcome(&e.into()),
                })
            }
            Step::Balance { actor } => Exec::outcome(match self.actor(actor).wallet.balance(api) {
                Ok(b) => b.to_string(),
                Err(e) => error_outcome(&e),
            }),
            Step::Status { note } => {
                let entry = note!(note);
                Exec::outcome(match api.status(&entry.note.cash_id) {
                    Ok(s) => s.status.to_string(),
                    Err(e) => error_outcome(&e.into()),
                })
            }
            Step::Adversary(adv) => self.adversary(adv, rng, now),
            Step::Crash { .. } | Step::CrashDuring { .. } | Step::Restart | Step::Partition { .. } | Step::Concurrent { .. } => {
                unreachable!("service-level steps are handled by World::step")
            }
        }
    }

    fn deposit(&self, actor: &str, note_name: &str, payload: &[u8]) -> Exec {
        let wallet = &self.actor(actor).wallet;
        let mut exec = match wallet.deposit(&self.service, payload) {
            Ok(credited) => Exec::outcome(format!("credited {credited}")),
            Err(e) => Exec::outcome(error_outcome(&e)),
        };
        // Whatever went over the wire can be replayed later.
        if let Ok(note) = pyom_core::decode_any(payload) {
            let payee = wallet.account_id();
            let redeem_sig = redeem_signature(&note.cash_secret, &note.cash_id, &payee);
            exec.redeems.push((note_name.to_owned(), RedeemRequest { cash_id: note.cash_id, payee, redeem_sig }));
        }
        exec
    }

    fn accept(&self, actor: &str, rng: &mut dyn RngCore, now: u64, payload: &[u8]) -> String {
        match self.actor(actor).wallet.accept_offline(rng, now, payload) {
            Ok(acceptance) => verdict(acceptance.report.overall),
            Err(e) => error_outcome(&e),
        }
    }

    /// Offline to merchants and their terminals, as a deposit by users.
    fn present(&self, at: &str, label: &str, rng: &mut dyn RngCore, now: u64, payload: &[u8]) -> Exec {
        match self.actor(at).kind {
            ActorKind::User => self.deposit(at, label, payload),
            ActorKind::Merchant | ActorKind::Terminal => Exec::outcome(self.accept(at, rng, now, payload)),
        }
    }

    fn sync(&self, actor: &str, check: bool) -> Exec {
        let wallet = &self.actor(actor).wallet;
        let before = check.then(|| {
            let receipts: Vec<_> =
                wallet.store().queue().unwrap_or_default().into_iter().filter_map(|q| q.receipt.ok()).collect();
            (self.service.log_bytes(), receipts)
        });
        let report = match wallet.sync(&self.service) {
            Ok(report) => report,
            Err(e) => return Exec::outcome(error_outcome(&e)),
        };
        let mut exec = Exec::outcome(report.to_string());
        if let Some((log, receipts)) = before.filter(|(_, r)| !r.is_empty()) {
            match replay_oracle(self.service.seed(), self.service.currency(), &log, &wallet.account_id(), &receipts) {
                Ok(expected) => {
                    use pyom_ledger::api::ReceiptOutcome;
                    let settled: Vec<_> = expected
                        .iter()
                        .filter_map(|r| match r.outcome {
                            ReceiptOutcome::Settled { credited } => Some((r.cash_id.expect("settled"), credited)),
                            _ => None,
                        })
                        .collect();
                    let rejected: Vec<_> = expected
                        .iter()
                        .filter_map(|r| match r.outcome {
                            ReceiptOutcome::Rejected { reason } => Some((r.cash_id, reason.to_string())),
                            _ => None,
                        })
                        .collect();
                    if settled != report.settled || rejected != report.rejected {
                        exec.failures.push((
                            Check::Replay,
                            format!("settlement {report}, one-by-one replay {} settled / {} rejected", settled.len(), rejected.len()),
                        ));
                    }
                }
                Err(e) => exec.failures.push((Check::Replay, format!("shadow ledger: {e}"))),
            }
        }
        exec
    }

    fn adversary(&self, adv: &Adversary, rng: &mut ChaCha20Rng, now: u64) -> Exec {
        macro_rules! note {
            ($name:expr) => {
                match self.notes.get($name.as_str()) {
                    Some(n) => n,
                    None => return Exec::outcome(format!("skipped: unknown note {}", $name)),
                }
            };
        }
        match adv {
            Adversary::DuplicateNote { note, at } | Adversary::StaleEpochSpend { note, at } => {
                let entry = note!(note);
                self.present(at, note, rng, now, &entry.payload)
            }
            Adversary::ForgeNote { count, mode, base, at } => {
                let base = match base {
                    Some(b) => Some(note!(b)),
                    None => None,
                };
                if *mode == ForgeMode::Bitflip && base.is_none() {
                    return Exec::outcome("skipped: bitflip needs a base note");
                }
                let (mut accepted, mut credited) = (0, 0);
                let mut out = Exec::default();
                for i in 0..*count {
                    let payload = match mode {
                        ForgeMode::Random => self.random_note(rng, base.map(|b| &b.note), at),
                        ForgeMode::Bitflip => {
                            let mut bytes = base.expect("checked").payload.clone();
                            let mut regions = vec![layout::ISSUANCE_SIG];
                            if bytes.len() >= layout::ENDORSEMENT_SIG.end {
                                regions.push(layout::ENDORSEMENT_SIG);
                            }
                            let region = regions[rng.gen_range(0..regions.len())].clone();
                            let byte = rng.gen_range(region);
                            bytes[byte] ^= 1 << rng.gen_range(0..8);
                            bytes
                        }
                    };
                    let exec = self.present(at, &format!("forged-{i}"), rng, now, &payload);
                    accepted += (exec.outcome == "ACCEPT") as usize;
                    credited += exec.outcome.starts_with("credited") as usize;
                    out.failures.extend(exec.failures);
                }
                out.outcome = format!("forged {count}: {accepted} accepted, {credited} credited");
                out
            }
            Adversary::ReplayRedeem { note, payee } => {
                let Some(req) = self.redeems.get(note) else {
                    return Exec::outcome(format!("skipped: no redeem of {note} seen"));
                };
                let mut req = req.clone();
                if let Some(p) = payee {
                    req.payee = self.account(p);
                }
                Exec::outcome(match self.service.redeem(&req) {
                    Ok(r) => format!("credited {}", r.credited),
                    Err(e) => error_outcome(&e.into()),
                })
            }
            Adversary::SpliceNotes { a, b, at } => {
                let (a, b) = (note!(a), note!(b));
                let mut payload = a.payload.clone();
                payload[layout::SECRET].copy_from_slice(&b.payload[layout::SECRET]);
                match self.actor(at).kind {
                    ActorKind::User => self.deposit(at, "spliced", &payload),
                    ActorKind::Merchant | ActorKind::Terminal => {
                        // On the wire the verification key is derived from the
                        // secret; a device can also present the fields as read.
                        let spliced = CashNote { cash_secret: b.note.cash_secret.clone(), ..a.note.clone() };
                        let wallet = &self.actor(at).wallet;
                        let fields = match wallet.store().keys() {
                            Ok(Some(keys)) => {
                                let epochs: Vec<_> = keys.epochs.iter().map(|e| (e.epoch_id, e.epoch_public)).collect();
                                verdict(offline_verify(&spliced, &wallet.account_id(), &epochs, &keys.mint_public).overall)
                            }
                            _ => "error no cached keys".into(),
                        };
                        let wire = self.accept(at, rng, now, &payload);
                        Exec::outcome(format!("{fields}; payload {wire}"))
                    }
                }
            }
            Adversary::TamperValue { note, amount, at } => {
                let entry = note!(note);
                let mut payload = entry.payload.clone();
                payload[layout::MINOR_UNITS].copy_from_slice(&self.amount(amount).minor_units.to_be_bytes());
                self.present(at, note, rng, now, &payload)
            }
        }
    }

    /// A note made of random bytes, shaped like `like` (or bound to `at` if it
    /// is a merchant).
    fn random_note(&self, rng: &mut ChaCha20Rng, like: Option<&CashNote>, at: &str) -> Vec<u8> {
        let cash_secret = SecretSeed(rng.gen());
        let mut sig = || {
            let mut s = [0u8; 64];
            rng.fill_bytes(&mut s);
            Signature(s)
        };
        let (issuance_sig, endorsement_sig) = (sig(), sig());
        let binding = match like {
            Some(n) => n.binding.map(|b| pyom_core::MerchantBinding { endorsement_sig, ..b }),
            None => match self.actor(at).kind {
                ActorKind::User => None,
                _ => {
                    let wallet = &self.actor(at).wallet;
                    let epoch_id = wallet
                        .store()
                        .keys()
                        .ok()
                        .flatten()
                        .and_then(|k| k.epochs.last().map(|e| e.epoch_id))
                        .unwrap_or(1);
                    Some(pyom_core::MerchantBinding { merchant_id: wallet.account_id(), epoch_id, endorsement_sig })
                }
            },
        };
        let note = CashNote {
            cash_id: CashId(rng.gen()),
            amount: like.map(|n| n.amount).unwrap_or(MoneyAmount::new(1000, self.scenario.currency)),
            cash_public: cash_secret.public_key(),
            cash_secret,
            issuance_sig,
            binding,
        };
        encode_note(&note).expect("forged note is well formed").into_bytes()
    }

    fn finish(mut self) -> Result<Run, SimError> {
        let last = self.scenario.steps.len();
        let ledger = self.service.ledger().expect("service is up at the end");
        let mut balances = BTreeMap::new();
        for spec in &self.scenario.actors {
            if spec.kind != ActorKind::Terminal {
                let b = pyom_ledger::Ledger::balance(&ledger, &self.account(&spec.name)).map_err(|e| SimError::Setup(e.to_string()))?;
                balances.insert(spec.name.clone(), b.to_string());
            }
        }
        let mut statuses = BTreeMap::new();
        for (name, entry) in &self.notes {
            if let Ok(s) = pyom_ledger::Ledger::status(&ledger, &entry.note.cash_id) {
                statuses.insert(name.clone(), s);
            }
        }

        let expect = &self.scenario.expect;
        for (name, want) in &expect.balances {
            let want = self.amount(want).to_string();
            let got = balances.get(name).cloned().unwrap_or_default();
            if want != got {
                self.fail(last, Check::Expectation, format!("balance of {name}: expected {want}, got {got}"));
            }
        }
        for (name, want) in &expect.statuses {
            match statuses.get(name) {
                Some(got) if got == want => {}
                got => self.fail(last, Check::Expectation, format!("status of {name}: expected {want}, got {got:?}")),
            }
        }
        for (name, want) in &expect.queues {
            let got = self.actor(name).wallet.queue_len().unwrap_or(usize::MAX);
            if got != *want {
                self.fail(last, Check::Expectation, format!("queue of {name}: expected {want}, got {got}"));
            }
        }
        if expect.matches_crash_free_run {
            let clean = run_scenario(&self.scenario.without_crashes())?.report;
            if clean.balances != balances || clean.statuses != statuses {
                self.fail(
                    last,
                    Check::CrashFreeRun,
                    format!(
                        "balances {balances:?} statuses {statuses:?}; crash-free run: balances {:?} statuses {:?}",
                        clean.balances, clean.statuses
                    ),
                );
            }
        }

        let trace = Trace { scenario: self.scenario.name.clone(), seed: self.scenario.seed, entries: self.entries };
        let oracle = conservation_oracle(&trace);
        if let Some(d) = &oracle.first_divergence {
            self.failures.push(Failure { step: d.step, check: Check::Oracle, detail: d.detail.clone() });
        }
        let report = Report {
            scenario: self.scenario.name.clone(),
            seed: self.scenario.seed,
            transport: self.scenario.transport,
            passed: self.failures.is_empty(),
            steps: last,
            events: trace.events().count(),
            failures: self.failures,
            oracle,
            balances,
            statuses,
            trace_digest: trace.digest(),
        };
        Ok(Run { trace, report })
    }
}

fn op_name(step: &Step) -> String {
    let v = serde_json::to_value(step).expect("step serializes");
    let op = v["op"].as_str().unwrap_or("?").to_owned();
    match v.get("action").and_then(|a| a.as_str()) {
        Some(action) => format!("{op}:{action}"),
        None => op,
    }
}
