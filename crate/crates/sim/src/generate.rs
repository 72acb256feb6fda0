//! Random schedules for soak runs. Many generated steps are invalid on
//! purpose (spending spent notes, revoking someone else's note, paying while
//! partitioned); the invariants must hold regardless.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::scenario::{ActorKind, ActorSpec, Adversary, ForgeMode, Scenario, Step, StepSpec, Transport};

const USERS: [&str; 4] = ["u0", "u1", "u2", "u3"];
const MERCHANTS: [&str; 2] = ["m0", "m1"];
/// Merchants and their second till.
const TILLS: [&str; 3] = ["m0", "m1", "t0"];

#[derive(Clone)]
struct Printed {
    name: String,
    by: &'static str,
    bound_to: Option<&'static str>,
}

/// Generator-side bookkeeping: which notes have not been handed to any
/// spending step yet. It cannot know outcomes, only what it scheduled.
#[derive(Default)]
struct Notes {
    all: Vec<Printed>,
    unspent: Vec<Printed>,
}

impl Notes {
    fn print(&mut self, by: &'static str, bound_to: Option<&'static str>) -> String {
        let p = Printed { name: format!("n{}", self.all.len()), by, bound_to };
        self.all.push(p.clone());
        self.unspent.push(p.clone());
        p.name
    }

    /// Usually a note nobody has spent yet (bound ones if `bound`), sometimes
    /// any note at all so that double spends keep happening.
    fn spend(&mut self, rng: &mut ChaCha20Rng, bound: bool) -> Option<Printed> {
        let candidates: Vec<usize> =
            (0..self.unspent.len()).filter(|&i| !bound || self.unspent[i].bound_to.is_some()).collect();
        if candidates.is_empty() || rng.gen_bool(0.15) {
            return self.any(rng);
        }
        Some(self.unspent.swap_remove(*candidates.choose(rng).unwrap()))
    }

    fn any(&self, rng: &mut ChaCha20Rng) -> Option<Printed> {
        self.all.choose(rng).cloned()
    }
}

/// A `steps`-long schedule drawn from `seed`, on the loopback transport.
pub fn random_scenario(seed: u64, steps: usize) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut notes = Notes::default();
    let mut schedule: Vec<StepSpec> = Vec::with_capacity(steps);
    let mut partitioned = false;

    let amount = |rng: &mut ChaCha20Rng| {
        let cents: u64 = rng.gen_range(1..=2_000);
        format!("{}.{:02}", cents / 100, cents % 100)
    };

    while schedule.len() < steps {
        let user = *USERS.choose(&mut rng).unwrap();
        let merchant = *MERCHANTS.choose(&mut rng).unwrap();
        let anyone = *[user, merchant].choose(&mut rng).unwrap();

        let step = match rng.gen_range(0..100) {
            0..=15 => {
                let by = if rng.gen_bool(0.7) { user } else { merchant };
                let name = notes.print(by, None);
                Step::Print { actor: by.into(), amount: amount(&mut rng), merchant: None, name }
            }
            16..=31 => {
                let name = notes.print(user, Some(merchant));
                Step::Print { actor: user.into(), amount: amount(&mut rng), merchant: Some(merchant.into()), name }
            }
            32..=43 => match notes.spend(&mut rng, false) {
                Some(p) => {
                    let actor = match p.bound_to {
                        Some(m) if rng.gen_bool(0.8) => m,
                        _ => anyone,
                    };
                    Step::Deposit { actor: actor.into(), note: p.name }
                }
                None => continue,
            },
            44..=55 => match notes.spend(&mut rng, true) {
                Some(p) => {
                    let till = match p.bound_to {
                        Some("m0") if rng.gen_bool(0.4) => "t0",
                        Some(m) if rng.gen_bool(0.9) => m,
                        _ => *TILLS.choose(&mut rng).unwrap(),
                    };
                    Step::AcceptOffline { actor: till.into(), note: p.name }
                }
                None => continue,
            },
            56..=61 => Step::Sync { actor: (*TILLS.choose(&mut rng).unwrap()).into() },
            62..=66 => match notes.spend(&mut rng, false) {
                Some(p) => {
                    let actor = if rng.gen_bool(0.9) { p.by } else { anyone };
                    Step::Revoke { actor: actor.into(), note: p.name }
                }
                None => continue,
            },
            67..=69 => Step::Rotate { actor: merchant.into() },
            70..=71 => Step::RefreshKeys { actor: "t0".into() },
            72..=77 => {
                let n = rng.gen_range(1..=3);
                let picked: Vec<String> = (0..n).filter_map(|_| notes.spend(&mut rng, false).map(|p| p.name)).collect();
                if picked.is_empty() {
                    continue;
                }
                Step::RedeemBatch { actor: merchant.into(), notes: picked, bill: amount(&mut rng) }
            }
            78..=79 => Step::Balance { actor: anyone.into() },
            80 => match notes.any(&mut rng) {
                Some(p) => Step::Status { note: p.name },
                None => continue,
            },
            81 => {
                let allowed = if rng.gen_bool(0.7) { vec![] } else { vec![user.to_string()] };
                Step::Allowlist { actor: merchant.into(), allowed }
            }
            82..=91 => {
                let (Some(note), Some(other)) = (notes.any(&mut rng), notes.any(&mut rng)) else { continue };
                let (note, other) = (note.name, other.name);
                let till = *TILLS.choose(&mut rng).unwrap();
                let at = if rng.gen_bool(0.5) { till } else { user };
                Step::Adversary(match rng.gen_range(0..6) {
                    0 => Adversary::DuplicateNote { note, at: at.into() },
                    1 => Adversary::ForgeNote {
                        count: rng.gen_range(1..=3),
                        mode: if rng.gen_bool(0.5) { ForgeMode::Random } else { ForgeMode::Bitflip },
                        base: Some(note),
                        at: at.into(),
                    },
                    2 => Adversary::ReplayRedeem {
                        note,
                        payee: rng.gen_bool(0.3).then(|| anyone.to_string()),
                    },
                    3 => Adversary::StaleEpochSpend { note, at: till.into() },
                    4 => Adversary::SpliceNotes { a: note, b: other, at: at.into() },
                    _ => Adversary::TamperValue { note, amount: amount(&mut rng), at: at.into() },
                })
            }
            92..=95 => {
                partitioned = !partitioned;
                Step::Partition { on: partitioned }
            }
            96..=97 => {
                schedule.push(Step::Crash { torn: rng.gen_bool(0.5) }.into());
                Step::Restart
            }
            _ => {
                let inner = match (rng.gen_range(0..3), notes.any(&mut rng)) {
                    (0, Some(p)) => Step::Deposit { actor: anyone.into(), note: p.name },
                    (1, _) => Step::Sync { actor: (*TILLS.choose(&mut rng).unwrap()).into() },
                    _ => Step::Print { actor: user.into(), amount: amount(&mut rng), merchant: None, name: "crashed".into() },
                };
                schedule.push(Step::CrashDuring { step: Box::new(inner.into()) }.into());
                Step::Restart
            }
        };
        schedule.push(step.into());
    }
    schedule.truncate(steps);

    let mut actors: Vec<ActorSpec> = USERS
        .iter()
        .map(|u| ActorSpec { name: (*u).into(), kind: ActorKind::User, balance: "500.00".into(), of: None })
        .collect();
    actors.extend(
        MERCHANTS.iter().map(|m| ActorSpec { name: (*m).into(), kind: ActorKind::Merchant, balance: "100.00".into(), of: None }),
    );
    actors.push(ActorSpec { name: "t0".into(), kind: ActorKind::Terminal, balance: "0".into(), of: Some("m0".into()) });

    Scenario {
        name: format!("random-{seed}-{steps}"),
        description: "generated".into(),
        seed,
        transport: Transport::Loopback,
        currency: pyom_core::Currency::USD,
        png: false,
        actors,
        steps: schedule,
        expect: Default::default(),
    }
}
