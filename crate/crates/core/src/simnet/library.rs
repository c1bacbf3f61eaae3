//! Canned adversary scripts and scenario generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adversary::{Action, BitcastStrategy, Directive, Lie, MatchClaim, Step, Tamper, Target};
use super::scenario::{FaultyNode, Scenario, Values};
use crate::consensus::{data_symbols, min_symbol_bits};
use crate::diagnosis::NodeId;

/// Named scripts for a single faulty node; `peer` is some other node id.
pub fn scripts(peer: NodeId) -> Vec<(&'static str, Vec<Directive>)> {
    let always = |acts: Vec<Action>| acts.into_iter().map(Directive::always).collect::<Vec<_>>();
    vec![
        ("honest", vec![]),
        ("shift-value", always(vec![Action::ShiftValue])),
        (
            "corrupt-all",
            always(vec![Action::CorruptSymbol {
                target: Target::all(),
                tamper: Tamper::flip(),
            }]),
        ),
        (
            "corrupt-one",
            always(vec![Action::CorruptSymbol {
                target: Target::Node(peer),
                tamper: Tamper::random(),
            }]),
        ),
        ("silent-step1", always(vec![Action::Silent { step: Step::Step1 }])),
        ("silent-all", always(vec![Action::Silent { step: Step::All }])),
        ("equivocate-match", always(vec![Action::EquivocateMatchVector])),
        (
            "shift-claim-all-true",
            always(vec![
                Action::ShiftValue,
                Action::ClaimMatchVector {
                    claim: MatchClaim::AllTrue,
                },
            ]),
        ),
        ("false-alarm", always(vec![Action::FalseAlarm])),
        (
            "corrupt-suppress",
            always(vec![
                Action::CorruptSymbol {
                    target: Target::Node(peer),
                    tamper: Tamper::flip(),
                },
                Action::SuppressAlarm,
            ]),
        ),
        (
            "bad-helper",
            always(vec![Action::BadHelper {
                target: Target::all(),
                position: 0,
                tamper: Tamper::flip(),
            }]),
        ),
        (
            "shift-alarm-consistent-lie",
            always(vec![
                Action::ShiftValue,
                Action::FalseAlarm,
                Action::LieInFallback {
                    lie: Lie::ConsistentValue { tamper: Tamper::flip() },
                },
            ]),
        ),
        (
            "relay-equivocate",
            always(vec![Action::ByzantineBitcast {
                strategy: BitcastStrategy::Equivocate,
            }]),
        ),
        (
            "relay-random-chaos",
            always(vec![
                Action::ByzantineBitcast {
                    strategy: BitcastStrategy::Random,
                },
                Action::Chaos { rate: 0.3 },
            ]),
        ),
        ("slow-burn", slow_burn_directives(&[])),
    ]
}

/// Shift the value, raise a false alarm and lie about one reception from X
/// in the fallback: exactly one new dispute per fallback.
pub fn slow_burn_directives(after: &[NodeId]) -> Vec<Directive> {
    [
        Action::ShiftValue,
        Action::FalseAlarm,
        Action::LieInFallback {
            lie: Lie::ReceivedFrom {
                target: Target::first_trusted_in_x(),
                tamper: Tamper::flip(),
            },
        },
    ]
    .into_iter()
    .map(|action| Directive {
        generations: None,
        requires_isolated: after.to_vec(),
        action,
    })
    .collect()
}

/// The last `t` nodes run [`slow_burn_directives`] one at a time, highest id
/// first, each starting once its predecessors are isolated.
pub fn slow_burn(n: usize, t: usize, value_bits: usize, generations: usize) -> Scenario {
    let faulty: Vec<NodeId> = (n - t..n).rev().collect();
    Scenario {
        name: format!("slow-burn-n{n}-t{t}"),
        n,
        t,
        value_bits,
        total_bits: value_bits * generations,
        seed: 0,
        trace: false,
        values: Values::RandomCommon,
        faulty: faulty
            .iter()
            .enumerate()
            .map(|(i, &node)| FaultyNode {
                node,
                directives: slow_burn_directives(&faulty[..i]),
            })
            .collect(),
    }
}

fn random_target(rng: &mut ChaCha8Rng, n: usize) -> Target {
    match rng.gen_range(0..4) {
        0 => Target::all(),
        1 => Target::first_trusted_in_x(),
        _ => Target::Node(rng.gen_range(0..n)),
    }
}

fn random_tamper(rng: &mut ChaCha8Rng) -> Tamper {
    match rng.gen_range(0..4) {
        0 => Tamper::flip(),
        1 => Tamper::random(),
        2 => Tamper::Xor { xor: rng.gen_range(1..256) },
        _ => Tamper::Set { set: rng.gen_range(0..256) },
    }
}

fn random_action(rng: &mut ChaCha8Rng, n: usize) -> Action {
    let step = *[Step::Step1, Step::Step3, Step::Step5, Step::Step6, Step::Fallback, Step::All]
        .choose(rng)
        .expect("nonempty");
    let strategy = *[
        BitcastStrategy::Flip,
        BitcastStrategy::Zero,
        BitcastStrategy::Equivocate,
        BitcastStrategy::Silent,
        BitcastStrategy::Random,
    ]
    .choose(rng)
    .expect("nonempty");
    match rng.gen_range(0..12) {
        0 => Action::ShiftValue,
        1 => Action::CorruptSymbol {
            target: random_target(rng, n),
            tamper: random_tamper(rng),
        },
        2 => Action::Silent { step },
        3 => Action::EquivocateMatchVector,
        4 => Action::ClaimMatchVector {
            claim: if rng.gen_bool(0.5) { MatchClaim::AllTrue } else { MatchClaim::AllFalse },
        },
        5 => Action::FalseAlarm,
        6 => Action::SuppressAlarm,
        7 => Action::BadHelper {
            target: random_target(rng, n),
            position: rng.gen_range(0..3),
            tamper: random_tamper(rng),
        },
        8 => {
            let tamper = random_tamper(rng);
            let target = random_target(rng, n);
            let lie = match rng.gen_range(0..6) {
                0 => Lie::Value { tamper },
                1 => Lie::SentTo { target, tamper },
                2 => Lie::ReceivedFrom { target, tamper },
                3 => Lie::HelperSent { target, tamper },
                4 => Lie::HelperReceived { tamper },
                _ => Lie::ConsistentValue { tamper },
            };
            Action::LieInFallback { lie }
        }
        9 => Action::ByzantineBitcast { strategy },
        _ => Action::Chaos {
            rate: [0.1, 0.3, 0.6][rng.gen_range(0..3)],
        },
    }
}

/// A seeded random scenario at `n` nodes with `t = (n - 1) / 3`.
pub fn random_scenario(n: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = (n - 1) / 3;
    let m = min_symbol_bits(n) + rng.gen_range(0..3);
    let value_bits = data_symbols(n, t) * m;
    let generations = rng.gen_range(1..=4);
    let values = match rng.gen_range(0..10) {
        0..=5 => Values::RandomCommon,
        6..=7 => Values::Random,
        _ => {
            // two camps
            let a = format!("{:x}", rng.gen::<u64>());
            let b = format!("{:x}", rng.gen::<u64>());
            Values::PerNode {
                hex: (0..n).map(|i| if rng.gen_bool(0.7) || i == 0 { a.clone() } else { b.clone() }).collect(),
            }
        }
    };
    let count = if t == 0 { 0 } else { rng.gen_range(0..=t).max(rng.gen_range(0..=t)) };
    let mut ids: Vec<NodeId> = (0..n).collect();
    ids.shuffle(&mut rng);
    let faulty = ids[..count]
        .iter()
        .map(|&node| {
            let directives = (0..rng.gen_range(1..=3))
                .map(|_| Directive {
                    generations: rng
                        .gen_bool(0.3)
                        .then(|| (0..generations).filter(|_| rng.gen_bool(0.5)).collect()),
                    requires_isolated: Vec::new(),
                    action: random_action(&mut rng, n),
                })
                .collect();
            FaultyNode { node, directives }
        })
        .collect();
    Scenario {
        name: format!("random-n{n}-s{seed}"),
        n,
        t,
        value_bits,
        total_bits: value_bits * generations,
        seed,
        trace: false,
        values,
        faulty,
    }
}
