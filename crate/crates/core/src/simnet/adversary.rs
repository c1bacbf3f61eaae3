//! Scripted Byzantine behavior.
//!
//! A faulty node follows the protocol except where an active directive
//! rewrites one of its outgoing messages. Hooks cover every message a node
//! emits: step-1 symbols, helper symbols, and every bitcast transmission
//! (its own broadcasts and its relays). A directive is active in a
//! generation when `generations` is absent or lists it, and every node in
//! `requires_isolated` is already isolated. Active directives apply in
//! script order, each to the output of the previous one.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitcast::{Envelope, Faults, InstanceKind};
use crate::bits::{self, Bits};
use crate::code::CodeSpec;
use crate::consensus::fallback::complement;
use crate::consensus::step::{step1_codeword, symbols_at};
use crate::consensus::{Claims, Roster};
use crate::diagnosis::{DiagnosisGraph, NodeId};
use crate::gf::{Symbol, SymbolLayout};

/// Whom a directive is aimed at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Node(NodeId),
    Named(NamedTarget),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTarget {
    All,
    /// The lowest-id member of X that the faulty node trusts; matches nothing
    /// before X is known.
    FirstTrustedInX,
}

impl Target {
    pub fn all() -> Self {
        Target::Named(NamedTarget::All)
    }

    pub fn first_trusted_in_x() -> Self {
        Target::Named(NamedTarget::FirstTrustedInX)
    }

    fn matches(&self, me: NodeId, other: NodeId, view: &View) -> bool {
        match self {
            Target::Node(n) => *n == other,
            Target::Named(NamedTarget::All) => true,
            Target::Named(NamedTarget::FirstTrustedInX) => view
                .x
                .as_ref()
                .and_then(|x| x.iter().copied().find(|p| view.graph.trusts(me, *p)))
                == Some(other),
        }
    }
}

/// How a value is altered. `flip` XORs 1 into the least significant bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tamper {
    Named(NamedTamper),
    Xor { xor: u64 },
    Set { set: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTamper {
    Flip,
    Random,
}

impl Tamper {
    pub fn flip() -> Self {
        Tamper::Named(NamedTamper::Flip)
    }

    pub fn random() -> Self {
        Tamper::Named(NamedTamper::Random)
    }

    fn apply_bits(&self, b: &mut Bits, rng: &mut ChaCha8Rng) {
        match self {
            Tamper::Named(NamedTamper::Flip) => bits::xor_tail(b, 1),
            Tamper::Named(NamedTamper::Random) => *b = random_bits(b.len(), rng),
            Tamper::Xor { xor } => bits::xor_tail(b, *xor),
            Tamper::Set { set } => bits::set_tail(b, *set),
        }
    }

    fn apply_symbol(&self, s: &Symbol, layout: &SymbolLayout, rng: &mut ChaCha8Rng) -> Symbol {
        let mut b = layout.to_bits(s);
        self.apply_bits(&mut b, rng);
        layout.read(&b)
    }
}

/// Protocol phase, for `silent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Step1,
    Step3,
    Step5,
    Step6,
    Fallback,
    All,
}

impl Step {
    fn covers(&self, other: Step) -> bool {
        *self == Step::All || *self == other
    }

    fn of(kind: InstanceKind) -> Option<Step> {
        match kind {
            InstanceKind::Match => Some(Step::Step3),
            InstanceKind::Notify => Some(Step::Step6),
            InstanceKind::Fallback => Some(Step::Fallback),
            InstanceKind::Probe => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClaim {
    AllTrue,
    AllFalse,
}

/// Relay behavior inside broadcasts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitcastStrategy {
    /// Invert every relayed payload.
    Flip,
    /// Relay all zeros.
    Zero,
    /// Invert relays to odd-numbered recipients only.
    Equivocate,
    /// Relay nothing.
    Silent,
    /// Relay random payloads.
    Random,
}

/// A false statement in the fallback bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "claim", rename_all = "snake_case")]
pub enum Lie {
    Value { tamper: Tamper },
    SentTo { target: Target, tamper: Tamper },
    ReceivedFrom { target: Target, tamper: Tamper },
    HelperSent { target: Target, tamper: Tamper },
    HelperReceived { tamper: Tamper },
    /// Claim a different value and every send consistent with it.
    ConsistentValue { tamper: Tamper },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Act on a value that differs from the input by a constant in every data
    /// symbol; the node is otherwise well behaved, so this alone is not a
    /// deviation.
    ShiftValue,
    CorruptSymbol { target: Target, tamper: Tamper },
    Silent { step: Step },
    /// Send inverted match vectors to even-numbered recipients.
    EquivocateMatchVector,
    ClaimMatchVector { claim: MatchClaim },
    FalseAlarm,
    SuppressAlarm,
    BadHelper {
        target: Target,
        /// Index into the helper's symbol list.
        #[serde(default)]
        position: usize,
        tamper: Tamper,
    },
    LieInFallback { lie: Lie },
    ByzantineBitcast { strategy: BitcastStrategy },
    /// Drop or randomize each outgoing message with probability `rate`.
    Chaos { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires_isolated: Vec<NodeId>,
    #[serde(flatten)]
    pub action: Action,
}

impl Directive {
    pub fn always(action: Action) -> Self {
        Directive {
            generations: None,
            requires_isolated: Vec::new(),
            action,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), String> {
        let check = |t: &Target| match t {
            Target::Node(id) if *id >= n => Err(format!("target {id} out of range")),
            _ => Ok(()),
        };
        match &self.action {
            Action::CorruptSymbol { target, .. } | Action::BadHelper { target, .. } => check(target)?,
            Action::LieInFallback {
                lie:
                    Lie::SentTo { target, .. } | Lie::ReceivedFrom { target, .. } | Lie::HelperSent { target, .. },
            } => check(target)?,
            Action::Chaos { rate } if !(0.0..=1.0).contains(rate) => {
                return Err(format!("chaos rate {rate} outside [0, 1]"))
            }
            _ => {}
        }
        if let Some(id) = self.requires_isolated.iter().find(|id| **id >= n) {
            return Err(format!("requires_isolated lists unknown node {id}"));
        }
        Ok(())
    }

    fn active(&self, generation: usize, graph: &DiagnosisGraph) -> bool {
        self.generations.as_ref().is_none_or(|g| g.contains(&generation))
            && self.requires_isolated.iter().all(|id| graph.is_isolated(*id))
    }
}

/// Public state the hooks may consult.
#[derive(Clone, Debug)]
struct View {
    generation: usize,
    graph: DiagnosisGraph,
    x: Option<Vec<NodeId>>,
    layout: SymbolLayout,
}

/// Runtime for all faulty nodes of a scenario.
pub struct Adversary {
    scripts: BTreeMap<NodeId, Vec<Directive>>,
    rngs: BTreeMap<NodeId, ChaCha8Rng>,
    active: BTreeMap<NodeId, Vec<Action>>,
    view: View,
    deviated: bool,
}

impl Adversary {
    /// `scripts` holds every faulty node, possibly with no directives.
    pub fn new(scripts: BTreeMap<NodeId, Vec<Directive>>, seed: u64, graph: DiagnosisGraph) -> Self {
        let rngs = scripts
            .keys()
            .map(|&node| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(node as u64);
                (node, rng)
            })
            .collect();
        Adversary {
            scripts,
            rngs,
            active: BTreeMap::new(),
            view: View {
                generation: 0,
                graph,
                x: None,
                layout: SymbolLayout::new(1).expect("1-bit layout"),
            },
            deviated: false,
        }
    }

    pub fn is_faulty(&self, node: NodeId) -> bool {
        self.scripts.contains_key(&node)
    }

    pub fn faulty(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.scripts.keys().copied()
    }

    /// Select the directives active this generation and reset the deviation flag.
    pub fn begin_generation(&mut self, generation: usize, graph: &DiagnosisGraph, layout: SymbolLayout) {
        self.view = View {
            generation,
            graph: graph.clone(),
            x: None,
            layout,
        };
        self.active = self
            .scripts
            .iter()
            .map(|(node, ds)| {
                let acts = ds
                    .iter()
                    .filter(|d| d.active(generation, graph))
                    .map(|d| d.action.clone())
                    .collect();
                (*node, acts)
            })
            .collect();
        self.deviated = false;
    }

    pub fn set_consistent_set(&mut self, x: Option<Vec<NodeId>>) {
        self.view.x = x;
    }

    pub fn generation(&self) -> usize {
        self.view.generation
    }

    /// Whether any faulty node sent something other than what the protocol
    /// prescribes, in steps 1 through 5, this generation.
    pub fn deviated(&self) -> bool {
        self.deviated
    }

    fn actions(&self, node: NodeId) -> Vec<Action> {
        self.active.get(&node).cloned().unwrap_or_default()
    }

    fn rng(&mut self, node: NodeId) -> &mut ChaCha8Rng {
        self.rngs.get_mut(&node).expect("faulty node has an rng")
    }

    /// Apply `shift_value` to a faulty node's data symbols.
    pub fn shift_data(&mut self, node: NodeId, data: &mut [Symbol]) {
        if !self.actions(node).contains(&Action::ShiftValue) {
            return;
        }
        let top = self.view.layout.lanes()[0];
        for s in data {
            s.lanes_mut()[0] ^= 1 << (top - 1);
        }
    }

    pub fn step1(&mut self, node: NodeId, to: NodeId, honest: &Symbol) -> Option<Symbol> {
        let layout = self.view.layout.clone();
        let mut msg = Some(honest.clone());
        for act in self.actions(node) {
            match act {
                Action::CorruptSymbol { target, tamper } if target.matches(node, to, &self.view) => {
                    let view_layout = layout.clone();
                    msg = msg.map(|s| tamper.apply_symbol(&s, &view_layout, self.rng(node)));
                }
                Action::Silent { step } if step.covers(Step::Step1) => msg = None,
                Action::Chaos { rate } => {
                    msg = self.chaos(node, rate, msg, |rng| random_symbol(&layout, rng));
                }
                _ => {}
            }
        }
        if msg.as_ref() != Some(honest) {
            self.deviated = true;
        }
        msg
    }

    pub fn helper(&mut self, node: NodeId, y: NodeId, honest: &[Symbol]) -> Option<Vec<Symbol>> {
        let layout = self.view.layout.clone();
        let mut msg = Some(honest.to_vec());
        for act in self.actions(node) {
            match act {
                Action::BadHelper {
                    target,
                    position,
                    tamper,
                } if target.matches(node, y, &self.view) => {
                    if let Some(list) = msg.as_mut() {
                        if let Some(s) = list.get(position).cloned() {
                            list[position] = tamper.apply_symbol(&s, &layout, self.rng(node));
                        }
                    }
                }
                Action::Silent { step } if step.covers(Step::Step5) => msg = None,
                Action::Chaos { rate } => {
                    let len = honest.len();
                    msg = self.chaos(node, rate, msg, |rng| (0..len).map(|_| random_symbol(&layout, rng)).collect());
                }
                _ => {}
            }
        }
        if msg.as_deref() != Some(honest) {
            self.deviated = true;
        }
        msg
    }

    /// Rewrite a faulty node's fallback claims before they are broadcast.
    pub fn fallback_claims(&mut self, node: NodeId, claims: &mut Claims, roster: &Roster, code: &CodeSpec, x: &[NodeId]) {
        let layout = code.layout().clone();
        for act in self.actions(node) {
            let Action::LieInFallback { lie } = act else { continue };
            match lie {
                Lie::Value { tamper } => {
                    let mut v = claims.value.clone();
                    tamper.apply_bits(&mut v, self.rng(node));
                    claims.value = v;
                }
                Lie::SentTo { target, tamper } | Lie::ReceivedFrom { target, tamper } => {
                    let sent = matches!(lie, Lie::SentTo { .. });
                    let keys: Vec<NodeId> = roster
                        .others(node)
                        .filter(|q| target.matches(node, *q, &self.view))
                        .collect();
                    for q in keys {
                        let map = if sent { &mut claims.sent } else { &mut claims.received };
                        let cur = map.get(&q).cloned().flatten().unwrap_or_else(|| layout.zero());
                        let new = tamper.apply_symbol(&cur, &layout, self.rngs.get_mut(&node).expect("rng"));
                        let map = if sent { &mut claims.sent } else { &mut claims.received };
                        map.insert(q, Some(new));
                    }
                }
                Lie::HelperSent { target, tamper } => {
                    let keys: Vec<NodeId> = claims
                        .helper_sent
                        .keys()
                        .copied()
                        .filter(|y| target.matches(node, *y, &self.view))
                        .collect();
                    for y in keys {
                        if let Some(Some(list)) = claims.helper_sent.get(&y).cloned() {
                            if let Some(first) = list.first() {
                                let mut list = list.clone();
                                list[0] = tamper.apply_symbol(first, &layout, self.rng(node));
                                claims.helper_sent.insert(y, Some(list));
                            }
                        }
                    }
                }
                Lie::HelperReceived { tamper } => {
                    if let Some(list) = claims.helper_received.as_mut() {
                        if let Some(first) = list.first().cloned() {
                            let rng = self.rngs.get_mut(&node).expect("rng");
                            list[0] = tamper.apply_symbol(&first, &layout, rng);
                        }
                    }
                }
                Lie::ConsistentValue { tamper } => {
                    let mut v = claims.value.clone();
                    tamper.apply_bits(&mut v, self.rng(node));
                    let Ok((_, cw)) = step1_codeword(code, &v) else { continue };
                    let own = cw.at(roster.pos(node).expect("participant")).clone();
                    for s in claims.sent.values_mut().flatten() {
                        *s = own.clone();
                    }
                    let xbar = complement(roster, x);
                    for h in claims.helper_sent.values_mut().flatten() {
                        *h = symbols_at(roster, &cw, &xbar);
                    }
                    claims.value = v;
                }
            }
        }
    }

    fn chaos<T>(
        &mut self,
        node: NodeId,
        rate: f64,
        msg: Option<T>,
        random: impl FnOnce(&mut ChaCha8Rng) -> T,
    ) -> Option<T> {
        let rng = self.rng(node);
        if !rng.gen_bool(rate) {
            return msg;
        }
        if rng.gen_bool(0.5) {
            None
        } else {
            Some(random(rng))
        }
    }
}

impl Faults for Adversary {
    fn controls(&self, node: NodeId) -> bool {
        self.is_faulty(node)
    }

    fn transmit(&mut self, env: &Envelope<'_>, honest: &Bits) -> Option<Bits> {
        let node = env.sender;
        let step = Step::of(env.instance.kind);
        let source_send = env.round == 1;
        let mut msg = Some(honest.clone());
        for act in self.actions(node) {
            match act {
                Action::EquivocateMatchVector
                    if source_send && env.instance.kind == InstanceKind::Match && env.to.is_multiple_of(2) =>
                {
                    msg = msg.map(|m| !m);
                }
                Action::ClaimMatchVector { claim } if source_send && env.instance.kind == InstanceKind::Match => {
                    let mut v = bits::zeros(honest.len());
                    v.fill(claim == MatchClaim::AllTrue);
                    msg = Some(v);
                }
                Action::FalseAlarm if source_send && env.instance.kind == InstanceKind::Notify => {
                    msg = Some(bits::from_u64(1, honest.len()));
                }
                Action::SuppressAlarm if source_send && env.instance.kind == InstanceKind::Notify => {
                    msg = Some(bits::zeros(honest.len()));
                }
                Action::ByzantineBitcast { strategy } if !source_send => {
                    msg = match strategy {
                        BitcastStrategy::Flip => msg.map(|m| !m),
                        BitcastStrategy::Zero => Some(bits::zeros(honest.len())),
                        BitcastStrategy::Equivocate if env.to % 2 == 1 => msg.map(|m| !m),
                        BitcastStrategy::Equivocate => msg,
                        BitcastStrategy::Silent => None,
                        BitcastStrategy::Random => Some(random_bits(honest.len(), self.rng(node))),
                    };
                }
                Action::Silent { step: s } if step.is_some_and(|k| s.covers(k)) => msg = None,
                Action::Chaos { rate } => {
                    let len = honest.len();
                    msg = self.chaos(node, rate, msg, |rng| random_bits(len, rng));
                }
                _ => {}
            }
        }
        if env.instance.kind == InstanceKind::Match && msg.as_ref() != Some(honest) {
            self.deviated = true;
        }
        msg
    }
}

fn random_bits(len: usize, rng: &mut ChaCha8Rng) -> Bits {
    let mut bytes = vec![0u8; len.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let mut b = Bits::from_vec(bytes);
    b.truncate(len);
    b
}

fn random_symbol(layout: &SymbolLayout, rng: &mut ChaCha8Rng) -> Symbol {
    layout.read(&random_bits(layout.bits(), rng))
}
