//! Single-source Byzantine broadcast by exponential information gathering.
//!
//! For `n > 3t` participants and `t + 1` synchronous rounds:
//!
//! * round 1: the source sends its payload to every other participant, which
//!   stores it at the root label `[s]`;
//! * round `r > 1`: for every label `σ` of length `r - 1`, each participant
//!   `p ∉ σ` relays its stored value for `σ` to every other participant, which
//!   stores it at `σ·p` (`p` stores its own value at `σ·p` locally);
//! * afterwards each participant reduces its tree bottom-up by strict
//!   majority of the children, ties and omissions resolving to the all-zero
//!   payload. The root's reduced value is the output.
//!
//! Payloads are opaque fixed-length bit strings compared as a whole. Labels
//! are implicit in the round schedule, so only payload bits are charged.
//! Any number of instances share the same rounds.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{self, Bits};
use crate::diagnosis::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitcastError {
    #[error("need n > 3t, got n = {n}, t = {t}")]
    Resilience { n: usize, t: usize },
    #[error("participant list is not strictly ascending")]
    Participants,
    #[error("source {0} is not a participant")]
    UnknownSource(NodeId),
    #[error("instance {instance}: source value has {got} bits, expected {expected}")]
    PayloadLength {
        instance: usize,
        expected: usize,
        got: usize,
    },
    #[error("{instances} instances but {values} source values")]
    ValueCount { instances: usize, values: usize },
}

/// What an instance carries; used to route adversary hooks and in logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// A node's match vector.
    Match,
    /// A single detection bit.
    Notify,
    /// A fallback claims bundle.
    Fallback,
    /// Anything else (tests, cost probes).
    Probe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceLabel {
    pub kind: InstanceKind,
    pub source: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub label: InstanceLabel,
    pub payload_bits: usize,
}

impl Instance {
    pub fn new(kind: InstanceKind, source: NodeId, payload_bits: usize) -> Self {
        Instance {
            label: InstanceLabel { kind, source },
            payload_bits,
        }
    }
}

/// One transmission slot as seen by an adversary hook.
#[derive(Clone, Copy, Debug)]
pub struct Envelope<'a> {
    pub instance: InstanceLabel,
    /// 1-based round within the broadcast.
    pub round: usize,
    /// The label whose value is being sent; `[source]` in round 1.
    pub path: &'a [NodeId],
    pub sender: NodeId,
    pub to: NodeId,
}

/// Log form of an [`Envelope`] plus the payload actually sent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub instance: InstanceLabel,
    pub round: usize,
    pub sender: NodeId,
    pub to: NodeId,
    pub path: Vec<NodeId>,
    pub payload: String,
}

/// Source of Byzantine behavior. Messages of nodes for which `controls` is
/// false are never passed through `transmit`.
pub trait Faults {
    fn controls(&self, node: NodeId) -> bool;

    /// The payload a faulty sender puts in a slot, or `None` to stay silent.
    /// A payload of the wrong length is delivered as the all-zero default.
    fn transmit(&mut self, env: &Envelope<'_>, honest: &Bits) -> Option<Bits>;
}

/// Every node follows the protocol.
pub struct NoFaults;

impl Faults for NoFaults {
    fn controls(&self, _node: NodeId) -> bool {
        false
    }

    fn transmit(&mut self, _env: &Envelope<'_>, honest: &Bits) -> Option<Bits> {
        Some(honest.clone())
    }
}

/// Label structure of one instance; identical at every participant.
#[derive(Debug)]
pub struct TreeShape {
    source: NodeId,
    depth: usize,
    labels: Vec<Vec<NodeId>>,
    /// children[i] = indices of labels extending labels[i] by one id.
    children: Vec<Vec<usize>>,
    /// labels of each length, as index ranges into `labels`.
    levels: Vec<std::ops::Range<usize>>,
    /// child index of label i extended by participant j (by participant rank).
    child_by_rank: Vec<Vec<Option<usize>>>,
}

impl TreeShape {
    pub fn new(participants: &[NodeId], source: NodeId, t: usize) -> Self {
        let depth = t + 1;
        let mut labels = vec![vec![source]];
        let mut children = vec![Vec::new()];
        let mut child_by_rank = vec![vec![None; participants.len()]];
        let mut levels = Vec::new();
        levels.push(0..1);
        for _ in 1..depth {
            let prev = levels.last().expect("root level").clone();
            let start = labels.len();
            for parent in prev {
                for (rank, p) in participants.iter().enumerate() {
                    if labels[parent].contains(p) {
                        continue;
                    }
                    let mut l = labels[parent].clone();
                    l.push(*p);
                    let idx = labels.len();
                    labels.push(l);
                    children.push(Vec::new());
                    child_by_rank.push(vec![None; participants.len()]);
                    children[parent].push(idx);
                    child_by_rank[parent][rank] = Some(idx);
                }
            }
            levels.push(start..labels.len());
        }
        TreeShape {
            source,
            depth,
            labels,
            children,
            levels,
            child_by_rank,
        }
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    /// `t + 1`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, index: usize) -> &[NodeId] {
        &self.labels[index]
    }

    pub fn children(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    /// Index of a label, if it belongs to the tree.
    pub fn index_of(&self, label: &[NodeId]) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One participant's gathered values for one instance.
#[derive(Clone, Debug)]
pub struct EigTree {
    shape: Arc<TreeShape>,
    payload_bits: usize,
    values: Vec<Bits>,
}

impl EigTree {
    /// A tree with every value defaulted to zeros.
    pub fn new(shape: Arc<TreeShape>, payload_bits: usize) -> Self {
        let values = vec![bits::zeros(payload_bits); shape.label_count()];
        EigTree {
            shape,
            payload_bits,
            values,
        }
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn value(&self, index: usize) -> &Bits {
        &self.values[index]
    }

    /// Store a received value; anything of the wrong length becomes the default.
    pub fn set(&mut self, index: usize, value: Bits) {
        self.values[index] = if value.len() == self.payload_bits {
            value
        } else {
            bits::zeros(self.payload_bits)
        };
    }

    /// Bottom-up strict-majority reduction; returns the root's value.
    pub fn resolve(&self) -> Bits {
        let mut reduced = self.values.clone();
        for level in self.shape.levels.iter().rev().skip(1) {
            for idx in level.clone() {
                let kids = &self.shape.children[idx];
                reduced[idx] = strict_majority(kids.iter().map(|c| &reduced[*c]), kids.len())
                    .cloned()
                    .unwrap_or_else(|| bits::zeros(self.payload_bits));
            }
        }
        reduced.swap_remove(0)
    }
}

fn strict_majority<'a>(values: impl Iterator<Item = &'a Bits>, total: usize) -> Option<&'a Bits> {
    let mut counts: BTreeMap<&Bits, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .find(|(_, c)| 2 * c > total)
        .map(|(v, _)| v)
}

/// Result of running a batch of instances to completion.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    /// outputs[node][instance]
    pub outputs: BTreeMap<NodeId, Vec<Bits>>,
    /// Payload bits transmitted, summed over every message sent.
    pub bits: u64,
    pub messages: u64,
    /// Rounds consumed (`t + 1`).
    pub rounds: usize,
}

impl BatchOutcome {
    pub fn output(&self, node: NodeId, instance: usize) -> &Bits {
        &self.outputs[&node][instance]
    }
}

/// Run several broadcast instances in parallel rounds.
///
/// `values[i]` is what the source of `instances[i]` would send if it follows
/// the protocol. `trace`, when given, receives every message sent.
pub fn run_many(
    participants: &[NodeId],
    t: usize,
    instances: &[Instance],
    values: &[Bits],
    faults: &mut dyn Faults,
    mut trace: Option<&mut Vec<EnvelopeRecord>>,
) -> Result<BatchOutcome, BitcastError> {
    let n = participants.len();
    if n <= 3 * t {
        return Err(BitcastError::Resilience { n, t });
    }
    if participants.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BitcastError::Participants);
    }
    if instances.len() != values.len() {
        return Err(BitcastError::ValueCount {
            instances: instances.len(),
            values: values.len(),
        });
    }
    for (i, (inst, v)) in instances.iter().zip(values).enumerate() {
        if !participants.contains(&inst.label.source) {
            return Err(BitcastError::UnknownSource(inst.label.source));
        }
        if v.len() != inst.payload_bits {
            return Err(BitcastError::PayloadLength {
                instance: i,
                expected: inst.payload_bits,
                got: v.len(),
            });
        }
    }

    let mut shapes: BTreeMap<NodeId, Arc<TreeShape>> = BTreeMap::new();
    // trees[instance][rank]
    let mut trees: Vec<Vec<EigTree>> = instances
        .iter()
        .map(|inst| {
            let shape = shapes
                .entry(inst.label.source)
                .or_insert_with(|| Arc::new(TreeShape::new(participants, inst.label.source, t)))
                .clone();
            vec![EigTree::new(shape, inst.payload_bits); n]
        })
        .collect();

    let mut sent_bits = 0u64;
    let mut messages = 0u64;
    let mut send = |env: Envelope<'_>,
                    honest: &Bits,
                    faults: &mut dyn Faults,
                    trace: &mut Option<&mut Vec<EnvelopeRecord>>|
     -> Option<Bits> {
        let out = if faults.controls(env.sender) {
            faults.transmit(&env, honest)
        } else {
            Some(honest.clone())
        };
        if let Some(p) = &out {
            sent_bits += p.len() as u64;
            messages += 1;
            if let Some(log) = trace.as_deref_mut() {
                log.push(EnvelopeRecord {
                    instance: env.instance,
                    round: env.round,
                    sender: env.sender,
                    to: env.to,
                    path: env.path.to_vec(),
                    payload: bits::to_hex(p),
                });
            }
        }
        out
    };

    // round 1
    for (i, inst) in instances.iter().enumerate() {
        let src = inst.label.source;
        let src_rank = rank(participants, src);
        trees[i][src_rank].set(0, values[i].clone());
        let path = [src];
        for (q_rank, &q) in participants.iter().enumerate() {
            if q == src {
                continue;
            }
            let env = Envelope {
                instance: inst.label,
                round: 1,
                path: &path,
                sender: src,
                to: q,
            };
            let msg = send(env, &values[i], faults, &mut trace);
            trees[i][q_rank].set(0, msg.unwrap_or_else(|| bits::zeros(inst.payload_bits)));
        }
    }

    // rounds 2..=t+1; all sends of a round use values stored before the round
    for round in 2..=t + 1 {
        for (i, inst) in instances.iter().enumerate() {
            let shape = trees[i][0].shape.clone();
            let level = shape.levels[round - 2].clone();
            let mut deliveries: Vec<(usize, usize, Bits)> = Vec::new();
            for idx in level {
                let label = shape.label(idx);
                for (p_rank, &p) in participants.iter().enumerate() {
                    let Some(child) = shape.child_by_rank[idx][p_rank] else {
                        continue;
                    };
                    let honest = trees[i][p_rank].value(idx).clone();
                    deliveries.push((p_rank, child, honest.clone()));
                    for (q_rank, &q) in participants.iter().enumerate() {
                        if q == p {
                            continue;
                        }
                        let env = Envelope {
                            instance: inst.label,
                            round,
                            path: label,
                            sender: p,
                            to: q,
                        };
                        let msg = send(env, &honest, faults, &mut trace);
                        deliveries.push((
                            q_rank,
                            child,
                            msg.unwrap_or_else(|| bits::zeros(inst.payload_bits)),
                        ));
                    }
                }
            }
            for (q_rank, child, v) in deliveries {
                trees[i][q_rank].set(child, v);
            }
        }
    }

    let outputs = participants
        .iter()
        .enumerate()
        .map(|(rank, &p)| (p, trees.iter().map(|per| per[rank].resolve()).collect()))
        .collect();
    Ok(BatchOutcome {
        outputs,
        bits: sent_bits,
        messages,
        rounds: t + 1,
    })
}

/// Run a single instance; returns every participant's output.
pub fn bcast_run(
    participants: &[NodeId],
    t: usize,
    instance: &Instance,
    source_value: &Bits,
    faults: &mut dyn Faults,
) -> Result<(BTreeMap<NodeId, Bits>, u64), BitcastError> {
    let out = run_many(
        participants,
        t,
        std::slice::from_ref(instance),
        std::slice::from_ref(source_value),
        faults,
        None,
    )?;
    let per_node = out
        .outputs
        .into_iter()
        .map(|(p, mut v)| (p, v.swap_remove(0)))
        .collect();
    Ok((per_node, out.bits))
}

/// Bits needed to broadcast a single bit among `n` fault-free participants
/// tolerating `t` faults, measured by running the protocol once.
pub fn unit_cost(n: usize, t: usize) -> Result<u64, BitcastError> {
    let participants: Vec<NodeId> = (0..n).collect();
    let inst = Instance::new(InstanceKind::Probe, 0, 1);
    let (_, bits) = bcast_run(&participants, t, &inst, &bits::from_u64(1, 1), &mut NoFaults)?;
    Ok(bits)
}

fn rank(participants: &[NodeId], node: NodeId) -> usize {
    participants
        .binary_search(&node)
        .expect("validated participant")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays a fixed table of choices for one faulty node: slot `i` in
    /// send order gets `choices[i]` (0 -> bit 0, 1 -> bit 1, 2 -> silent).
    struct Table {
        node: NodeId,
        choices: Vec<u8>,
        next: usize,
    }

    impl Faults for Table {
        fn controls(&self, node: NodeId) -> bool {
            node == self.node
        }
        fn transmit(&mut self, _env: &Envelope<'_>, _honest: &Bits) -> Option<Bits> {
            let c = self.choices.get(self.next).copied().unwrap_or(2);
            self.next += 1;
            match c {
                0 => Some(bits::from_u64(0, 1)),
                1 => Some(bits::from_u64(1, 1)),
                _ => None,
            }
        }
    }

    fn all_tables(slots: usize) -> impl Iterator<Item = Vec<u8>> {
        (0..3usize.pow(slots as u32)).map(move |mut idx| {
            (0..slots)
                .map(|_| {
                    let c = (idx % 3) as u8;
                    idx /= 3;
                    c
                })
                .collect()
        })
    }

    fn honest_outputs(out: &BTreeMap<NodeId, Bits>, faulty: NodeId) -> Vec<Bits> {
        out.iter().filter(|(p, _)| **p != faulty).map(|(_, v)| v.clone()).collect()
    }

    #[test]
    fn no_faults_everyone_outputs_source_value() {
        for (n, t) in [(1, 0), (4, 1), (5, 1), (7, 2)] {
            let parts: Vec<NodeId> = (0..n).collect();
            let v = bits::from_u64(0b1011, 4);
            let inst = Instance::new(InstanceKind::Probe, n - 1, 4);
            let (out, _) = bcast_run(&parts, t, &inst, &v, &mut NoFaults).unwrap();
            assert!(out.values().all(|o| *o == v));
        }
    }

    #[test]
    fn exhaustive_faulty_receiver_n4() {
        // source 0 fault-free; a faulty receiver only sends in round 2:
        // one relay of [0] to each of 3 peers -> 3^3 behaviours
        let parts = [0, 1, 2, 3];
        for faulty in 1..4 {
            for value in 0..2u64 {
                for table in all_tables(3) {
                    let mut f = Table { node: faulty, choices: table, next: 0 };
                    let inst = Instance::new(InstanceKind::Probe, 0, 1);
                    let v = bits::from_u64(value, 1);
                    let (out, _) = bcast_run(&parts, 1, &inst, &v, &mut f).unwrap();
                    assert_eq!(f.next, 3);
                    for o in honest_outputs(&out, faulty) {
                        assert_eq!(o, v);
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_faulty_source_n4() {
        // the source sends once to each of 3 peers in round 1 and never relays
        let parts = [0, 1, 2, 3];
        for src in 0..4 {
            for table in all_tables(3) {
                let mut f = Table { node: src, choices: table, next: 0 };
                let inst = Instance::new(InstanceKind::Probe, src, 1);
                let (out, _) = bcast_run(&parts, 1, &inst, &bits::from_u64(1, 1), &mut f).unwrap();
                assert_eq!(f.next, 3);
                let outs = honest_outputs(&out, src);
                assert!(outs.windows(2).all(|w| w[0] == w[1]));
            }
        }
    }

    #[test]
    fn equivocating_source_half_and_half() {
        struct Split;
        impl Faults for Split {
            fn controls(&self, node: NodeId) -> bool {
                node == 0
            }
            fn transmit(&mut self, env: &Envelope<'_>, _h: &Bits) -> Option<Bits> {
                Some(bits::from_u64((env.to % 2) as u64, 1))
            }
        }
        let parts = [0, 1, 2, 3];
        let inst = Instance::new(InstanceKind::Probe, 0, 1);
        let (out, _) = bcast_run(&parts, 1, &inst, &bits::from_u64(1, 1), &mut Split).unwrap();
        let outs = honest_outputs(&out, 0);
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn unit_cost_counts_every_relay() {
        // (n - 1) * sum_{r=1}^{t+1} (n-1)!/(n-r)!
        assert_eq!(unit_cost(4, 1).unwrap(), 3 * (1 + 3));
        assert_eq!(unit_cost(7, 2).unwrap(), 6 * (1 + 6 + 30));
        assert_eq!(unit_cost(5, 1).unwrap(), 4 * (1 + 4));
        assert_eq!(unit_cost(3, 0).unwrap(), 2);
        assert!(unit_cost(3, 1).is_err());
    }

    #[test]
    fn payload_cost_scales_with_length() {
        let parts = [0, 1, 2, 3];
        let inst = Instance::new(InstanceKind::Probe, 2, 5);
        let (_, bits) = bcast_run(&parts, 1, &inst, &bits::zeros(5), &mut NoFaults).unwrap();
        assert_eq!(bits, 5 * unit_cost(4, 1).unwrap());
    }

    #[test]
    fn resolve_depth_one_is_root() {
        let shape = Arc::new(TreeShape::new(&[0, 1, 2], 1, 0));
        let mut tree = EigTree::new(shape, 3);
        tree.set(0, bits::from_u64(5, 3));
        assert_eq!(tree.resolve(), bits::from_u64(5, 3));
    }

    #[test]
    fn resolve_unanimous_and_ties() {
        let shape = Arc::new(TreeShape::new(&[0, 1, 2, 3], 0, 1));
        assert_eq!(shape.label_count(), 4);
        let v = bits::from_u64(1, 1);
        let mut tree = EigTree::new(shape.clone(), 1);
        for i in 0..4 {
            tree.set(i, v.clone());
        }
        assert_eq!(tree.resolve(), v);
        // 7 participants: children of the root split 3/3 -> tie -> zero
        let shape7 = Arc::new(TreeShape::new(&[0, 1, 2, 3, 4, 5, 6], 0, 1));
        let mut tree = EigTree::new(shape7, 1);
        for (k, idx) in (1..7).enumerate() {
            tree.set(idx, bits::from_u64((k % 2) as u64, 1));
        }
        assert_eq!(tree.resolve(), bits::zeros(1));
        // wrong-length values are read as the default
        let mut tree = EigTree::new(shape, 1);
        tree.set(1, bits::zeros(4));
        assert_eq!(tree.value(1), &bits::zeros(1));
    }

    #[test]
    fn resolve_ignores_any_single_corrupted_branch() {
        // n = 4, t = 1, source 0: leaves [0,1], [0,2], [0,3]; corrupting any one
        // leaf leaves a 2-of-3 majority for the true value
        let shape = Arc::new(TreeShape::new(&[0, 1, 2, 3], 0, 1));
        for value in 0..2u64 {
            for bad in 1..4 {
                let mut tree = EigTree::new(shape.clone(), 1);
                for leaf in 1..4 {
                    let v = if leaf == bad { 1 - value } else { value };
                    tree.set(leaf, bits::from_u64(v, 1));
                }
                assert_eq!(tree.resolve(), bits::from_u64(value, 1));
            }
        }
    }

    #[test]
    fn labels_never_repeat_ids() {
        let shape = TreeShape::new(&[0, 1, 2, 3, 4, 5, 6], 3, 2);
        assert_eq!(shape.label_count(), 1 + 6 + 30);
        for i in 0..shape.label_count() {
            let l = shape.label(i);
            assert!(l.len() <= shape.depth());
            let mut s = l.to_vec();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), l.len());
            assert_eq!(l[0], 3);
        }
        assert_eq!(shape.index_of(&[3, 0]), Some(1));
    }

    #[test]
    fn config_errors() {
        let v = bits::zeros(1);
        let inst = Instance::new(InstanceKind::Probe, 9, 1);
        assert_eq!(
            bcast_run(&[0, 1, 2, 3], 1, &inst, &v, &mut NoFaults).unwrap_err(),
            BitcastError::UnknownSource(9)
        );
        let inst = Instance::new(InstanceKind::Probe, 0, 2);
        assert!(matches!(
            bcast_run(&[0, 1, 2, 3], 1, &inst, &v, &mut NoFaults),
            Err(BitcastError::PayloadLength { .. })
        ));
        assert_eq!(
            bcast_run(&[1, 0, 2, 3], 1, &Instance::new(InstanceKind::Probe, 0, 1), &v, &mut NoFaults).unwrap_err(),
            BitcastError::Participants
        );
    }

    #[test]
    fn trace_records_every_message() {
        let mut trace = Vec::new();
        let parts = [0, 1, 2, 3];
        let out = run_many(
            &parts,
            1,
            &[Instance::new(InstanceKind::Match, 1, 2)],
            &[bits::from_u64(2, 2)],
            &mut NoFaults,
            Some(&mut trace),
        )
        .unwrap();
        assert_eq!(trace.len() as u64, out.messages);
        assert_eq!(trace[0].round, 1);
        assert_eq!(trace[0].path, vec![1]);
        assert_eq!(trace.last().unwrap().round, 2);
    }
}
