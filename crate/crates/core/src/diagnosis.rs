//! Trust and accusation bookkeeping shared by all fault-free nodes.
//!
//! A dispute between two nodes removes trust both ways and makes each accuse
//! the other; at least one of the pair must be faulty. A node accused by
//! `t' + 1` or more non-isolated nodes is isolated, where `t'` is the fault
//! bound of the current reduced network. Every isolation lowers both `n'` and
//! `t'` by one.
//!
//! Updates are pure functions of broadcast-agreed data, so copies held by
//! fault-free nodes stay identical without extra synchronization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagnosisError {
    #[error("node {0} is isolated")]
    Isolated(NodeId),
    #[error("node {0} disputes itself")]
    SelfDispute(NodeId),
    #[error("node {node} out of range for {n} nodes")]
    UnknownNode { node: NodeId, n: usize },
    #[error("{isolated} isolations exceed the fault bound {t}")]
    TooManyIsolations { isolated: usize, t: usize },
    #[error("need n > 3t, got n = {n}, t = {t}")]
    Resilience { n: usize, t: usize },
}

/// Changes produced by one update.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisDelta {
    /// Newly disputed pairs, smaller id first.
    pub disputes: Vec<(NodeId, NodeId)>,
    /// Targets of unanimous accusation.
    pub accused_by_all: Vec<NodeId>,
    /// Nodes isolated by this update, in isolation order.
    pub isolated: Vec<NodeId>,
}

impl DiagnosisDelta {
    pub fn is_empty(&self) -> bool {
        self.disputes.is_empty() && self.accused_by_all.is_empty() && self.isolated.is_empty()
    }

    pub fn merge(&mut self, other: DiagnosisDelta) {
        self.disputes.extend(other.disputes);
        self.accused_by_all.extend(other.accused_by_all);
        self.isolated.extend(other.isolated);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisGraph {
    n: usize,
    t: usize,
    /// target -> accusers
    accusations: BTreeMap<NodeId, BTreeSet<NodeId>>,
    isolated: BTreeSet<NodeId>,
}

impl DiagnosisGraph {
    pub fn new(n: usize, t: usize) -> Result<Self, DiagnosisError> {
        if n <= 3 * t {
            return Err(DiagnosisError::Resilience { n, t });
        }
        Ok(DiagnosisGraph {
            n,
            t,
            accusations: BTreeMap::new(),
            isolated: BTreeSet::new(),
        })
    }

    /// Original network size.
    pub fn n0(&self) -> usize {
        self.n
    }

    /// Original fault bound.
    pub fn t0(&self) -> usize {
        self.t
    }

    fn check_node(&self, node: NodeId) -> Result<(), DiagnosisError> {
        if node >= self.n {
            return Err(DiagnosisError::UnknownNode { node, n: self.n });
        }
        Ok(())
    }

    pub fn is_isolated(&self, node: NodeId) -> bool {
        self.isolated.contains(&node)
    }

    pub fn isolated(&self) -> &BTreeSet<NodeId> {
        &self.isolated
    }

    /// Non-isolated nodes in ascending order.
    pub fn participants(&self) -> Vec<NodeId> {
        (0..self.n).filter(|i| !self.is_isolated(*i)).collect()
    }

    pub fn accuses(&self, accuser: NodeId, target: NodeId) -> bool {
        self.accusations
            .get(&target)
            .is_some_and(|s| s.contains(&accuser))
    }

    /// Accusers of `target` that are still in the network.
    pub fn accusers(&self, target: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.accusations
            .get(&target)
            .into_iter()
            .flatten()
            .copied()
            .filter(|a| !self.is_isolated(*a))
    }

    /// Every recorded accusation (accuser, target), including those made by
    /// nodes isolated since.
    pub fn accusation_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.accusations
            .iter()
            .flat_map(|(target, accusers)| accusers.iter().map(move |a| (*a, *target)))
            .collect()
    }

    /// Total accusations ever recorded against `target`.
    pub fn accusation_count(&self, target: NodeId) -> usize {
        self.accusations.get(&target).map_or(0, BTreeSet::len)
    }

    /// Reflexive-false, symmetric, and false whenever either side is isolated.
    pub fn trusts(&self, i: NodeId, j: NodeId) -> bool {
        i != j
            && i < self.n
            && j < self.n
            && !self.is_isolated(i)
            && !self.is_isolated(j)
            && !self.accuses(i, j)
            && !self.accuses(j, i)
    }

    /// `(n', t')` of the reduced network.
    pub fn reduced_params(&self) -> Result<(usize, usize), DiagnosisError> {
        let isolated = self.isolated.len();
        if isolated > self.t {
            return Err(DiagnosisError::TooManyIsolations {
                isolated,
                t: self.t,
            });
        }
        Ok((self.n - isolated, self.t - isolated))
    }

    fn current_t(&self) -> usize {
        self.t.saturating_sub(self.isolated.len())
    }

    /// Record a dispute between `i` and `j`. Repeating a dispute changes nothing.
    pub fn apply_dispute(&mut self, i: NodeId, j: NodeId) -> Result<DiagnosisDelta, DiagnosisError> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(DiagnosisError::SelfDispute(i));
        }
        for node in [i, j] {
            if self.is_isolated(node) {
                return Err(DiagnosisError::Isolated(node));
            }
        }
        let mut delta = DiagnosisDelta::default();
        let fresh_ij = self.accusations.entry(j).or_default().insert(i);
        let fresh_ji = self.accusations.entry(i).or_default().insert(j);
        if fresh_ij || fresh_ji {
            delta.disputes.push((i.min(j), i.max(j)));
        }
        delta.isolated = self.isolate_over_threshold();
        Ok(delta)
    }

    /// Every other non-isolated node accuses `target`, which isolates it.
    pub fn accuse_all(&mut self, target: NodeId) -> Result<DiagnosisDelta, DiagnosisError> {
        self.check_node(target)?;
        if self.is_isolated(target) {
            return Err(DiagnosisError::Isolated(target));
        }
        let others: Vec<NodeId> = self
            .participants()
            .into_iter()
            .filter(|p| *p != target)
            .collect();
        self.accusations.entry(target).or_default().extend(others);
        let mut delta = DiagnosisDelta {
            accused_by_all: vec![target],
            ..Default::default()
        };
        delta.isolated = self.isolate_over_threshold();
        Ok(delta)
    }

    /// Isolate, lowest id first, until no remaining node has `t' + 1` accusers.
    fn isolate_over_threshold(&mut self) -> Vec<NodeId> {
        let mut out = Vec::new();
        loop {
            let threshold = self.current_t() + 1;
            let next = self
                .participants()
                .into_iter()
                .find(|p| self.accusers(*p).count() >= threshold);
            match next {
                Some(node) => {
                    self.isolated.insert(node);
                    out.push(node);
                }
                None => return out,
            }
        }
    }
}
