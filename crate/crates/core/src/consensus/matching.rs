//! Agreed match vectors, the consistent set X and helper selection.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::Roster;
use crate::bits::{self, Bits, BitsRef};
use crate::diagnosis::{DiagnosisGraph, NodeId};

/// Square boolean matrix over the roster; `get(i, j)` is `M_ij`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchMatrix {
    roster: Roster,
    rows: Vec<Vec<bool>>,
}

impl MatchMatrix {
    /// Every off-diagonal entry `FALSE`.
    pub fn empty(roster: Roster) -> Self {
        let n = roster.len();
        let rows = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
        MatchMatrix { roster, rows }
    }

    /// Build from one `n - 1`-bit vector per participant in roster order.
    /// Bit `q` of a vector refers to the `q`-th other participant.
    pub fn from_vectors(roster: Roster, vectors: &[Bits]) -> Self {
        let mut m = Self::empty(roster);
        let n = m.roster.len();
        for (i, v) in vectors.iter().enumerate().take(n) {
            let mut bit = 0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                m.rows[i][j] = v.get(bit).map(|b| *b).unwrap_or(false);
                bit += 1;
            }
        }
        m
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> bool {
        match (self.roster.pos(i), self.roster.pos(j)) {
            (Some(a), Some(b)) => self.rows[a][b],
            _ => false,
        }
    }

    /// `M_ij && M_ji`.
    pub fn mutual(&self, i: NodeId, j: NodeId) -> bool {
        self.get(i, j) && self.get(j, i)
    }

    /// Force `M_ij = FALSE` wherever `i` does not trust `j`.
    pub fn sanitize(&mut self, graph: &DiagnosisGraph) {
        let ids = self.roster.ids().to_vec();
        for (a, &i) in ids.iter().enumerate() {
            for (b, &j) in ids.iter().enumerate() {
                if a != b && !graph.trusts(i, j) {
                    self.rows[a][b] = false;
                }
            }
        }
    }
}

/// Pack `M_me` as `n - 1` bits, one per other participant.
pub fn encode_vector(roster: &Roster, me: NodeId, entry: impl Fn(NodeId) -> bool) -> Bits {
    roster.others(me).map(entry).collect()
}

/// Read one entry of a packed vector.
pub fn vector_entry(roster: &Roster, me: NodeId, other: NodeId, vector: &BitsRef) -> bool {
    roster
        .others(me)
        .position(|p| p == other)
        .and_then(|i| vector.get(i).map(|b| *b))
        .unwrap_or(false)
}

/// All-`value` vector of the right length.
pub fn constant_vector(roster: &Roster, value: bool) -> Bits {
    let mut v = bits::zeros(roster.len().saturating_sub(1));
    v.fill(value);
    v
}

/// The lexicographically smallest `size`-subset of the roster that is a
/// clique of mutual matches.
pub fn find_consistent_set(matrix: &MatchMatrix, size: usize) -> Option<Vec<NodeId>> {
    matrix
        .roster()
        .ids()
        .iter()
        .copied()
        .combinations(size)
        .find(|set| set.iter().tuple_combinations().all(|(a, b)| matrix.mutual(*a, *b)))
}

/// Lowest-id member of `x` that mutually trusts `y`.
pub fn choose_helper(y: NodeId, x: &[NodeId], graph: &DiagnosisGraph) -> Option<NodeId> {
    x.iter().copied().filter(|z| graph.trusts(*z, y)).min()
}
