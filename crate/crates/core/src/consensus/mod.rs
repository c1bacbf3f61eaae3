//! One generation of the coded agreement protocol, split into the pure
//! per-node computations that the simulator drives.
//!
//! Round schedule of a generation over the non-isolated participants:
//!
//! | step | rounds | traffic |
//! |------|--------|---------|
//! | 1 symbol exchange | 1 | own codeword symbol to every trusted peer |
//! | 3 match vectors | t + 1 | one broadcast per participant, `n - 1` bits |
//! | 5 helper symbols | 1 | `t` symbols from `z_y` to each `y` outside X |
//! | 6 detection | t + 1 | one 1-bit broadcast per node outside X |
//! | fallback | t + 1 | one claims bundle broadcast per participant |
//!
//! Steps 5 and 6 are skipped when no consistent set exists or `t = 0`; the
//! fallback runs only after an announced detection.
//!
//! Code positions are ranks in the ascending participant list, so a reduced
//! network uses a shorter code rather than leaving holes.

pub mod fallback;
pub mod matching;
pub mod step;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{CodeError, CodeSpec};
use crate::diagnosis::{DiagnosisGraph, NodeId};

pub use fallback::{Check, Claims, ClaimsLayout, Finding, Findings};
pub use matching::{choose_helper, find_consistent_set, MatchMatrix};
pub use step::{assemble_f, step1_codeword, step2_match, FyCheck};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("need n > 3t, got n = {n}, t = {t}")]
    Resilience { n: usize, t: usize },
    #[error("value length must be positive")]
    EmptyValue,
    #[error("total length {total} is not a multiple of the generation size {value}; pad the input")]
    NotMultiple { total: usize, value: usize },
    #[error("generation size {value} is not a multiple of {k} data symbols")]
    SymbolSplit { value: usize, k: usize },
    #[error("{symbol_bits}-bit symbols cannot label {n} code positions")]
    SymbolTooSmall { symbol_bits: usize, n: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Initial network and workload parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Participants before any isolation.
    pub n: usize,
    /// Fault bound before any isolation.
    pub t: usize,
    /// Bits agreed per generation (`D`).
    pub value_bits: usize,
    /// Total bits agreed (`L`).
    pub total_bits: usize,
}

impl Params {
    pub fn new(n: usize, t: usize, value_bits: usize, total_bits: usize) -> Result<Self, ConsensusError> {
        if n <= 3 * t {
            return Err(ConsensusError::Resilience { n, t });
        }
        if value_bits == 0 {
            return Err(ConsensusError::EmptyValue);
        }
        if !total_bits.is_multiple_of(value_bits) {
            return Err(ConsensusError::NotMultiple {
                total: total_bits,
                value: value_bits,
            });
        }
        let k = data_symbols(n, t);
        if !value_bits.is_multiple_of(k) {
            return Err(ConsensusError::SymbolSplit { value: value_bits, k });
        }
        let symbol_bits = value_bits / k;
        if symbol_bits < min_symbol_bits(n) {
            return Err(ConsensusError::SymbolTooSmall { symbol_bits, n });
        }
        Ok(Params {
            n,
            t,
            value_bits,
            total_bits,
        })
    }

    pub fn generations(&self) -> usize {
        self.total_bits / self.value_bits
    }

    /// `D / (n - 2t)` at the initial parameters.
    pub fn symbol_bits(&self) -> usize {
        self.value_bits / data_symbols(self.n, self.t)
    }
}

/// `n - 2t`, or `n` when no faults are tolerated.
pub fn data_symbols(n: usize, t: usize) -> usize {
    if t == 0 {
        n
    } else {
        n - 2 * t
    }
}

/// Smallest width whose field has `n` distinct points (at least 1).
pub fn min_symbol_bits(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// Code for a generation over `n` participants tolerating `t` faults.
///
/// The width is `ceil(D / k)` widened to `min_symbol_bits(n)`; the value is
/// zero padded to fill `k` symbols.
pub fn generation_code(n: usize, t: usize, value_bits: usize) -> Result<CodeSpec, CodeError> {
    let k = data_symbols(n, t);
    let m = value_bits.div_ceil(k).max(min_symbol_bits(n));
    CodeSpec::for_faults(m, n, t)
}

/// How a generation reached its decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    /// No consistent set; everyone decides the all-zero value.
    Default,
    Normal,
    Fallback,
}

/// Ascending participant list; a node's code position is its rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster(Vec<NodeId>);

impl Roster {
    pub fn new(mut ids: Vec<NodeId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Roster(ids)
    }

    pub fn of(graph: &DiagnosisGraph) -> Self {
        Roster(graph.participants())
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Code position of `id`.
    pub fn pos(&self, id: NodeId) -> Option<usize> {
        self.0.binary_search(&id).ok()
    }

    /// Every participant except `me`, ascending.
    pub fn others(&self, me: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied().filter(move |p| *p != me)
    }
}
