//! Scenario files: network size, workload, inputs and adversary scripts.
//!
//! ```toml
//! name = "corrupt-then-isolate"
//! n = 4
//! t = 1
//! value_bits = 8      # D, bits per generation
//! total_bits = 32     # L
//! seed = 7
//!
//! [values]
//! mode = "common"
//! hex = "a1b2c3d4"
//!
//! [[faulty]]
//! node = 3
//!
//! [[faulty.directives]]
//! action = "corrupt_symbol"
//! target = 0
//! tamper = "flip"
//! generations = [0, 1]
//! ```

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adversary::Directive;
use crate::bits::{self, Bits};
use crate::consensus::{ConsensusError, Params};
use crate::diagnosis::NodeId;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Params(#[from] ConsensusError),
    #[error("{count} faulty nodes exceed t = {t}")]
    TooManyFaulty { count: usize, t: usize },
    #[error("faulty node {node} out of range for n = {n}")]
    UnknownNode { node: NodeId, n: usize },
    #[error("node {0} listed as faulty twice")]
    DuplicateFaulty(NodeId),
    #[error("{got} per-node values for n = {n}")]
    ValueCount { got: usize, n: usize },
    #[error("bad hex value: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error("directive on node {node}: {reason}")]
    Directive { node: NodeId, reason: String },
}

/// Input values. Hex strings are read from the most significant bit and
/// zero padded (or truncated) to `total_bits`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Values {
    Common { hex: String },
    PerNode { hex: Vec<String> },
    /// One seeded random value shared by every node.
    #[default]
    RandomCommon,
    /// An independent seeded random value per node.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultyNode {
    pub node: NodeId,
    #[serde(default)]
    pub directives: Vec<Directive>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub t: usize,
    pub value_bits: usize,
    pub total_bits: usize,
    #[serde(default)]
    pub seed: u64,
    /// Record every broadcast message in the result.
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub values: Values,
    #[serde(default)]
    pub faulty: Vec<FaultyNode>,
}

impl Scenario {
    /// A fault-free scenario with a random common value.
    pub fn fault_free(n: usize, t: usize, value_bits: usize, total_bits: usize) -> Self {
        Scenario {
            name: format!("fault-free-n{n}-t{t}-d{value_bits}"),
            n,
            t,
            value_bits,
            total_bits,
            seed: 0,
            trace: false,
            values: Values::RandomCommon,
            faulty: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut s = Self::from_toml(&text)?;
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    pub fn validate(&self) -> Result<Params, ScenarioError> {
        let params = Params::new(self.n, self.t, self.value_bits, self.total_bits)?;
        if self.faulty.len() > self.t {
            return Err(ScenarioError::TooManyFaulty {
                count: self.faulty.len(),
                t: self.t,
            });
        }
        let mut seen = Vec::new();
        for f in &self.faulty {
            if f.node >= self.n {
                return Err(ScenarioError::UnknownNode { node: f.node, n: self.n });
            }
            if seen.contains(&f.node) {
                return Err(ScenarioError::DuplicateFaulty(f.node));
            }
            seen.push(f.node);
            for d in &f.directives {
                d.validate(self.n).map_err(|reason| ScenarioError::Directive { node: f.node, reason })?;
            }
        }
        if let Values::PerNode { hex } = &self.values {
            if hex.len() != self.n {
                return Err(ScenarioError::ValueCount { got: hex.len(), n: self.n });
            }
        }
        self.inputs()?;
        Ok(params)
    }

    pub fn is_faulty(&self, node: NodeId) -> bool {
        self.faulty.iter().any(|f| f.node == node)
    }

    pub fn faulty_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.faulty.iter().map(|f| f.node).collect();
        ids.sort_unstable();
        ids
    }

    /// Every node's `total_bits`-bit input.
    pub fn inputs(&self) -> Result<Vec<Bits>, ScenarioError> {
        let len = self.total_bits;
        let parse = |h: &str| -> Result<Bits, ScenarioError> {
            let padded = if h.len() % 2 == 1 { format!("{h}0") } else { h.to_string() };
            Ok(bits::from_hex(&padded, len)?)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        let mut random = || {
            let mut bytes = vec![0u8; len.div_ceil(8)];
            rng.fill_bytes(&mut bytes);
            let mut b = Bits::from_vec(bytes);
            b.truncate(len);
            b
        };
        Ok(match &self.values {
            Values::Common { hex } => vec![parse(hex)?; self.n],
            Values::PerNode { hex } => hex.iter().map(|h| parse(h)).collect::<Result<_, _>>()?,
            Values::RandomCommon => vec![random(); self.n],
            Values::Random => (0..self.n).map(|_| random()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::adversary::{Action, Tamper, Target};

    const SAMPLE: &str = r#"
name = "sample"
n = 4
t = 1
value_bits = 8
total_bits = 16
seed = 3

[values]
mode = "per_node"
hex = ["a1b2", "a1b2", "a1b2", "ffff"]

[[faulty]]
node = 3

[[faulty.directives]]
action = "corrupt_symbol"
target = 0
tamper = "flip"
generations = [1]

[[faulty.directives]]
action = "lie_in_fallback"
lie = { claim = "received_from", target = "first_trusted_in_x", tamper = { xor = 3 } }
requires_isolated = []
"#;

    #[test]
    fn parses_sample() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        assert_eq!(s.validate().unwrap().generations(), 2);
        let inputs = s.inputs().unwrap();
        assert_eq!(inputs[0], bits::from_u64(0xa1b2, 16));
        assert_eq!(inputs[3], bits::from_u64(0xffff, 16));
        let d = &s.faulty[0].directives;
        assert_eq!(d[0].generations, Some(vec![1]));
        assert_eq!(
            d[0].action,
            Action::CorruptSymbol {
                target: Target::Node(0),
                tamper: Tamper::flip(),
            }
        );
        // serialization round trip
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn rejects_invalid() {
        let mut s = Scenario::from_toml(SAMPLE).unwrap();
        s.faulty.push(FaultyNode { node: 2, directives: vec![] });
        assert!(matches!(s.validate(), Err(ScenarioError::TooManyFaulty { .. })));
        let mut s = Scenario::from_toml(SAMPLE).unwrap();
        s.faulty[0].node = 9;
        assert!(matches!(s.validate(), Err(ScenarioError::UnknownNode { .. })));
        let mut s = Scenario::from_toml(SAMPLE).unwrap();
        s.total_bits = 12;
        assert!(matches!(s.validate(), Err(ScenarioError::Params(ConsensusError::NotMultiple { .. }))));
        assert!(Scenario::from_toml("n = 4\nt = 1\nvalue_bits = 8\ntotal_bits = 8\nbogus = 1").is_err());
    }

    #[test]
    fn random_values_are_seeded() {
        let mut s = Scenario::fault_free(4, 1, 8, 24);
        s.values = Values::Random;
        let a = s.inputs().unwrap();
        assert_eq!(a, s.inputs().unwrap());
        assert_eq!(a[0].len(), 24);
        assert_ne!(a[0], a[1]);
        s.seed = 1;
        assert_ne!(a, s.inputs().unwrap());
        let c = Scenario::fault_free(4, 1, 8, 24).inputs().unwrap();
        assert!(c.iter().all(|v| *v == c[0]));
    }
}
