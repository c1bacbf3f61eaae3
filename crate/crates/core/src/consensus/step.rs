//! Per-node computations for steps 1, 2 and 5.

use super::Roster;
use crate::bits::{Bits, BitsRef};
use crate::code::{CodeError, CodeSpec, Codeword, PartialWord};
use crate::diagnosis::{DiagnosisGraph, NodeId};
use crate::gf::Symbol;

/// Data symbols and codeword for a node's generation value.
pub fn step1_codeword(code: &CodeSpec, value: &BitsRef) -> Result<(Vec<Symbol>, Codeword), CodeError> {
    let data = code.split_value(value)?;
    let cw = code.encode(&data)?;
    Ok((data, cw))
}

/// `M_me`: entry for `q` is set iff `me` trusts `q` and received exactly its
/// own codeword's symbol at `q`'s position. Absent messages never match.
pub fn step2_match<'a>(
    me: NodeId,
    roster: &Roster,
    graph: &DiagnosisGraph,
    own: &Codeword,
    received: impl Fn(NodeId) -> Option<&'a Symbol>,
) -> Bits {
    roster
        .others(me)
        .map(|q| {
            let pos = roster.pos(q).expect("roster member");
            graph.trusts(me, q) && received(q) == Some(own.at(pos))
        })
        .collect()
}

/// Outcome of assembling `F_y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FyCheck {
    /// `F_y` is not a restriction of any codeword, or a needed message was absent.
    pub detected: bool,
    /// The unique codeword `F_y` restricts, when not detected.
    pub codeword: Option<Codeword>,
}

/// Assemble and check `F_y` for `y` outside X.
///
/// X-positions come from `y`'s step-1 receptions from the members it trusts;
/// positions outside X come from the helper, in ascending id order. Members
/// of X that `y` distrusts are erased, shrinking the code accordingly.
pub fn assemble_f(
    y: NodeId,
    roster: &Roster,
    x: &[NodeId],
    graph: &DiagnosisGraph,
    code: &CodeSpec,
    received: impl Fn(NodeId) -> Option<Symbol>,
    helper: Option<&[Symbol]>,
) -> Result<FyCheck, CodeError> {
    let detected = FyCheck {
        detected: true,
        codeword: None,
    };
    let xbar: Vec<NodeId> = roster.ids().iter().copied().filter(|p| !x.contains(p)).collect();
    let Some(helper) = helper.filter(|h| h.len() == xbar.len()) else {
        return Ok(detected);
    };
    let mut entries = Vec::with_capacity(roster.len());
    for &p in x.iter().filter(|p| graph.trusts(y, **p)) {
        match received(p) {
            Some(sym) if code.layout().contains(&sym) => entries.push((pos(roster, p), sym)),
            _ => return Ok(detected),
        }
    }
    for (&p, sym) in xbar.iter().zip(helper) {
        if !code.layout().contains(sym) {
            return Ok(detected);
        }
        entries.push((pos(roster, p), sym.clone()));
    }
    let word = PartialWord::new(code.n(), entries)?;
    let codeword = code.complete(&word)?;
    Ok(FyCheck {
        detected: codeword.is_none(),
        codeword,
    })
}

/// Codeword symbols at the positions of `members`, ascending by id.
pub fn symbols_at(roster: &Roster, cw: &Codeword, members: &[NodeId]) -> Vec<Symbol> {
    members.iter().map(|p| cw.at(pos(roster, *p)).clone()).collect()
}

fn pos(roster: &Roster, p: NodeId) -> usize {
    roster.pos(p).expect("roster member")
}
