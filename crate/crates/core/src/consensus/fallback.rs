//! Full-broadcast fallback: every participant broadcasts what it holds, sent
//! and received this generation; the agreed bundles fix the decision and
//! expose at least one faulty node.
//!
//! Checks over the agreed bundles, with `c_j` the encoding of `j`'s claimed
//! value:
//!
//! * (a) `j`'s claims contradict the protocol given `c_j`: a step-1 send to a
//!   trusted peer other than `c_j[j]`, any traffic claimed with an untrusted
//!   peer, helper symbols other than `c_j` on X̄, or helper traffic in a role
//!   it does not hold: everyone accuses `j`.
//! * (b) `j` and `q` trust each other but disagree on the step-1 message from
//!   `j` to `q`: dispute.
//! * (c) `z_y` and `y` disagree on the helper message: dispute.
//! * (d) the agreed `M_kj` differs from what `k`'s claims imply: everyone
//!   accuses `k`.
//! * (e) the agreed announcement of `y` differs from the check of `F_y` rebuilt
//!   from `y`'s claims: everyone accuses `y`.
//!
//! A fault-free node never trips (a), (d) or (e), and two fault-free nodes
//! never disagree in (b) or (c), so every finding involves a faulty node.
//!
//! Some check always fires. Suppose none does. For `j, k` in X the agreed
//! `M_jk` is set and they trust each other, so by (d), (b) and (a)
//! `c_j[k] = r_jk = s_kk = c_k[k]`. Every `c_j` with `j` in X therefore agrees on
//! all `n - t >= n - 2t` positions of X, and by the MDS property they are one
//! codeword `c`. By (b), (c) and (a), `y`'s claimed receptions are `c` on X and
//! on X̄, so the rebuilt `F_y` is valid for every `y`, and by (e) nobody
//! announced: no fallback would have run.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::step::{assemble_f, step1_codeword, symbols_at};
use super::{choose_helper, MatchMatrix, Roster};
use crate::bits::{self, Bits, BitsRef};
use crate::code::{CodeError, CodeSpec, Codeword};
use crate::diagnosis::{DiagnosisDelta, DiagnosisError, DiagnosisGraph, NodeId};
use crate::gf::{Symbol, SymbolLayout};

/// One participant's account of the generation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claims {
    pub value: Bits,
    /// Step-1 message to each other participant.
    pub sent: BTreeMap<NodeId, Option<Symbol>>,
    /// Step-1 message from each other participant.
    pub received: BTreeMap<NodeId, Option<Symbol>>,
    /// Helper message sent to each member of X̄.
    pub helper_sent: BTreeMap<NodeId, Option<Vec<Symbol>>>,
    /// Helper message received, for members of X̄.
    pub helper_received: Option<Vec<Symbol>>,
}

impl Claims {
    /// Claims that follow the protocol for `value`, with the given receptions.
    #[allow(clippy::too_many_arguments)]
    pub fn conforming(
        me: NodeId,
        roster: &Roster,
        graph: &DiagnosisGraph,
        x: &[NodeId],
        value: Bits,
        codeword: &Codeword,
        received: BTreeMap<NodeId, Option<Symbol>>,
        helper_received: Option<Vec<Symbol>>,
    ) -> Self {
        let my_pos = roster.pos(me).expect("roster member");
        let xbar = complement(roster, x);
        let sent = roster
            .others(me)
            .map(|q| (q, graph.trusts(me, q).then(|| codeword.at(my_pos).clone())))
            .collect();
        let helper_sent = xbar
            .iter()
            .map(|&y| {
                let helps = choose_helper(y, x, graph) == Some(me);
                (y, helps.then(|| symbols_at(roster, codeword, &xbar)))
            })
            .collect();
        Claims {
            value,
            sent,
            received,
            helper_sent,
            helper_received,
        }
    }
}

/// Fixed bit layout of a claims bundle, identical for every participant.
///
/// `value`, then per other participant a presence bit and `m` bits for the
/// sent message, the same for received, then per member of X̄ a presence bit
/// and `t * m` helper bits, then one more presence bit and `t * m` bits for the
/// helper message received.
#[derive(Clone, Debug)]
pub struct ClaimsLayout {
    roster: Roster,
    value_bits: usize,
    symbol: SymbolLayout,
    xbar: Vec<NodeId>,
}

impl ClaimsLayout {
    pub fn new(roster: Roster, value_bits: usize, symbol: SymbolLayout, x: &[NodeId]) -> Self {
        let xbar = complement(&roster, x);
        ClaimsLayout {
            roster,
            value_bits,
            symbol,
            xbar,
        }
    }

    pub fn payload_bits(&self) -> usize {
        let m = self.symbol.bits();
        let t = self.xbar.len();
        let slots = self.roster.len().saturating_sub(1);
        self.value_bits + 2 * slots * (1 + m) + (t + 1) * (1 + t * m)
    }

    pub fn encode(&self, owner: NodeId, claims: &Claims) -> Bits {
        let mut out = Bits::with_capacity(self.payload_bits());
        let mut value = claims.value.clone();
        value.resize(self.value_bits, false);
        out.extend_from_bitslice(&value);
        for map in [&claims.sent, &claims.received] {
            for q in self.roster.others(owner) {
                self.put_symbols(&mut out, map.get(&q).and_then(|s| s.as_ref()).map(std::slice::from_ref), 1);
            }
        }
        let t = self.xbar.len();
        for y in &self.xbar {
            let h = claims.helper_sent.get(y).and_then(|h| h.as_deref());
            self.put_symbols(&mut out, h, t);
        }
        self.put_symbols(&mut out, claims.helper_received.as_deref(), t);
        debug_assert_eq!(out.len(), self.payload_bits());
        out
    }

    /// Parse a bundle; input of the wrong length is read as all zeros.
    pub fn decode(&self, owner: NodeId, payload: &BitsRef) -> Claims {
        let zeros;
        let payload = if payload.len() == self.payload_bits() {
            payload
        } else {
            zeros = bits::zeros(self.payload_bits());
            &zeros[..]
        };
        let mut cur = Cursor { bits: payload, at: 0 };
        let value = cur.take(self.value_bits).to_bitvec();
        let mut sent = BTreeMap::new();
        let mut received = BTreeMap::new();
        for map in [&mut sent, &mut received] {
            for q in self.roster.others(owner) {
                map.insert(q, self.get_symbols(&mut cur, 1).map(|mut v| v.remove(0)));
            }
        }
        let t = self.xbar.len();
        let helper_sent = self
            .xbar
            .iter()
            .map(|y| (*y, self.get_symbols(&mut cur, t)))
            .collect();
        let helper_received = self.get_symbols(&mut cur, t);
        Claims {
            value,
            sent,
            received,
            helper_sent,
            helper_received,
        }
    }

    /// Presence bit then `count` symbols; a wrong-length list counts as absent.
    fn put_symbols(&self, out: &mut Bits, symbols: Option<&[Symbol]>, count: usize) {
        let m = self.symbol.bits();
        match symbols.filter(|s| s.len() == count) {
            Some(list) => {
                out.push(true);
                for s in list {
                    self.symbol.write(s, out);
                }
            }
            None => {
                out.push(false);
                out.extend_from_bitslice(&bits::zeros(count * m));
            }
        }
    }

    fn get_symbols(&self, cur: &mut Cursor<'_>, count: usize) -> Option<Vec<Symbol>> {
        let m = self.symbol.bits();
        let present = cur.take(1)[0];
        let syms = (0..count).map(|_| self.symbol.read(cur.take(m))).collect();
        present.then_some(syms)
    }
}

struct Cursor<'a> {
    bits: &'a BitsRef,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> &'a BitsRef {
        let out = &self.bits[self.at..self.at + len];
        self.at += len;
        out
    }
}

/// Which check produced a finding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// (a)
    SelfInconsistent,
    /// (b)
    SymbolMismatch,
    /// (c)
    HelperMismatch,
    /// (d)
    MatchInconsistent,
    /// (e)
    AnnouncementInconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub check: Check,
    /// One node for unanimous accusations, `[sender, receiver]` for disputes.
    pub nodes: Vec<NodeId>,
}

/// Everything the checks found, deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Findings {
    pub findings: BTreeSet<Finding>,
}

impl Findings {
    fn accuse(&mut self, check: Check, node: NodeId) {
        self.findings.insert(Finding { check, nodes: vec![node] });
    }

    fn dispute(&mut self, check: Check, a: NodeId, b: NodeId) {
        self.findings.insert(Finding { check, nodes: vec![a, b] });
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn accused(&self) -> BTreeSet<NodeId> {
        self.findings
            .iter()
            .filter(|f| f.nodes.len() == 1)
            .map(|f| f.nodes[0])
            .collect()
    }

    pub fn disputes(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.findings
            .iter()
            .filter(|f| f.nodes.len() == 2)
            .map(|f| (f.nodes[0].min(f.nodes[1]), f.nodes[0].max(f.nodes[1])))
            .collect()
    }

    /// Unanimous accusations first, then disputes between nodes still present.
    pub fn apply(&self, graph: &mut DiagnosisGraph) -> Result<DiagnosisDelta, DiagnosisError> {
        let mut delta = DiagnosisDelta::default();
        for node in self.accused() {
            if !graph.is_isolated(node) {
                delta.merge(graph.accuse_all(node)?);
            }
        }
        for (a, b) in self.disputes() {
            if !graph.is_isolated(a) && !graph.is_isolated(b) {
                delta.merge(graph.apply_dispute(a, b)?);
            }
        }
        Ok(delta)
    }
}

/// Agreed public state the checks run against.
pub struct FallbackContext<'a> {
    pub roster: &'a Roster,
    pub graph: &'a DiagnosisGraph,
    pub code: &'a CodeSpec,
    pub x: &'a [NodeId],
    pub matrix: &'a MatchMatrix,
    /// Agreed step-6 bit of every member of X̄.
    pub announcements: &'a BTreeMap<NodeId, bool>,
}

/// Run checks (a) through (e) over every participant's agreed bundle.
pub fn examine(ctx: &FallbackContext<'_>, claims: &BTreeMap<NodeId, Claims>) -> Result<Findings, CodeError> {
    let roster = ctx.roster;
    let graph = ctx.graph;
    let xbar = complement(roster, ctx.x);
    let helpers: BTreeMap<NodeId, Option<NodeId>> =
        xbar.iter().map(|&y| (y, choose_helper(y, ctx.x, graph))).collect();
    let mut codewords = BTreeMap::new();
    for (&j, c) in claims {
        codewords.insert(j, step1_codeword(ctx.code, &c.value)?.1);
    }
    let mut found = Findings::default();

    for (&j, c) in claims {
        let cw = &codewords[&j];
        let own = cw.at(roster.pos(j).expect("roster member"));
        let bad_traffic = roster.others(j).any(|q| {
            let sent = c.sent.get(&q).cloned().flatten();
            let recv = c.received.get(&q).cloned().flatten();
            if graph.trusts(j, q) {
                sent.as_ref() != Some(own)
            } else {
                sent.is_some() || recv.is_some()
            }
        });
        let bad_helper = xbar.iter().any(|y| {
            let expected = (helpers[y] == Some(j)).then(|| symbols_at(roster, cw, &xbar));
            c.helper_sent.get(y).cloned().flatten() != expected
        });
        let stray_receipt = !xbar.contains(&j) && c.helper_received.is_some();
        if bad_traffic || bad_helper || stray_receipt {
            found.accuse(Check::SelfInconsistent, j);
        }
    }

    for (&j, cj) in claims {
        for q in roster.others(j) {
            if !graph.trusts(j, q) {
                continue;
            }
            let Some(cq) = claims.get(&q) else { continue };
            if cj.sent.get(&q).cloned().flatten() != cq.received.get(&j).cloned().flatten() {
                found.dispute(Check::SymbolMismatch, j, q);
            }
        }
    }

    for (&y, z) in &helpers {
        let (Some(z), Some(cy)) = (z, claims.get(&y)) else { continue };
        let Some(cz) = claims.get(z) else { continue };
        if cz.helper_sent.get(&y).cloned().flatten() != cy.helper_received {
            found.dispute(Check::HelperMismatch, *z, y);
        }
    }

    for (&k, ck) in claims {
        let cw = &codewords[&k];
        let inconsistent = roster.others(k).filter(|j| graph.trusts(k, *j)).any(|j| {
            let expected = ck.received.get(&j).cloned().flatten().as_ref()
                == Some(cw.at(roster.pos(j).expect("roster member")));
            ctx.matrix.get(k, j) != expected
        });
        if inconsistent {
            found.accuse(Check::MatchInconsistent, k);
        }
    }

    for &y in &xbar {
        let Some(cy) = claims.get(&y) else { continue };
        let rebuilt = assemble_f(
            y,
            roster,
            ctx.x,
            graph,
            ctx.code,
            |p| cy.received.get(&p).cloned().flatten(),
            cy.helper_received.as_deref(),
        )?;
        if ctx.announcements.get(&y).copied().unwrap_or(false) != rebuilt.detected {
            found.accuse(Check::AnnouncementInconsistent, y);
        }
    }

    Ok(found)
}

/// Most frequent claimed value; ties go to the numerically smallest.
pub fn plurality<'a>(values: impl IntoIterator<Item = &'a Bits>) -> Option<Bits> {
    let mut counts: BTreeMap<&Bits, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts
        .into_iter()
        .find(|(_, c)| *c == best)
        .map(|(v, _)| v.clone())
}

/// Roster members outside `x`, ascending.
pub fn complement(roster: &Roster, x: &[NodeId]) -> Vec<NodeId> {
    roster.ids().iter().copied().filter(|p| !x.contains(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::generation_code;

    /// A hand-run n = 4, t = 1 generation: X = {0, 1, 2}, y = 3, helper 0.
    struct World {
        roster: Roster,
        graph: DiagnosisGraph,
        code: CodeSpec,
        x: Vec<NodeId>,
        value: Bits,
        cw: Codeword,
    }

    impl World {
        fn new() -> Self {
            let code = generation_code(4, 1, 8).unwrap();
            let value = bits::from_u64(0xa7, 8);
            let (_, cw) = step1_codeword(&code, &value).unwrap();
            World {
                roster: Roster::new((0..4).collect()),
                graph: DiagnosisGraph::new(4, 1).unwrap(),
                code,
                x: vec![0, 1, 2],
                value,
                cw,
            }
        }

        fn honest(&self, me: NodeId) -> Claims {
            let received = self
                .roster
                .others(me)
                .map(|q| (q, Some(self.cw.at(q).clone())))
                .collect();
            let helper = (me == 3).then(|| vec![self.cw.at(3).clone()]);
            Claims::conforming(me, &self.roster, &self.graph, &self.x, self.value.clone(), &self.cw, received, helper)
        }

        fn matrix(&self) -> MatchMatrix {
            let vecs: Vec<Bits> = (0..4).map(|_| super::super::matching::constant_vector(&self.roster, true)).collect();
            MatchMatrix::from_vectors(self.roster.clone(), &vecs)
        }

        fn examine(&self, claims: &BTreeMap<NodeId, Claims>, matrix: &MatchMatrix, alarm: bool) -> Findings {
            let ann = BTreeMap::from([(3, alarm)]);
            let ctx = FallbackContext {
                roster: &self.roster,
                graph: &self.graph,
                code: &self.code,
                x: &self.x,
                matrix,
                announcements: &ann,
            };
            examine(&ctx, claims).unwrap()
        }
    }

    fn flip(s: &Symbol) -> Symbol {
        let mut s = s.clone();
        let last = s.lanes().len() - 1;
        s.lanes_mut()[last] ^= 1;
        s
    }

    #[test]
    fn honest_bundles_are_silent() {
        let w = World::new();
        let claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        assert!(w.examine(&claims, &w.matrix(), false).is_empty());
    }

    #[test]
    fn layout_round_trip() {
        let w = World::new();
        let layout = ClaimsLayout::new(w.roster.clone(), 8, w.code.layout().clone(), &w.x);
        // 8 + 2*3*(1+4) + 2*(1+4)
        assert_eq!(layout.payload_bits(), 48);
        for p in 0..4 {
            let mut c = w.honest(p);
            c.received.insert(if p == 0 { 1 } else { 0 }, None);
            let enc = layout.encode(p, &c);
            assert_eq!(layout.decode(p, &enc), c);
        }
        let d = layout.decode(3, &bits::zeros(5));
        assert_eq!(d.value, bits::zeros(8));
        assert!(d.sent.values().all(|s| s.is_none()));
    }

    #[test]
    fn false_alarm_with_honest_claims_is_caught_by_e() {
        let w = World::new();
        let claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        let f = w.examine(&claims, &w.matrix(), true);
        assert_eq!(f.accused(), BTreeSet::from([3]));
        assert!(f.findings.iter().all(|x| x.check == Check::AnnouncementInconsistent));
    }

    #[test]
    fn step_one_lie_is_a_dispute() {
        // 3 claims it received something else from 1 than 1 claims it sent
        let w = World::new();
        let mut claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        let c3 = claims.get_mut(&3).unwrap();
        let wrong = flip(w.cw.at(1));
        c3.received.insert(1, Some(wrong));
        let f = w.examine(&claims, &w.matrix(), true);
        assert_eq!(f.disputes(), BTreeSet::from([(1, 3)]));
        // 3's rebuilt F_3 is now invalid, so its alarm is consistent; its agreed
        // match entry for 1 is TRUE but the claims imply FALSE
        assert_eq!(f.accused(), BTreeSet::from([3]));
    }

    #[test]
    fn helper_disagreement_is_a_dispute() {
        let w = World::new();
        let mut claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        claims.get_mut(&3).unwrap().helper_received = Some(vec![flip(w.cw.at(3))]);
        let f = w.examine(&claims, &w.matrix(), true);
        assert_eq!(f.disputes(), BTreeSet::from([(0, 3)]));
        assert!(f.accused().is_empty());
    }

    #[test]
    fn inconsistent_sends_are_unanimous() {
        let w = World::new();
        let mut claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        claims.get_mut(&2).unwrap().sent.insert(1, Some(flip(w.cw.at(2))));
        let f = w.examine(&claims, &w.matrix(), false);
        assert!(f.accused().contains(&2));
        assert!(f.disputes().contains(&(1, 2)));
        // claiming helper duty that belongs to node 0
        let mut claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        claims.get_mut(&1).unwrap().helper_sent.insert(3, Some(vec![w.cw.at(3).clone()]));
        assert_eq!(w.examine(&claims, &w.matrix(), false).accused(), BTreeSet::from([1]));
    }

    #[test]
    fn match_claims_must_agree_with_agreed_vector() {
        let w = World::new();
        let claims: BTreeMap<_, _> = (0..4).map(|p| (p, w.honest(p))).collect();
        let mut vecs: Vec<Bits> = (0..4).map(|_| super::super::matching::constant_vector(&w.roster, true)).collect();
        vecs[2].set(0, false);
        let m = MatchMatrix::from_vectors(w.roster.clone(), &vecs);
        assert_eq!(w.examine(&claims, &m, false).accused(), BTreeSet::from([2]));
    }

    #[test]
    fn apply_orders_accusations_first() {
        let w = World::new();
        let mut f = Findings::default();
        f.dispute(Check::SymbolMismatch, 3, 1);
        f.accuse(Check::AnnouncementInconsistent, 3);
        let mut g = w.graph.clone();
        let delta = f.apply(&mut g).unwrap();
        assert_eq!(delta.isolated, vec![3]);
        assert!(delta.disputes.is_empty());
        assert!(g.trusts(0, 1));
    }

    #[test]
    fn plurality_breaks_ties_low() {
        let a = bits::from_u64(5, 4);
        let b = bits::from_u64(3, 4);
        assert_eq!(plurality([&a, &b]), Some(b.clone()));
        assert_eq!(plurality([&a, &b, &a]), Some(a.clone()));
        assert_eq!(plurality(std::iter::empty()), None);
    }
}
