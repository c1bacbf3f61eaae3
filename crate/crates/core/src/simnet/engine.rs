//! Lock-step execution of a scenario with ground-truth property checks.
//!
//! Every fault-free node computes its own view from what it received; the
//! points where views must coincide (agreed match matrix, X, announcements,
//! fallback outcome, diagnosis graph) are compared and any divergence aborts
//! the run. Faulty nodes start from the same protocol computations and are
//! then rewritten by the [`Adversary`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adversary::Adversary;
use super::scenario::{Scenario, ScenarioError};
use crate::bitcast::{self, BitcastError, EnvelopeRecord, Instance, InstanceKind};
use crate::bits::{self, Bits};
use crate::code::{CodeError, CodeSpec, Codeword};
use crate::consensus::fallback::{complement, examine, plurality, FallbackContext};
use crate::consensus::step::symbols_at;
use crate::consensus::{
    assemble_f, choose_helper, find_consistent_set, generation_code, step2_match, Claims, ClaimsLayout,
    DecisionPath, Finding, FyCheck, MatchMatrix, Params, Roster,
};
use crate::diagnosis::{DiagnosisDelta, DiagnosisError, DiagnosisGraph, NodeId};
use crate::gf::Symbol;
use crate::metrics::{ComplexityReport, StepBits};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Bitcast(#[from] BitcastError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
    #[error("generation {generation}: internal invariant broken: {detail}")]
    Invariant { generation: usize, detail: String },
}

/// Properties checked against ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// Every fault-free node decides all `L` bits.
    Termination,
    /// Fault-free nodes decide the same bits.
    Consistency,
    /// A value common to all fault-free nodes is decided.
    Validity,
    /// Fault-free members of X hold one value.
    ConsistentSetValue,
    /// A valid `F_y` at a fault-free `y` decodes to that value.
    DecodedValue,
    /// A fault-free node detects only after a faulty node deviated.
    DetectionSoundness,
    /// Only faulty nodes are isolated.
    IsolationSoundness,
    /// Fault-free nodes never accuse each other.
    TrustPersistence,
    /// Each fallback adds an accusation against a faulty node.
    FallbackProgress,
    /// At most `(t + 1) t` fallbacks.
    FallbackBound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub generation: Option<usize>,
    pub property: Property,
    pub detail: String,
}

/// One line of the per-generation log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub n: usize,
    pub t: usize,
    pub symbol_bits: usize,
    pub x: Option<Vec<NodeId>>,
    /// Members of X̄ whose agreed announcement was a detection.
    pub detections: Vec<NodeId>,
    pub path: DecisionPath,
    pub decided_digest: String,
    pub bits: StepBits,
    pub rounds: usize,
    pub findings: Vec<Finding>,
    pub diagnosis: DiagnosisDelta,
    /// `(accuser, target)` after this generation.
    pub accusations: Vec<(NodeId, NodeId)>,
    pub isolated: Vec<NodeId>,
    /// Whether a faulty node deviated in steps 1 through 5.
    pub deviated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub generation: usize,
    pub envelope: EnvelopeRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub params: Params,
    pub seed: u64,
    pub faulty: Vec<NodeId>,
    /// Hex of each fault-free node's decided `L` bits.
    pub decisions: BTreeMap<NodeId, String>,
    pub generations: Vec<GenerationRecord>,
    pub report: ComplexityReport,
    pub rounds: usize,
    pub diagnosis: DiagnosisGraph,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn fallbacks(&self) -> usize {
        self.report.paths.fallback
    }

    /// Canonical JSON log; identical bytes for identical scenarios.
    pub fn log_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run results serialize")
    }

    pub fn violations_of(&self, property: Property) -> usize {
        self.violations.iter().filter(|v| v.property == property).count()
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunResult, SimError> {
    let params = scenario.validate()?;
    let inputs = scenario.inputs()?;
    let faulty = scenario.faulty_ids();
    let honest: Vec<NodeId> = (0..params.n).filter(|p| !faulty.contains(p)).collect();
    let g0 = DiagnosisGraph::new(params.n, params.t)?;
    let scripts = scenario
        .faulty
        .iter()
        .map(|f| (f.node, f.directives.clone()))
        .collect();
    let mut sim = Sim {
        params,
        inputs,
        honest: honest.clone(),
        graphs: honest.iter().map(|h| (*h, g0.clone())).collect(),
        adversary: Adversary::new(scripts, scenario.seed, g0),
        trace: scenario.trace.then(Vec::new),
        violations: Vec::new(),
    };
    let mut report = ComplexityReport::new(
        params.n,
        params.t,
        params.value_bits,
        params.total_bits,
        bitcast::unit_cost(params.n, params.t)?,
    );
    let mut decided: BTreeMap<NodeId, Bits> = honest.iter().map(|h| (*h, Bits::new())).collect();
    let mut records = Vec::new();
    let mut rounds = 0;

    for generation in 0..params.generations() {
        let out = sim.generation(generation)?;
        for (h, v) in &out.decided {
            decided.get_mut(h).expect("honest").extend_from_bitslice(v);
        }
        report.push(out.record.path, out.record.bits);
        rounds += out.record.rounds;
        records.push(out.record);
    }

    let max_fallbacks = (params.t + 1) * params.t;
    if report.paths.fallback > max_fallbacks {
        sim.violate(
            None,
            Property::FallbackBound,
            format!("{} fallbacks, bound {max_fallbacks}", report.paths.fallback),
        );
    }
    for (h, v) in &decided {
        if v.len() != params.total_bits {
            sim.violate(
                None,
                Property::Termination,
                format!("node {h} decided {} of {} bits", v.len(), params.total_bits),
            );
        }
    }

    let diagnosis = sim.public_graph(params.generations())?;
    Ok(RunResult {
        scenario: scenario.name.clone(),
        params,
        seed: scenario.seed,
        faulty,
        decisions: decided.iter().map(|(h, v)| (*h, bits::to_hex(v))).collect(),
        generations: records,
        report,
        rounds,
        diagnosis,
        violations: sim.violations,
        trace: sim.trace.unwrap_or_default(),
    })
}

struct Sim {
    params: Params,
    inputs: Vec<Bits>,
    honest: Vec<NodeId>,
    /// Each fault-free node's own copy.
    graphs: BTreeMap<NodeId, DiagnosisGraph>,
    adversary: Adversary,
    trace: Option<Vec<TraceEntry>>,
    violations: Vec<Violation>,
}

struct GenerationOutput {
    record: GenerationRecord,
    decided: BTreeMap<NodeId, Bits>,
}

/// Per-node state accumulated during a generation.
struct Local {
    value: Bits,
    codeword: Codeword,
    /// Step-1 message from each other participant.
    received: BTreeMap<NodeId, Option<Symbol>>,
    helper_received: Option<Vec<Symbol>>,
}

impl Sim {
    fn violate(&mut self, generation: Option<usize>, property: Property, detail: String) {
        self.violations.push(Violation {
            generation,
            property,
            detail,
        });
    }

    fn is_faulty(&self, p: NodeId) -> bool {
        self.adversary.is_faulty(p)
    }

    /// The graph every fault-free node holds; they must all agree.
    fn public_graph(&self, generation: usize) -> Result<DiagnosisGraph, SimError> {
        let mut copies = self.graphs.values();
        let first = copies.next().expect("at least one fault-free node").clone();
        if copies.any(|g| *g != first) {
            return Err(invariant(generation, "fault-free diagnosis graphs diverged"));
        }
        Ok(first)
    }

    fn chunk(&self, node: NodeId, generation: usize) -> Bits {
        let d = self.params.value_bits;
        self.inputs[node][generation * d..(generation + 1) * d].to_bitvec()
    }

    fn broadcast(
        &mut self,
        generation: usize,
        roster: &Roster,
        t: usize,
        kind: InstanceKind,
        sources: &[NodeId],
        values: Vec<Bits>,
    ) -> Result<bitcast::BatchOutcome, SimError> {
        let instances: Vec<Instance> = sources
            .iter()
            .zip(&values)
            .map(|(s, v)| Instance::new(kind, *s, v.len()))
            .collect();
        let mut log = self.trace.is_some().then(Vec::new);
        let out = bitcast::run_many(roster.ids(), t, &instances, &values, &mut self.adversary, log.as_mut())?;
        if let (Some(trace), Some(log)) = (self.trace.as_mut(), log) {
            trace.extend(log.into_iter().map(|envelope| TraceEntry { generation, envelope }));
        }
        Ok(out)
    }

    fn generation(&mut self, generation: usize) -> Result<GenerationOutput, SimError> {
        let g = self.public_graph(generation)?;
        let roster = Roster::of(&g);
        let (n, t) = g.reduced_params()?;
        let d = self.params.value_bits;
        let code = generation_code(n, t, d)?;
        let m = code.layout().bits();
        self.adversary.begin_generation(generation, &g, code.layout().clone());
        let participants: Vec<NodeId> = self.honest.iter().copied().filter(|h| roster.contains(*h)).collect();
        for h in self.honest.clone() {
            if !roster.contains(h) {
                self.violate(Some(generation), Property::Termination, format!("fault-free node {h} is isolated"));
            }
        }
        let mut bits = StepBits::default();
        let mut rounds = 0;

        // step 1
        let mut local: BTreeMap<NodeId, Local> = BTreeMap::new();
        for &p in roster.ids() {
            let mut data = code.split_value(&self.chunk(p, generation))?;
            if self.is_faulty(p) {
                self.adversary.shift_data(p, &mut data);
            }
            let codeword = code.encode(&data)?;
            local.insert(
                p,
                Local {
                    value: code.join_value(&data, d),
                    codeword,
                    received: roster.others(p).map(|q| (q, None)).collect(),
                    helper_received: None,
                },
            );
        }
        for &p in roster.ids() {
            let own = local[&p].codeword.at(pos(&roster, p)).clone();
            for q in roster.others(p).collect::<Vec<_>>() {
                if !g.trusts(p, q) {
                    continue;
                }
                let msg = if self.is_faulty(p) {
                    self.adversary.step1(p, q, &own)
                } else {
                    Some(own.clone())
                };
                if let Some(sym) = msg {
                    bits.step1 += m as u64;
                    local.get_mut(&q).expect("participant").received.insert(p, Some(sym));
                }
            }
        }
        rounds += 1;

        // steps 2 and 3
        let vectors: Vec<Bits> = roster
            .ids()
            .iter()
            .map(|p| {
                let l = &local[p];
                step2_match(*p, &roster, &g, &l.codeword, |q| l.received.get(&q).and_then(|s| s.as_ref()))
            })
            .collect();
        let out = self.broadcast(generation, &roster, t, InstanceKind::Match, roster.ids(), vectors)?;
        bits.step3 = out.bits;
        rounds += out.rounds;
        let (matrix, x) = self.agree(generation, &participants, |h, graph| {
            let mut mm = MatchMatrix::from_vectors(roster.clone(), &out.outputs[&h]);
            mm.sanitize(graph);
            let x = find_consistent_set(&mm, n - t);
            (mm, x)
        })?;
        self.adversary.set_consistent_set(x.clone());

        let mut detections = Vec::new();
        let mut findings = Vec::new();
        let mut delta = DiagnosisDelta::default();
        let path;
        let mut decided: BTreeMap<NodeId, Bits> = BTreeMap::new();

        match &x {
            None => {
                path = DecisionPath::Default;
                for &h in &participants {
                    decided.insert(h, bits::zeros(d));
                }
            }
            Some(x) => {
                self.check_consistent_set(generation, x, &local);
                let xbar = complement(&roster, x);
                let mut fy: BTreeMap<NodeId, FyCheck> = BTreeMap::new();
                let mut announced = BTreeMap::new();
                if !xbar.is_empty() {
                    // step 5
                    for &y in &xbar {
                        let z = choose_helper(y, x, &g)
                            .ok_or_else(|| invariant(generation, format!("no helper for {y}")))?;
                        let honest_syms = symbols_at(&roster, &local[&z].codeword, &xbar);
                        let msg = if self.is_faulty(z) {
                            self.adversary.helper(z, y, &honest_syms)
                        } else {
                            Some(honest_syms)
                        };
                        if let Some(list) = &msg {
                            bits.step5 += (list.len() * m) as u64;
                        }
                        local.get_mut(&y).expect("participant").helper_received = msg;
                    }
                    rounds += 1;
                    for &y in &xbar {
                        let l = &local[&y];
                        let check = assemble_f(
                            y,
                            &roster,
                            x,
                            &g,
                            &code,
                            |p| l.received.get(&p).cloned().flatten(),
                            l.helper_received.as_deref(),
                        )?;
                        fy.insert(y, check);
                    }
                    let deviated = self.adversary.deviated();
                    self.check_detections(generation, x, &xbar, &fy, &local, &code, deviated);

                    // step 6
                    let notes: Vec<Bits> = xbar.iter().map(|y| bits::from_u64(fy[y].detected as u64, 1)).collect();
                    let out = self.broadcast(generation, &roster, t, InstanceKind::Notify, &xbar, notes)?;
                    bits.step6 = out.bits;
                    rounds += out.rounds;
                    announced = self.agree(generation, &participants, |h, _| {
                        xbar.iter()
                            .enumerate()
                            .map(|(i, y)| (*y, out.outputs[&h][i][0]))
                            .collect::<BTreeMap<NodeId, bool>>()
                    })?;
                    detections = announced.iter().filter(|(_, a)| **a).map(|(y, _)| *y).collect();
                }

                if detections.is_empty() {
                    path = DecisionPath::Normal;
                    for &h in &participants {
                        let v = if x.contains(&h) {
                            local[&h].value.clone()
                        } else {
                            match &fy[&h].codeword {
                                Some(cw) => code.join_value(&cw.symbols()[..code.k()], d),
                                None => bits::zeros(d),
                            }
                        };
                        decided.insert(h, v);
                    }
                } else {
                    path = DecisionPath::Fallback;
                    let (value, found, change, fb_bits, fb_rounds) =
                        self.fallback(generation, &g, &roster, &code, x, &matrix, &announced, &local, &participants)?;
                    bits.fallback = fb_bits;
                    rounds += fb_rounds;
                    findings = found;
                    delta = change;
                    for &h in &participants {
                        decided.insert(h, value.clone());
                    }
                }
            }
        }

        let digest = self.check_decisions(generation, &participants, &decided);
        let after = self.public_graph(generation)?;
        self.check_diagnosis(generation, &after);
        Ok(GenerationOutput {
            record: GenerationRecord {
                generation,
                n,
                t,
                symbol_bits: m,
                x,
                detections,
                path,
                decided_digest: digest,
                bits,
                rounds,
                findings,
                diagnosis: delta,
                accusations: after.accusation_pairs(),
                isolated: after.isolated().iter().copied().collect(),
                deviated: self.adversary.deviated(),
            },
            decided,
        })
    }

    /// Compute a fault-free node's view for each participant and require
    /// them to coincide.
    fn agree<T: PartialEq>(
        &self,
        generation: usize,
        participants: &[NodeId],
        view: impl Fn(NodeId, &DiagnosisGraph) -> T,
    ) -> Result<T, SimError> {
        let mut views = participants.iter().map(|h| view(*h, &self.graphs[h]));
        let first = views
            .next()
            .ok_or_else(|| invariant(generation, "no fault-free participant"))?;
        if views.any(|v| v != first) {
            return Err(invariant(generation, "fault-free views diverged"));
        }
        Ok(first)
    }

    #[allow(clippy::too_many_arguments)]
    fn fallback(
        &mut self,
        generation: usize,
        g: &DiagnosisGraph,
        roster: &Roster,
        code: &CodeSpec,
        x: &[NodeId],
        matrix: &MatchMatrix,
        announced: &BTreeMap<NodeId, bool>,
        local: &BTreeMap<NodeId, Local>,
        participants: &[NodeId],
    ) -> Result<(Bits, Vec<Finding>, DiagnosisDelta, u64, usize), SimError> {
        let (_, t) = g.reduced_params()?;
        let layout = ClaimsLayout::new(roster.clone(), self.params.value_bits, code.layout().clone(), x);
        let mut bundles = Vec::with_capacity(roster.len());
        for &p in roster.ids() {
            let l = &local[&p];
            let mut claims = Claims::conforming(
                p,
                roster,
                g,
                x,
                l.value.clone(),
                &l.codeword,
                l.received.clone(),
                l.helper_received.clone().filter(|_| !x.contains(&p)),
            );
            if self.is_faulty(p) {
                self.adversary.fallback_claims(p, &mut claims, roster, code, x);
            }
            bundles.push(layout.encode(p, &claims));
        }
        let out = self.broadcast(generation, roster, t, InstanceKind::Fallback, roster.ids(), bundles)?;
        let (value, found) = self.agree(generation, participants, |h, graph| {
            let claims: BTreeMap<NodeId, Claims> = roster
                .ids()
                .iter()
                .enumerate()
                .map(|(i, p)| (*p, layout.decode(*p, &out.outputs[&h][i])))
                .collect();
            let value = plurality(claims.values().map(|c| &c.value)).expect("nonempty roster");
            let ctx = FallbackContext {
                roster,
                graph,
                code,
                x,
                matrix,
                announcements: announced,
            };
            (value, examine(&ctx, &claims))
        })?;
        let found = found?;

        let before = self.faulty_accusations(g);
        let mut deltas = Vec::new();
        for h in participants {
            let graph = self.graphs.get_mut(h).expect("fault-free copy");
            deltas.push(found.apply(graph)?);
        }
        let delta = deltas.first().cloned().unwrap_or_default();
        if deltas.iter().any(|d| *d != delta) {
            return Err(invariant(generation, "diagnosis updates diverged"));
        }
        let after = self.faulty_accusations(&self.graphs[&participants[0]]);
        if !before.iter().zip(&after).any(|(b, a)| a > b) {
            self.violate(
                Some(generation),
                Property::FallbackProgress,
                format!("no new accusation against a faulty node; findings {:?}", found.findings),
            );
        }
        Ok((value, found.findings.into_iter().collect(), delta, out.bits, out.rounds))
    }

    fn faulty_accusations(&self, g: &DiagnosisGraph) -> Vec<usize> {
        self.adversary.faulty().map(|f| g.accusation_count(f)).collect()
    }

    fn check_consistent_set(&mut self, generation: usize, x: &[NodeId], local: &BTreeMap<NodeId, Local>) {
        let honest: Vec<&Bits> = x.iter().filter(|p| !self.is_faulty(**p)).map(|p| &local[p].value).collect();
        if honest.windows(2).any(|w| w[0] != w[1]) {
            self.violate(Some(generation), Property::ConsistentSetValue, format!("X = {x:?} holds differing fault-free values"));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_detections(
        &mut self,
        generation: usize,
        x: &[NodeId],
        xbar: &[NodeId],
        fy: &BTreeMap<NodeId, FyCheck>,
        local: &BTreeMap<NodeId, Local>,
        code: &CodeSpec,
        deviated: bool,
    ) {
        let reference = x.iter().find(|p| !self.is_faulty(**p)).map(|p| local[p].value.clone());
        let honest: Vec<NodeId> = xbar.iter().copied().filter(|y| !self.is_faulty(*y)).collect();
        for y in honest {
            let check = &fy[&y];
            if check.detected && !deviated {
                self.violate(
                    Some(generation),
                    Property::DetectionSoundness,
                    format!("node {y} detected without any deviation"),
                );
            }
            if let (Some(cw), Some(v)) = (&check.codeword, &reference) {
                let decoded = code.join_value(&cw.symbols()[..code.k()], self.params.value_bits);
                if decoded != *v {
                    self.violate(
                        Some(generation),
                        Property::DecodedValue,
                        format!("node {y} decodes a value no fault-free member of X holds"),
                    );
                }
            }
        }
    }

    /// Consistency and validity for this generation; returns the decided digest.
    fn check_decisions(&mut self, generation: usize, participants: &[NodeId], decided: &BTreeMap<NodeId, Bits>) -> String {
        let values: Vec<&Bits> = participants.iter().map(|h| &decided[h]).collect();
        if values.windows(2).any(|w| w[0] != w[1]) {
            self.violate(Some(generation), Property::Consistency, "fault-free decisions differ".into());
        }
        let inputs: Vec<Bits> = self.honest.iter().map(|h| self.chunk(*h, generation)).collect();
        if inputs.windows(2).all(|w| w[0] == w[1]) {
            if let Some(v) = values.iter().find(|v| ***v != inputs[0]) {
                self.violate(
                    Some(generation),
                    Property::Validity,
                    format!("common input {} but decided {}", bits::to_hex(&inputs[0]), bits::to_hex(v)),
                );
            }
        }
        values.first().map(|v| bits::digest(v)).unwrap_or_default()
    }

    fn check_diagnosis(&mut self, generation: usize, g: &DiagnosisGraph) {
        for &i in g.isolated() {
            if !self.is_faulty(i) {
                self.violate(Some(generation), Property::IsolationSoundness, format!("fault-free node {i} isolated"));
            }
        }
        for (accuser, target) in g.accusation_pairs() {
            if !self.is_faulty(accuser) && !self.is_faulty(target) {
                self.violate(
                    Some(generation),
                    Property::TrustPersistence,
                    format!("fault-free {accuser} accuses fault-free {target}"),
                );
            }
        }
    }
}

fn pos(roster: &Roster, p: NodeId) -> usize {
    roster.pos(p).expect("roster member")
}

fn invariant(generation: usize, detail: impl Into<String>) -> SimError {
    SimError::Invariant {
        generation,
        detail: detail.into(),
    }
}
