//! Adversarial mid-run terminations for fault-tolerance checks.

use crate::engine::{
    simulate, Fault, GraphParams, Inbox, Knowledge, NodeProgram, NodeView, Outbox, ProgramFactory, SimConfig, Step,
};
use crate::graph::{Graph, NodeId, RootedTree};
use crate::problem::ProblemKind;
use crate::programs::Residual;
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use std::collections::BTreeMap;

/// Runs `inner`, stopping each scheduled node without output at the end of
/// its round. Its messages of that round still go out.
pub struct Crashing<'a> {
    pub inner: &'a dyn ProgramFactory,
    pub schedule: BTreeMap<NodeId, u32>,
}

struct CrashNode {
    inner: Box<dyn NodeProgram>,
    at: Option<u32>,
}

impl NodeProgram for CrashNode {
    fn compose(&mut self, round: u32) -> Outbox {
        self.inner.compose(round)
    }
    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if self.at == Some(round) {
            return Ok(Step::handoff());
        }
        self.inner.process(round, inbox)
    }
    fn residual(&self) -> Residual {
        self.inner.residual()
    }
    fn stored_color(&self) -> Option<u64> {
        self.inner.stored_color()
    }
    fn check_invariants(&self) -> Result<(), Fault> {
        self.inner.check_invariants()
    }
    fn finished_at_start(&self) -> bool {
        self.inner.finished_at_start()
    }
}

impl ProgramFactory for Crashing<'_> {
    fn name(&self) -> String {
        format!("{} with crashes", self.inner.name())
    }
    fn problem(&self) -> ProblemKind {
        self.inner.problem()
    }
    fn knowledge(&self) -> Knowledge {
        self.inner.knowledge()
    }
    fn prediction_kind(&self) -> Option<ProblemKind> {
        self.inner.prediction_kind()
    }
    fn round_budget(&self, p: &GraphParams) -> Option<u32> {
        self.inner.round_budget(p)
    }
    fn build(&self, view: &NodeView) -> Box<dyn NodeProgram> {
        Box::new(CrashNode { inner: self.inner.build(view), at: self.schedule.get(&view.id).copied() })
    }
}

/// Each node crashes with probability `rate`, at a round drawn from
/// `1..=horizon`.
pub fn random_schedule(g: &Graph, horizon: u32, rate: f64, seed: u64) -> BTreeMap<NodeId, u32> {
    let mut rng = stream_rng(seed, Stream::Crashes);
    let mut out = BTreeMap::new();
    for v in g.nodes() {
        if rng.gen_bool(rate) {
            out.insert(v, rng.gen_range(1..=horizon.max(1)));
        }
    }
    out
}

/// Runs a coloring under a crash schedule and checks that stored colors of
/// the surviving nodes stay proper after every round and that the final
/// colors are proper on the survivors.
pub fn check_fault_tolerance(
    f: &dyn ProgramFactory,
    g: &Graph,
    tree: Option<&RootedTree>,
    schedule: BTreeMap<NodeId, u32>,
) -> Result<(), String> {
    let crashing = Crashing { inner: f, schedule };
    let cfg = SimConfig { trace: true, record_stored: true, ..Default::default() };
    let out = simulate(g, tree, &crashing, None, &cfg).map_err(|e| e.to_string())?;
    let trace = out.trace.expect("traced run");
    for (r, stored) in trace.stored.iter().enumerate() {
        for (u, v) in g.edges() {
            if let (Some(a), Some(b)) = (stored.get(&u), stored.get(&v)) {
                if a == b {
                    return Err(format!("after round {r} nodes {u} and {v} both hold {a}"));
                }
            }
        }
    }
    for (u, v) in g.edges() {
        if !(out.completed.contains(&u) && out.completed.contains(&v)) {
            continue;
        }
        if out.outputs.get(&u) == out.outputs.get(&v) {
            return Err(format!("nodes {u} and {v} output the same color"));
        }
    }
    for v in g.nodes() {
        if !crashing.schedule.contains_key(&v) && !out.completed.contains(&v) {
            return Err(format!("node {v} never crashed but has no color"));
        }
    }
    Ok(())
}
