//! MIS stages for general graphs.

use super::{broadcast, Mode, Residual};
use crate::engine::{Assignment, Fault, Inbox, Message, NodeProgram, NodeView, Outbox, Step};
use crate::graph::NodeId;
use crate::problem::OutputValue;
use std::collections::BTreeMap;

fn predicted_bit(view: &NodeView) -> bool {
    match view.prediction {
        Some(OutputValue::Bit(b)) => b,
        _ => panic!("node {} has no MIS prediction", view.id),
    }
}

fn one() -> Step {
    Step::done(vec![Assignment::Bit(true)])
}

fn zero() -> Step {
    Step::done(vec![Assignment::Bit(false)])
}

/// Drops every sender of `m` from the residual; true if there was one.
fn forget_senders(r: &mut Residual, inbox: &Inbox, m: &Message) -> bool {
    let senders: Vec<NodeId> = inbox.senders_of(m).collect();
    for &u in &senders {
        r.forget(u);
    }
    !senders.is_empty()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rule {
    /// Join iff predicted 1 and every neighbor predicted 0.
    Base,
    /// Join iff predicted 1 and every neighbor predicted 1 has a smaller id.
    Init,
}

/// Three-round pruning: exchange predictions, commit the chosen 1s, then
/// their neighbors commit 0.
pub struct Prune {
    id: NodeId,
    rule: Rule,
    pred: bool,
    r: Residual,
    in_set: bool,
}

pub fn build_base(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Prune { id: view.id, rule: Rule::Base, pred: predicted_bit(view), r, in_set: false })
}

pub fn build_init(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Prune { id: view.id, rule: Rule::Init, pred: predicted_bit(view), r, in_set: false })
}

impl NodeProgram for Prune {
    fn compose(&mut self, round: u32) -> Outbox {
        match round {
            1 => broadcast(&self.r.active, Message::Prediction(OutputValue::Bit(self.pred))),
            2 if self.in_set => broadcast(&self.r.active, Message::Join),
            3 if self.r.dominated => broadcast(&self.r.active, Message::Drop),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        match round {
            1 => {
                let bits: BTreeMap<NodeId, bool> = inbox
                    .iter()
                    .filter_map(|(u, m)| match m {
                        Message::Prediction(OutputValue::Bit(b)) => Some((u, *b)),
                        _ => None,
                    })
                    .collect();
                self.in_set = self.pred
                    && match self.rule {
                        Rule::Base => bits.values().all(|b| !b),
                        Rule::Init => bits.iter().all(|(&u, &b)| !b || u < self.id),
                    };
                self.r.neighbor_bits = Some(bits);
                Ok(Step::active())
            }
            2 => {
                if self.in_set {
                    return Ok(one());
                }
                if forget_senders(&mut self.r, inbox, &Message::Join) {
                    self.r.dominated = true;
                }
                Ok(Step::active())
            }
            _ => {
                if self.r.dominated {
                    return Ok(zero());
                }
                forget_senders(&mut self.r, inbox, &Message::Drop);
                Ok(Step::handoff())
            }
        }
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// Greedy MIS. Odd rounds: local extrema by id join and notify. Even rounds:
/// their neighbors output 0 and notify.
pub struct Greedy {
    id: NodeId,
    max: bool,
    r: Residual,
    joining: bool,
}

pub fn build_greedy(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Greedy { id: view.id, max: true, r, joining: false })
}

/// Same as greedy but local minima win.
pub fn build_greedy_min(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Greedy { id: view.id, max: false, r, joining: false })
}

impl NodeProgram for Greedy {
    fn compose(&mut self, round: u32) -> Outbox {
        if round % 2 == 1 {
            let wins = if self.max { self.r.is_local_max(self.id) } else { self.r.is_local_min(self.id) };
            self.joining = !self.r.dominated && wins;
            if self.joining {
                return broadcast(&self.r.active, Message::Join);
            }
        } else if self.r.dominated {
            return broadcast(&self.r.active, Message::Drop);
        }
        Vec::new()
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round % 2 == 1 {
            if self.joining {
                return Ok(one());
            }
            if forget_senders(&mut self.r, inbox, &Message::Join) {
                self.r.dominated = true;
            }
        } else {
            if self.r.dominated {
                return Ok(zero());
            }
            forget_senders(&mut self.r, inbox, &Message::Drop);
        }
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// One round: nodes with a neighbor in the set output 0.
pub struct Cleanup {
    r: Residual,
}

pub fn build_cleanup(_: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Cleanup { r })
}

impl NodeProgram for Cleanup {
    fn compose(&mut self, _: u32) -> Outbox {
        if self.r.dominated {
            broadcast(&self.r.active, Message::Drop)
        } else {
            Vec::new()
        }
    }

    fn process(&mut self, _: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if self.r.dominated {
            return Ok(zero());
        }
        forget_senders(&mut self.r, inbox, &Message::Drop);
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// Greedy phases alternating between predicted-1 and predicted-0 nodes.
/// A node competes only against active neighbors of its own color, but
/// notifies all active neighbors.
pub struct BlackWhite {
    id: NodeId,
    black: bool,
    r: Residual,
    joining: bool,
    /// 1 when the neighbors' predictions must be exchanged first.
    offset: u32,
}

pub fn build_u_bw(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    let offset = u32::from(r.neighbor_bits.is_none());
    Box::new(BlackWhite { id: view.id, black: predicted_bit(view), r, joining: false, offset })
}

impl BlackWhite {
    fn same_color_max(&self) -> bool {
        let bits = self.r.neighbor_bits.as_ref().expect("predictions exchanged");
        self.r.active.iter().filter(|u| bits.get(u) == Some(&self.black)).all(|&u| u < self.id)
    }
}

impl NodeProgram for BlackWhite {
    fn compose(&mut self, round: u32) -> Outbox {
        self.joining = false;
        if round <= self.offset {
            return broadcast(&self.r.active, Message::Prediction(OutputValue::Bit(self.black)));
        }
        let s = round - self.offset - 1;
        let black_turn = (s / 2) % 2 == 0;
        if s % 2 == 0 {
            if self.black == black_turn && !self.r.dominated && self.same_color_max() {
                self.joining = true;
                return broadcast(&self.r.active, Message::Join);
            }
        } else if self.r.dominated {
            return broadcast(&self.r.active, Message::Drop);
        }
        Vec::new()
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round <= self.offset {
            let bits = inbox
                .iter()
                .filter_map(|(u, m)| match m {
                    Message::Prediction(OutputValue::Bit(b)) => Some((u, *b)),
                    _ => None,
                })
                .collect();
            self.r.neighbor_bits = Some(bits);
            return Ok(Step::active());
        }
        let s = round - self.offset - 1;
        if s % 2 == 0 {
            if self.joining {
                return Ok(one());
            }
            if forget_senders(&mut self.r, inbox, &Message::Join) {
                self.r.dominated = true;
            }
        } else {
            if self.r.dominated {
                return Ok(zero());
            }
            forget_senders(&mut self.r, inbox, &Message::Drop);
        }
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// Turns a stored proper (Δ+1)-coloring into an MIS, one color per round.
/// The combined variant also lets local maxima by id join early.
pub struct ColorPart2 {
    id: NodeId,
    combined: bool,
    delta: u32,
    last: u32,
    color: u32,
    r: Residual,
    got_prev: bool,
    joining: bool,
}

fn part2(view: &NodeView, r: Residual, combined: bool) -> Box<dyn NodeProgram> {
    let delta = view.delta() as u32;
    let color = r.color.unwrap_or_else(|| panic!("node {} has no stored color", view.id));
    Box::new(ColorPart2 { id: view.id, combined, delta, last: delta.max(1), color, r, got_prev: false, joining: false })
}

pub fn build_part2(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    part2(view, r, false)
}

pub fn build_part2_combined(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    part2(view, r, true)
}

impl NodeProgram for ColorPart2 {
    fn compose(&mut self, i: u32) -> Outbox {
        self.joining = false;
        if self.got_prev {
            return if i < self.last { broadcast(&self.r.active, Message::Drop) } else { Vec::new() };
        }
        let early = self.combined
            && i < self.delta
            && self.color > i
            // unknown colors count as possibly equal to i
            && self.r.active.iter().all(|u| self.r.neighbor_colors.get(u).is_some_and(|&c| c != i))
            && self.r.is_local_max(self.id);
        if self.color == i || early {
            self.joining = true;
            return broadcast(&self.r.active, Message::Join);
        }
        Vec::new()
    }

    fn process(&mut self, i: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if i == 1 {
            if self.color == 0 || self.color > self.delta + 1 {
                return Err(Fault(format!("stored color {} outside 1..={}", self.color, self.delta + 1)));
            }
            if let Some(u) = self.r.active.iter().find(|u| self.r.neighbor_colors.get(u) == Some(&self.color)) {
                return Err(Fault(format!("stored coloring improper: neighbor {u} shares color {}", self.color)));
            }
        }
        if self.joining {
            if let Some(u) = inbox.senders_of(&Message::Join).next() {
                return Err(Fault(format!("neighbor {u} joined in the same round")));
            }
            return Ok(one());
        }
        if self.got_prev {
            return Ok(zero());
        }
        let got_now = forget_senders(&mut self.r, inbox, &Message::Join);
        forget_senders(&mut self.r, inbox, &Message::Drop);
        if i >= self.last {
            // color Δ+1 joins silently unless a neighbor just joined
            return Ok(if got_now { zero() } else { one() });
        }
        self.got_prev = got_now;
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, EventKind, Knowledge, SimConfig};
    use crate::graph::{arb_graph, extendable, validate, Graph};
    use crate::problem::ProblemKind;
    use crate::programs::testing::{bits, clique, path, run, Custom};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn ext(g: &Graph, p: &BTreeMap<NodeId, OutputValue>) -> Result<(), crate::graph::Violation> {
        extendable(ProblemKind::Mis, g, p)
    }

    fn ones(out: &crate::engine::Outcome) -> BTreeSet<NodeId> {
        out.outputs.iter().filter(|(_, o)| o.bit() == Some(true)).map(|(&v, _)| v).collect()
    }

    #[test]
    fn base_examples() {
        let g = path(3);
        let correct = bits(&g, |v| v != 2);
        let out = run("mis.base", &g, None, Some(&correct)).unwrap();
        assert_eq!(out.total_rounds, 3);
        assert_eq!(out.completed.len(), 3);
        assert_eq!(out.outputs, correct);

        let zeros = bits(&g, |_| false);
        let out = run("mis.base", &g, None, Some(&zeros)).unwrap();
        assert!(out.outputs.is_empty());
        assert_eq!(out.active_after(3).unwrap(), g.node_set());

        let e = path(2);
        let out = run("mis.base", &e, None, Some(&bits(&e, |_| true))).unwrap();
        assert!(out.outputs.is_empty());
    }

    #[test]
    fn init_examples() {
        let g = Graph::new(7, [3, 7], [(3, 7)]).unwrap();
        let out = run("mis.init", &g, None, Some(&bits(&g, |_| true))).unwrap();
        assert_eq!(out.outputs[&7], OutputValue::Bit(true));
        assert_eq!(out.outputs[&3], OutputValue::Bit(false));

        let t = Graph::new(9, [2, 5, 9], [(2, 5), (2, 9), (5, 9)]).unwrap();
        let out = run("mis.init", &t, None, Some(&bits(&t, |_| true))).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([9]));
        assert_eq!(out.completed.len(), 3);
    }

    #[test]
    fn greedy_examples() {
        let out = run("mis.greedy", &path(5), None, None).unwrap();
        assert_eq!(out.total_rounds, 5);
        assert_eq!(ones(&out), BTreeSet::from([1, 3, 5]));
        let out = run("mis.greedy", &clique(6), None, None).unwrap();
        assert_eq!(out.total_rounds, 2);
        let out = run("mis.greedy", &Graph::new(1, [1], []).unwrap(), None, None).unwrap();
        assert_eq!((out.total_rounds, ones(&out)), (1, BTreeSet::from([1])));
        let out = run("mis.greedy_min", &path(5), None, None).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([1, 3, 5]));
        assert_eq!(out.total_rounds, 5);
    }

    #[test]
    fn cleanup_examples() {
        // star with the center holding the largest id: one greedy round
        // puts it in the set, then cleanup settles every leaf
        let star = Graph::new(7, 1..=7, (1..=6).map(|v| (v, 7))).unwrap();
        let f = Custom {
            problem: ProblemKind::Mis,
            knowledge: Knowledge::NONE,
            predictions: None,
            build: |v: &NodeView| -> Box<dyn NodeProgram> {
                Box::new(Staged { stages: vec![(build_greedy, 1), (build_cleanup, 1)], view: v.clone(), cur: None, t: 0 })
            },
        };
        let out = simulate(&star, None, &f, None, &SimConfig::default()).unwrap();
        assert_eq!(out.total_rounds, 2);
        assert_eq!(out.completed.len(), 7);
        assert!(validate(ProblemKind::Mis, &star, &out.outputs).is_ok());

        // with nothing decided, cleanup is a no-op round
        let out = run("mis.cleanup", &path(3), None, None).unwrap();
        assert_eq!(out.total_rounds, 1);
        assert!(out.outputs.is_empty());
    }

    /// Minimal sequential composition for tests.
    struct Staged {
        stages: Vec<(super::super::Builder, u32)>,
        view: NodeView,
        cur: Option<Box<dyn NodeProgram>>,
        t: u32,
    }
    impl NodeProgram for Staged {
        fn compose(&mut self, _: u32) -> Outbox {
            if self.cur.is_none() {
                self.cur = Some((self.stages[0].0)(&self.view, Residual::fresh(&self.view, ProblemKind::Mis), Mode::Output));
            }
            self.t += 1;
            self.cur.as_mut().unwrap().compose(self.t)
        }
        fn process(&mut self, _: u32, inbox: &Inbox) -> Result<Step, Fault> {
            let mut step = self.cur.as_mut().unwrap().process(self.t, inbox)?;
            if step.status == crate::engine::Status::Active && self.t == self.stages[0].1 {
                let r = self.cur.as_ref().unwrap().residual();
                self.stages.remove(0);
                if self.stages.is_empty() {
                    step.status = crate::engine::Status::Handoff;
                } else {
                    self.cur = Some((self.stages[0].0)(&self.view, r, Mode::Output));
                    self.t = 0;
                }
            }
            Ok(step)
        }
    }

    fn run_part2(g: &Graph, colors: &[(NodeId, u32)], combined: bool) -> Result<crate::engine::Outcome, crate::engine::SimError> {
        let colors: BTreeMap<NodeId, u32> = colors.iter().copied().collect();
        let f = Custom {
            problem: ProblemKind::Mis,
            knowledge: Knowledge { max_degree: true, ..Knowledge::NONE },
            predictions: None,
            build: move |v: &NodeView| -> Box<dyn NodeProgram> {
                let mut r = Residual::fresh(v, ProblemKind::Mis);
                r.color = Some(colors[&v.id]);
                r.neighbor_colors = v.neighbors.iter().map(|u| (*u, colors[u])).collect();
                part2(v, r, combined)
            },
        };
        simulate(g, None, &f, None, &SimConfig { trace: true, ..Default::default() })
    }

    #[test]
    fn part2_examples() {
        let k = clique(4);
        let out = run_part2(&k, &[(1, 3), (2, 1), (3, 4), (4, 2)], false).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([2]));
        assert_eq!(out.term_round[&2], 1);
        let single = Graph::new(1, [1], []).unwrap();
        let out = run_part2(&single, &[(1, 1)], false).unwrap();
        assert_eq!((out.total_rounds, ones(&out)), (1, BTreeSet::from([1])));
        let p = path(3);
        let out = run_part2(&p, &[(1, 1), (2, 2), (3, 1)], false).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([1, 3]));
        assert_eq!(out.term_round[&1], 1);
        assert!(run_part2(&p, &[(1, 1), (2, 1), (3, 2)], false).is_err());
    }

    #[test]
    fn part2_last_color_joins_silently() {
        // path 1-2-3 with Δ = 2, so color 3 is the silent class
        let p = path(3);
        let out = run_part2(&p, &[(1, 2), (2, 3), (3, 2)], false).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([1, 3]));
        let out = run_part2(&p, &[(1, 1), (2, 3), (3, 1)], false).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([1, 3]));
        let out = run_part2(&p, &[(1, 3), (2, 1), (3, 3)], false).unwrap();
        assert_eq!(ones(&out), BTreeSet::from([2]));
        // the Δ+1 node sends nothing in the last round
        let t = out.trace.unwrap();
        assert!(!t.events.iter().any(|e| e.round == 2 && matches!(e.kind, EventKind::Send { .. })));
    }

    #[test]
    fn greedy_even_rounds_zero_iff_neighbor_of_one() {
        for seed in 0..30 {
            let inst = crate::graph::generate(
                crate::graph::Family::Random { n: 14, p: 0.3, connected: false },
                crate::graph::IdScheme::SeededPermutation,
                Some(100),
                seed,
            )
            .unwrap();
            let g = &inst.graph;
            let out = run("mis.greedy", g, None, None).unwrap();
            let t = out.trace.unwrap();
            for r in (2..=out.total_rounds).step_by(2) {
                let partial = t.outputs_at(r);
                for v in g.nodes() {
                    let nb1 = g.neighbors(v).iter().any(|u| partial.get(u) == Some(&OutputValue::Bit(true)));
                    assert_eq!(partial.get(&v) == Some(&OutputValue::Bit(false)), nb1, "seed {seed} round {r} node {v}");
                }
                assert!(ext(g, &partial).is_ok());
            }
        }
    }

    proptest! {
        #[test]
        fn greedy_and_variants_produce_mis(g in arb_graph(12)) {
            for name in ["mis.greedy", "mis.greedy_min"] {
                let out = run(name, &g, None, None).unwrap();
                prop_assert!(validate(ProblemKind::Mis, &g, &out.outputs).is_ok());
            }
        }

        #[test]
        fn init_contains_base(g in arb_graph(12), mask in any::<u16>()) {
            let p = bits(&g, |v| mask >> (v - 1) & 1 == 1);
            let base = run("mis.base", &g, None, Some(&p)).unwrap();
            let init = run("mis.init", &g, None, Some(&p)).unwrap();
            for (v, o) in &base.outputs {
                prop_assert_eq!(init.outputs.get(v), Some(o));
            }
            prop_assert!(ext(&g, &init.outputs).is_ok());
            prop_assert!(ext(&g, &base.outputs).is_ok());
        }

        #[test]
        fn greedy_makes_steady_progress(g in arb_graph(12)) {
            use crate::measures::{mu1, mu2};
            for name in ["mis.greedy", "mis.greedy_min"] {
                let out = run(name, &g, None, None).unwrap();
                for c in g.components() {
                    let (m1, m2) = (mu1(&c), mu2(&c).unwrap() + 1);
                    for r in 1..=out.total_rounds {
                        let left: BTreeSet<NodeId> =
                            out.active_after(r).unwrap().into_iter().filter(|&v| c.contains(v)).collect();
                        for s in g.induced_subgraph(&left).unwrap().components() {
                            prop_assert!(r as usize + mu1(&s) <= m1 + 2, "{name} round {r}: mu1");
                            prop_assert!(r as usize + mu2(&s).unwrap() + 1 <= m2 + 2, "{name} round {r}: mu2");
                        }
                    }
                }
            }
        }

        #[test]
        fn combined_part2_is_valid(g in arb_graph(10)) {
            // greedy coloring by id as the stored coloring
            let mut colors = BTreeMap::new();
            for v in g.nodes() {
                let used: BTreeSet<u32> = g.neighbors(v).iter().filter_map(|u| colors.get(u).copied()).collect();
                colors.insert(v, (1..).find(|c| !used.contains(c)).unwrap());
            }
            let cs: Vec<(NodeId, u32)> = colors.into_iter().collect();
            for combined in [false, true] {
                let out = run_part2(&g, &cs, combined).unwrap();
                prop_assert!(validate(ProblemKind::Mis, &g, &out.outputs).is_ok());
                prop_assert!(out.total_rounds <= g.max_degree().max(1) as u32);
            }
        }
    }
}
