//! Maximal matching stages.

use super::{Mode, Residual};
use crate::engine::{Assignment, Fault, Inbox, Message, NodeProgram, NodeView, Outbox, Step};
use crate::graph::NodeId;
use crate::problem::OutputValue;

fn matched(p: NodeId) -> Step {
    Step::done(vec![Assignment::Partner(Some(p))])
}

fn unmatched() -> Step {
    Step::done(vec![Assignment::Partner(None)])
}

/// Tells every other active neighbor that this node is taken.
fn announce(r: &Residual) -> Outbox {
    let p = r.matched_to.expect("announce without partner");
    r.active.iter().filter(|&&u| u != p).map(|&u| (u, Message::Matched)).collect()
}

fn forget_matched(r: &mut Residual, inbox: &Inbox) {
    for u in inbox.senders_of(&Message::Matched).collect::<Vec<_>>() {
        r.forget(u);
    }
}

/// Two rounds: exchange predictions, then mutual pairs commit and notify.
pub struct Prune {
    id: NodeId,
    /// Whether a node predicting a partner may still output ⊥.
    relaxed: bool,
    pred: Option<NodeId>,
    r: Residual,
}

fn predicted_partner(view: &NodeView) -> Option<NodeId> {
    match view.prediction {
        Some(OutputValue::Partner(p)) => p,
        _ => panic!("node {} has no matching prediction", view.id),
    }
}

pub fn build_base(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Prune { id: view.id, relaxed: false, pred: predicted_partner(view), r })
}

pub fn build_init(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Prune { id: view.id, relaxed: true, pred: predicted_partner(view), r })
}

impl NodeProgram for Prune {
    fn compose(&mut self, round: u32) -> Outbox {
        match round {
            1 => super::broadcast(&self.r.active, Message::Prediction(OutputValue::Partner(self.pred))),
            2 if self.r.matched_to.is_some() => announce(&self.r),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round == 1 {
            if let Some(j) = self.pred {
                if inbox.get(j) == Some(&Message::Prediction(OutputValue::Partner(Some(self.id)))) {
                    self.r.matched_to = Some(j);
                }
            }
            return Ok(Step::active());
        }
        if let Some(p) = self.r.matched_to {
            return Ok(matched(p));
        }
        forget_matched(&mut self.r, inbox);
        if self.r.active.is_empty() && (self.relaxed || self.pred.is_none()) {
            return Ok(unmatched());
        }
        Ok(Step::handoff())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// Groups of three rounds: local maxima propose to their smallest active
/// neighbor, each proposee accepts its largest proposer, then matched nodes
/// notify and terminate.
pub struct Uniform {
    id: NodeId,
    r: Residual,
    proposers: Vec<NodeId>,
}

pub fn build_uniform(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Uniform { id: view.id, r, proposers: Vec::new() })
}

impl NodeProgram for Uniform {
    fn compose(&mut self, round: u32) -> Outbox {
        match (round - 1) % 3 {
            0 if self.r.matched_to.is_none() && self.r.is_local_max(self.id) => {
                self.r.active.first().map(|&u| vec![(u, Message::Propose)]).unwrap_or_default()
            }
            1 => match self.proposers.iter().max() {
                Some(&u) => {
                    self.r.matched_to = Some(u);
                    vec![(u, Message::Accept)]
                }
                None => Vec::new(),
            },
            2 if self.r.matched_to.is_some() => announce(&self.r),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        match (round - 1) % 3 {
            0 => {
                if self.r.active.is_empty() && self.r.matched_to.is_none() {
                    return Ok(unmatched());
                }
                self.proposers = inbox.senders_of(&Message::Propose).collect();
            }
            1 => {
                self.proposers.clear();
                if let Some(u) = inbox.senders_of(&Message::Accept).next() {
                    self.r.matched_to = Some(u);
                }
            }
            _ => {
                if let Some(p) = self.r.matched_to {
                    return Ok(matched(p));
                }
                forget_matched(&mut self.r, inbox);
                if self.r.active.is_empty() {
                    return Ok(unmatched());
                }
            }
        }
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// One round: pending matches are announced and output.
pub struct Cleanup {
    r: Residual,
}

pub fn build_cleanup(_: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Cleanup { r })
}

impl NodeProgram for Cleanup {
    fn compose(&mut self, _: u32) -> Outbox {
        if self.r.matched_to.is_some() {
            announce(&self.r)
        } else {
            Vec::new()
        }
    }

    fn process(&mut self, _: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if let Some(p) = self.r.matched_to {
            return Ok(matched(p));
        }
        forget_matched(&mut self.r, inbox);
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, SimConfig};
    use crate::graph::{extendable, generate, validate, Family, Graph, IdScheme};
    use crate::problem::ProblemKind;
    use crate::programs::testing::{path, run, Custom};
    use crate::programs::Standalone;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn partners(pairs: &[(NodeId, Option<NodeId>)]) -> BTreeMap<NodeId, OutputValue> {
        pairs.iter().map(|&(v, p)| (v, OutputValue::Partner(p))).collect()
    }

    #[test]
    fn base_with_correct_predictions_takes_two_rounds() {
        let g = path(5);
        let p = partners(&[(1, Some(2)), (2, Some(1)), (3, None), (4, Some(5)), (5, Some(4))]);
        let out = run("mm.base", &g, None, Some(&p)).unwrap();
        assert_eq!(out.outputs, p);
        assert_eq!(out.total_rounds, 2);
        assert!(out.undecided().is_empty());
    }

    #[test]
    fn one_sided_prediction_commits_nothing() {
        let g = path(2);
        let p = partners(&[(1, Some(2)), (2, None)]);
        let out = run("mm.base", &g, None, Some(&p)).unwrap();
        assert!(out.outputs.is_empty());
        // init is no different here, neither node has a matched neighbor
        let out = run("mm.init", &g, None, Some(&p)).unwrap();
        assert!(out.outputs.is_empty());
    }

    #[test]
    fn isolated_node_outputs_bottom() {
        let g = Graph::new(1, [1], []).unwrap();
        let p = partners(&[(1, None)]);
        assert_eq!(run("mm.base", &g, None, Some(&p)).unwrap().outputs, p);
        assert_eq!(run("mm.uniform", &g, None, None).unwrap().total_rounds, 1);
    }

    #[test]
    fn init_outputs_bottom_despite_prediction() {
        // 3 predicts 2, but 2 is matched to 1
        let g = path(3);
        let p = partners(&[(1, Some(2)), (2, Some(1)), (3, Some(2))]);
        let base = run("mm.base", &g, None, Some(&p)).unwrap();
        assert!(!base.outputs.contains_key(&3));
        let init = run("mm.init", &g, None, Some(&p)).unwrap();
        assert_eq!(init.outputs[&3], OutputValue::Partner(None));
    }

    #[test]
    fn uniform_examples() {
        let out = run("mm.uniform", &path(2), None, None).unwrap();
        assert_eq!(out.total_rounds, 3);
        assert!(validate(ProblemKind::MaximalMatching, &path(2), &out.outputs).is_ok());

        let out = run("mm.uniform", &path(3), None, None).unwrap();
        assert!(out.total_rounds <= 3);
        let bottoms = out.outputs.values().filter(|o| **o == OutputValue::Partner(None)).count();
        assert_eq!(bottoms, 1);
        assert!(validate(ProblemKind::MaximalMatching, &path(3), &out.outputs).is_ok());
    }

    #[test]
    fn uniform_on_increasing_line_is_slow() {
        for n in [51u32, 101] {
            let out = run("mm.uniform", &path(n), None, None).unwrap();
            assert!(f64::from(out.total_rounds) >= f64::from(n - 3) / 2.0);
            assert!(out.total_rounds <= 3 * (n / 2));
        }
    }

    #[test]
    fn cleanup_is_a_noop_without_pending_matches() {
        let out = run("mm.cleanup", &path(4), None, None).unwrap();
        assert!(out.outputs.is_empty());
        assert_eq!(out.total_rounds, 1);
    }

    #[test]
    fn cleanup_announces_a_matched_center() {
        // star with center 1 matched to 2 but not yet announced
        let g = Graph::new(4, 1..=4, [(1, 2), (1, 3), (1, 4)]).unwrap();
        let f = Custom {
            problem: ProblemKind::MaximalMatching,
            knowledge: crate::engine::Knowledge::NONE,
            predictions: None,
            build: |v: &NodeView| {
                let mut r = Residual::fresh(v, ProblemKind::MaximalMatching);
                r.matched_to = match v.id {
                    1 => Some(2),
                    2 => Some(1),
                    _ => None,
                };
                Box::new(crate::programs::Bounded { inner: build_cleanup(v, r, Mode::Output), len: Some(1) })
                    as Box<dyn NodeProgram>
            },
        };
        let out = simulate(&g, None, &f, None, &SimConfig { trace: true, ..Default::default() }).unwrap();
        assert_eq!(out.outputs, partners(&[(1, Some(2)), (2, Some(1))]));
        let sends = out.trace.unwrap().dump();
        assert!(sends.contains("1,1,SEND,3:matched"));
        assert!(sends.contains("1,1,SEND,4:matched"));
        assert!(extendable(ProblemKind::MaximalMatching, &g, &out.outputs).is_ok());
    }

    fn s_bound(s: usize) -> u32 {
        if s < 2 {
            1
        } else {
            3 * (s as u32 / 2)
        }
    }

    proptest! {
        #[test]
        fn uniform_is_maximal_within_bound(seed in 0u64..10_000, n in 1usize..15) {
            let inst = generate(Family::Random { n, p: 0.3, connected: true }, IdScheme::SeededPermutation, Some(1000), seed).unwrap();
            let f = Standalone::named("mm.uniform").unwrap();
            let out = simulate(&inst.graph, None, &f, None, &SimConfig::default()).unwrap();
            prop_assert!(validate(ProblemKind::MaximalMatching, &inst.graph, &out.outputs).is_ok());
            prop_assert!(out.total_rounds <= s_bound(n));
        }

        #[test]
        fn init_contains_base(g in crate::graph::arb_graph(10), choice in proptest::collection::vec(0usize..4, 10)) {
            let nodes: Vec<NodeId> = g.nodes().collect();
            let p: BTreeMap<NodeId, OutputValue> = nodes.iter().enumerate().map(|(i, &v)| {
                let nb = g.neighbors(v);
                let c = choice[i % choice.len()];
                (v, OutputValue::Partner(if c < nb.len() { Some(nb[c]) } else { None }))
            }).collect();
            let base = run("mm.base", &g, None, Some(&p)).unwrap();
            let init = run("mm.init", &g, None, Some(&p)).unwrap();
            prop_assert!(extendable(ProblemKind::MaximalMatching, &g, &base.outputs).is_ok());
            prop_assert!(extendable(ProblemKind::MaximalMatching, &g, &init.outputs).is_ok());
            for (v, o) in &base.outputs {
                prop_assert_eq!(init.outputs.get(v), Some(o));
            }
        }
    }
}
