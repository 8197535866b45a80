//! (2Δ−1)-edge coloring stages.
//!
//! `Residual::active` holds the neighbors across uncolored edges, each with
//! its own palette in `edge_palettes`. Both endpoints of an uncolored edge
//! keep the same palette at phase boundaries.

use super::{Mode, Residual};
use crate::engine::{Assignment, Fault, Inbox, Message, NodeProgram, NodeView, Outbox, Step};
use crate::graph::NodeId;
use crate::problem::OutputValue;
use std::collections::{BTreeMap, BTreeSet};

/// Records a colored edge and strikes the color from the other palettes.
fn commit(r: &mut Residual, u: NodeId, c: u32) {
    r.forget(u);
    r.used_colors.insert(c);
    r.unannounced.insert(c);
    for pal in r.edge_palettes.values_mut() {
        pal.remove(&c);
    }
}

/// Per uncolored edge: colors output here, and this node's other uncolored
/// neighbors.
fn info(r: &Residual, colors: &BTreeSet<u32>) -> Outbox {
    r.active
        .iter()
        .map(|&u| {
            let others = r.active.iter().copied().filter(|&w| w != u).collect();
            (u, Message::EdgeInfo { used: colors.iter().copied().collect(), uncolored: others })
        })
        .collect()
}

fn absorb_info(r: &mut Residual, inbox: &Inbox) {
    for (u, m) in inbox.iter() {
        if let Message::EdgeInfo { used, uncolored } = m {
            if let Some(pal) = r.edge_palettes.get_mut(&u) {
                for c in used {
                    pal.remove(c);
                }
            }
            if r.active.contains(&u) {
                r.two_hop.insert(u, uncolored.iter().copied().collect());
            }
        }
    }
}

fn finish_or_continue(r: &Residual) -> Step {
    if r.active.is_empty() {
        Step::done(Vec::new())
    } else {
        Step::active()
    }
}

fn palettes_ok(r: &Residual) -> Result<(), Fault> {
    for &u in &r.active {
        let pal = r.edge_palettes.get(&u).map_or(0, BTreeSet::len);
        let adjacent = r.active.len() - 1 + r.two_hop.get(&u).map_or(0, BTreeSet::len);
        if pal <= adjacent {
            return Err(Fault(format!("palette of edge to {u} has {pal} colors for {adjacent} adjacent edges")));
        }
    }
    Ok(())
}

/// Round 1 commits mutually predicted colors that are unique at both
/// endpoints. Round 2 exchanges used colors and uncolored neighbors.
pub struct Prune {
    pred: BTreeMap<NodeId, u32>,
    r: Residual,
    offered: BTreeMap<NodeId, u32>,
}

pub fn build_base(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    let pred = match &view.prediction {
        Some(OutputValue::EdgeColors(m)) => m.clone(),
        _ => panic!("node {} has no edge color prediction", view.id),
    };
    Box::new(Prune { pred, r, offered: BTreeMap::new() })
}

impl NodeProgram for Prune {
    fn compose(&mut self, round: u32) -> Outbox {
        match round {
            1 => {
                let mut count: BTreeMap<u32, usize> = BTreeMap::new();
                for &c in self.pred.values() {
                    *count.entry(c).or_default() += 1;
                }
                self.offered = self.pred.iter().filter(|(_, c)| count[*c] == 1).map(|(&u, &c)| (u, c)).collect();
                self.offered.iter().map(|(&u, &c)| (u, Message::EdgeColor(c))).collect()
            }
            2 => {
                let used = self.r.unannounced.clone();
                self.r.unannounced.clear();
                info(&self.r, &used)
            }
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round == 1 {
            let mut outputs = Vec::new();
            for (&u, &c) in &self.offered {
                if inbox.get(u) == Some(&Message::EdgeColor(c)) {
                    outputs.push(Assignment::Edge(u, c));
                }
            }
            for a in &outputs {
                if let Assignment::Edge(u, c) = a {
                    commit(&mut self.r, *u, *c);
                }
            }
            let mut step = finish_or_continue(&self.r);
            step.outputs = outputs;
            return Ok(step);
        }
        absorb_info(&mut self.r, inbox);
        palettes_ok(&self.r)?;
        Ok(Step::handoff())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn finished_at_start(&self) -> bool {
        self.r.active.is_empty()
    }
}

/// Odd rounds: a node whose id beats everyone within two uncolored edges
/// colors all its edges. Even rounds: new colors and edge states are passed
/// to the remaining neighbors.
pub struct Uniform {
    id: NodeId,
    r: Residual,
    choice: Option<Result<BTreeMap<NodeId, u32>, NodeId>>,
}

pub fn build_uniform(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Uniform { id: view.id, r, choice: None })
}

impl Uniform {
    fn wins(&self) -> bool {
        self.r.is_local_max(self.id) && self.r.two_hop.values().flatten().all(|&w| w < self.id)
    }

    /// Smallest-first distinct colors, in neighbor order; `Err` names an
    /// edge whose palette ran out.
    fn pick(&self) -> Result<BTreeMap<NodeId, u32>, NodeId> {
        let mut taken = BTreeSet::new();
        let mut out = BTreeMap::new();
        for &u in &self.r.active {
            let c = self.r.edge_palettes.get(&u).and_then(|p| p.iter().find(|c| !taken.contains(*c))).ok_or(u)?;
            taken.insert(*c);
            out.insert(u, *c);
        }
        Ok(out)
    }
}

impl NodeProgram for Uniform {
    fn compose(&mut self, round: u32) -> Outbox {
        self.choice = None;
        if round % 2 == 1 {
            if !self.r.active.is_empty() && self.wins() {
                let choice = self.pick();
                let out = match &choice {
                    Ok(m) => m.iter().map(|(&u, &c)| (u, Message::EdgeColor(c))).collect(),
                    Err(_) => Vec::new(),
                };
                self.choice = Some(choice);
                return out;
            }
            Vec::new()
        } else if !self.r.unannounced.is_empty() {
            let used = std::mem::take(&mut self.r.unannounced);
            info(&self.r, &used)
        } else {
            Vec::new()
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round % 2 == 0 {
            absorb_info(&mut self.r, inbox);
            return Ok(Step::active());
        }
        match self.choice.take() {
            Some(Ok(m)) => return Ok(Step::done(m.into_iter().map(|(u, c)| Assignment::Edge(u, c)).collect())),
            Some(Err(u)) => return Err(Fault(format!("EMPTY_PALETTE on edge to {u}"))),
            None => {}
        }
        let mut outputs = Vec::new();
        for (u, m) in inbox.iter() {
            if let Message::EdgeColor(c) = m {
                if !self.r.active.contains(&u) {
                    return Err(Fault(format!("color {c} for an edge to {u} that is not uncolored")));
                }
                commit(&mut self.r, u, *c);
                outputs.push(Assignment::Edge(u, *c));
            }
        }
        let mut step = finish_or_continue(&self.r);
        step.outputs = outputs;
        Ok(step)
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn check_invariants(&self) -> Result<(), Fault> {
        if self.r.active.iter().any(|u| self.r.edge_palettes.get(u).is_none_or(BTreeSet::is_empty)) {
            return Err(Fault("EMPTY_PALETTE".into()));
        }
        Ok(())
    }

    fn finished_at_start(&self) -> bool {
        self.r.active.is_empty()
    }
}

/// One round: output colors are sent along the uncolored edges.
pub struct Cleanup {
    r: Residual,
}

pub fn build_cleanup(_: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Cleanup { r })
}

impl NodeProgram for Cleanup {
    fn compose(&mut self, _: u32) -> Outbox {
        self.r.unannounced.clear();
        if self.r.used_colors.is_empty() {
            return Vec::new();
        }
        info(&self.r, &self.r.used_colors)
    }

    fn process(&mut self, _: u32, inbox: &Inbox) -> Result<Step, Fault> {
        absorb_info(&mut self.r, inbox);
        Ok(finish_or_continue(&self.r))
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn finished_at_start(&self) -> bool {
        self.r.active.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{extendable, generate, validate, Family, Graph, IdScheme};
    use crate::problem::ProblemKind;
    use crate::programs::testing::{path, run};
    use proptest::prelude::*;

    fn edge_pred(g: &Graph, color: impl Fn(NodeId, NodeId) -> u32) -> BTreeMap<NodeId, OutputValue> {
        g.nodes()
            .map(|v| {
                let m = g.neighbors(v).iter().map(|&u| (u, color(u.min(v), u.max(v)))).collect();
                (v, OutputValue::EdgeColors(m))
            })
            .collect()
    }

    #[test]
    fn correct_predictions_finish_in_one_round() {
        let g = path(5);
        let p = edge_pred(&g, |u, _| 1 + u % 2);
        let out = run("ec.base", &g, None, Some(&p)).unwrap();
        assert_eq!(out.outputs, p);
        assert_eq!(out.total_rounds, 1);
    }

    #[test]
    fn clashing_predictions_are_not_committed() {
        // both edges at 2 predicted color 1
        let g = path(3);
        let p = edge_pred(&g, |_, _| 1);
        let out = run("ec.base", &g, None, Some(&p)).unwrap();
        assert!(out.outputs.is_empty());
        assert_eq!(out.total_rounds, 2);
    }

    #[test]
    fn single_edge() {
        let g = path(2);
        let p = edge_pred(&g, |_, _| 1);
        assert_eq!(run("ec.base", &g, None, Some(&p)).unwrap().total_rounds, 1);
        let out = run("ec.uniform", &g, None, None).unwrap();
        assert_eq!(out.total_rounds, 1);
        assert!(validate(ProblemKind::EdgeColoring, &g, &out.outputs).is_ok());
    }

    #[test]
    fn star_center_colors_everything() {
        let g = Graph::new(5, 1..=5, [(5, 1), (5, 2), (5, 3), (5, 4)]).unwrap();
        let out = run("ec.uniform", &g, None, None).unwrap();
        assert_eq!(out.total_rounds, 1);
        assert_eq!(out.term_round[&5], 1);
        let colors: BTreeSet<u32> = out.outputs[&5].edge_colors().unwrap().values().copied().collect();
        assert_eq!(colors.len(), 4);
    }

    #[test]
    fn lone_node_takes_no_rounds() {
        let g = Graph::new(1, [1], []).unwrap();
        let out = run("ec.uniform", &g, None, None).unwrap();
        assert_eq!(out.total_rounds, 0);
        assert!(out.outputs.is_empty());
    }

    #[test]
    fn base_hands_over_consistent_palettes() {
        // 2-3 mutually predicted 2; 1-2 and 3-4 clash with it
        let g = path(4);
        let p = edge_pred(&g, |_, _| 2);
        let mut p2 = p.clone();
        for (v, u, c) in [(1, 2, 1), (2, 1, 1)] {
            if let OutputValue::EdgeColors(m) = p2.get_mut(&v).unwrap() {
                m.insert(u, c);
            }
        }
        let out = run("ec.base", &g, None, Some(&p2)).unwrap();
        assert!(extendable(ProblemKind::EdgeColoring, &g, &out.outputs).is_ok());
        assert_eq!(out.outputs[&1].edge_colors().unwrap()[&2], 1);
    }

    #[test]
    fn cleanup_spreads_output_colors() {
        let g = path(3);
        let out = run("ec.cleanup", &g, None, None).unwrap();
        assert!(out.outputs.is_empty());
        assert_eq!(out.total_rounds, 1);
    }

    proptest! {
        #[test]
        fn uniform_is_proper_within_bound(seed in 0u64..10_000, n in 1usize..15) {
            let inst = generate(Family::Random { n, p: 0.3, connected: true }, IdScheme::SeededPermutation, Some(1000), seed).unwrap();
            let out = run("ec.uniform", &inst.graph, None, None).unwrap();
            let v = validate(ProblemKind::EdgeColoring, &inst.graph, &out.outputs);
            prop_assert!(v.is_ok(), "{:?} {:?} {:?}", v, inst.graph, out.outputs);
            prop_assert!(out.total_rounds <= (2 * n as u32).saturating_sub(3));
        }

        #[test]
        fn base_output_is_extendable(g in crate::graph::arb_graph(9), cs in proptest::collection::vec(1u32..6, 40)) {
            let limit = (2 * g.max_degree() as u32).saturating_sub(1u32).max(1);
            let p = edge_pred(&g, |u, v| 1 + cs[(u as usize * 7 + v as usize) % cs.len()] % limit);
            let out = run("ec.base", &g, None, Some(&p)).unwrap();
            prop_assert!(extendable(ProblemKind::EdgeColoring, &g, &out.outputs).is_ok());
        }
    }
}
