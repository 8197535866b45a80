//! (Δ+1)-vertex coloring stages.

use super::{broadcast, Mode, Residual};
use crate::engine::{Assignment, Fault, Inbox, Message, NodeProgram, NodeView, Outbox, Step};
use crate::graph::NodeId;
use crate::problem::OutputValue;

/// Removes announced colors from the palette and their senders from the
/// active set.
fn absorb(r: &mut Residual, inbox: &Inbox) {
    for (u, m) in inbox.iter() {
        if let Message::Color(c) = m {
            r.palette.remove(&(*c as u32));
            r.forget(u);
        }
    }
}

fn palette_ok(r: &Residual) -> Result<(), Fault> {
    if r.palette.len() > r.active.len() {
        Ok(())
    } else {
        Err(Fault(format!("palette {:?} too small for {} active neighbors", r.palette, r.active.len())))
    }
}

/// Two rounds: exchange predictions, then the chosen nodes commit and notify.
pub struct Prune {
    id: NodeId,
    /// Conflicts with smaller ids are ignored.
    by_id: bool,
    pred: u32,
    r: Residual,
    commit: bool,
}

fn predicted_color(view: &NodeView) -> u32 {
    match view.prediction {
        Some(OutputValue::Color(c)) => c,
        _ => panic!("node {} has no color prediction", view.id),
    }
}

pub fn build_base(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Prune { id: view.id, by_id: false, pred: predicted_color(view), r, commit: false })
}

pub fn build_init(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Prune { id: view.id, by_id: true, pred: predicted_color(view), r, commit: false })
}

impl NodeProgram for Prune {
    fn compose(&mut self, round: u32) -> Outbox {
        match round {
            1 => broadcast(&self.r.active, Message::Prediction(OutputValue::Color(self.pred))),
            2 if self.commit => broadcast(&self.r.active, Message::Color(u64::from(self.pred))),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round == 1 {
            let same = inbox
                .iter()
                .filter(|(_, m)| **m == Message::Prediction(OutputValue::Color(self.pred)))
                .map(|(u, _)| u);
            self.commit = if self.by_id { same.into_iter().all(|u| u < self.id) } else { same.count() == 0 };
            self.commit &= self.r.palette.contains(&self.pred);
            return Ok(Step::active());
        }
        if self.commit {
            return Ok(Step::done(vec![Assignment::Color(self.pred)]));
        }
        absorb(&mut self.r, inbox);
        Ok(Step::handoff())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn check_invariants(&self) -> Result<(), Fault> {
        palette_ok(&self.r)
    }
}

/// Each round, local maxima take their smallest palette color.
pub struct Uniform {
    id: NodeId,
    r: Residual,
    chosen: Option<u32>,
}

pub fn build_uniform(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(Uniform { id: view.id, r, chosen: None })
}

impl NodeProgram for Uniform {
    fn compose(&mut self, _: u32) -> Outbox {
        self.chosen = None;
        if self.r.is_local_max(self.id) {
            self.chosen = self.r.palette.first().copied();
            if let Some(c) = self.chosen {
                return broadcast(&self.r.active, Message::Color(u64::from(c)));
            }
        }
        Vec::new()
    }

    fn process(&mut self, _: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if self.r.is_local_max(self.id) {
            return match self.chosen {
                Some(c) => Ok(Step::done(vec![Assignment::Color(c)])),
                None => Err(Fault("EMPTY_PALETTE".into())),
            };
        }
        absorb(&mut self.r, inbox);
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn check_invariants(&self) -> Result<(), Fault> {
        palette_ok(&self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{extendable, generate, validate, Family, Graph, IdScheme};
    use crate::problem::ProblemKind;
    use crate::programs::testing::{clique, path, run};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn colors(g: &Graph, f: impl Fn(NodeId) -> u32) -> BTreeMap<NodeId, OutputValue> {
        g.nodes().map(|v| (v, OutputValue::Color(f(v)))).collect()
    }

    #[test]
    fn base_with_correct_predictions() {
        let g = path(5);
        let p = colors(&g, |v| 1 + v % 2);
        let out = run("vc.base", &g, None, Some(&p)).unwrap();
        assert_eq!(out.outputs, p);
        assert_eq!(out.total_rounds, 2);
    }

    #[test]
    fn init_breaks_ties_by_id() {
        let g = Graph::new(7, [3, 7], [(3, 7)]).unwrap();
        let p = colors(&g, |_| 2);
        let base = run("vc.base", &g, None, Some(&p)).unwrap();
        assert!(base.outputs.is_empty());
        let out = run("vc.init", &g, None, Some(&p)).unwrap();
        assert_eq!(out.outputs, BTreeMap::from([(7, OutputValue::Color(2))]));

        // node 3 drives its own stage and keeps the rest of its palette
        let view = NodeView {
            id: 3,
            neighbors: vec![7],
            n: None,
            d: None,
            max_degree: Some(1),
            parent: None,
            prediction: Some(OutputValue::Color(2)),
            two_hop: None,
        };
        let mut node = build_init(&view, Residual::fresh(&view, ProblemKind::VertexColoring), Mode::Output);
        node.compose(1);
        let heard = Inbox::new(vec![(7, Message::Prediction(OutputValue::Color(2)))]);
        node.process(1, &heard).unwrap();
        node.compose(2);
        let step = node.process(2, &Inbox::new(vec![(7, Message::Color(2))])).unwrap();
        assert_eq!(step, Step::handoff());
        let after = node.residual();
        assert_eq!(after.palette.iter().copied().collect::<Vec<_>>(), vec![1]);
        assert!(after.active.is_empty());
    }

    #[test]
    fn isolated_node_outputs_prediction() {
        let g = Graph::new(1, [1], []).unwrap();
        let p = colors(&g, |_| 1);
        assert_eq!(run("vc.init", &g, None, Some(&p)).unwrap().outputs, p);
        assert_eq!(run("vc.uniform", &g, None, None).unwrap().total_rounds, 1);
    }

    #[test]
    fn uniform_examples() {
        let k4 = clique(4);
        let out = run("vc.uniform", &k4, None, None).unwrap();
        assert_eq!(out.total_rounds, 4);
        assert!(validate(ProblemKind::VertexColoring, &k4, &out.outputs).is_ok());

        let line = path(6);
        let out = run("vc.uniform", &line, None, None).unwrap();
        assert!(out.total_rounds <= 6);
        assert!(validate(ProblemKind::VertexColoring, &line, &out.outputs).is_ok());
    }

    #[test]
    fn uniform_on_increasing_line_is_slow() {
        for n in [51u32, 101] {
            let out = run("vc.uniform", &path(n), None, None).unwrap();
            assert!(f64::from(out.total_rounds) >= f64::from(n - 3) / 2.0);
        }
    }

    proptest! {
        #[test]
        fn uniform_is_proper_within_s_rounds(seed in 0u64..10_000, n in 1usize..15) {
            let inst = generate(Family::Random { n, p: 0.3, connected: true }, IdScheme::SeededPermutation, Some(1000), seed).unwrap();
            let out = run("vc.uniform", &inst.graph, None, None).unwrap();
            prop_assert!(validate(ProblemKind::VertexColoring, &inst.graph, &out.outputs).is_ok());
            prop_assert!(out.total_rounds as usize <= n);
        }

        #[test]
        fn init_contains_base(g in crate::graph::arb_graph(10), cs in proptest::collection::vec(1u32..12, 10)) {
            let limit = g.max_degree() as u32 + 1;
            let nodes: Vec<NodeId> = g.nodes().collect();
            let p: BTreeMap<NodeId, OutputValue> = nodes.iter().enumerate()
                .map(|(i, &v)| (v, OutputValue::Color(1 + (cs[i % cs.len()] - 1) % limit)))
                .collect();
            let base = run("vc.base", &g, None, Some(&p)).unwrap();
            let init = run("vc.init", &g, None, Some(&p)).unwrap();
            prop_assert!(extendable(ProblemKind::VertexColoring, &g, &init.outputs).is_ok());
            for (v, o) in &base.outputs {
                prop_assert_eq!(init.outputs.get(v), Some(o));
            }
        }
    }
}
