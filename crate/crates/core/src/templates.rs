//! Combinators that assemble registry stages into one program with
//! predictions.
//!
//! A template is a list of segments. Every node computes the same segment
//! lengths from the knowledge it was given, so all active nodes always run
//! the same segment. A node whose stage stops early (handoff) idles until
//! the segment ends and then starts the next stage from its residual.

use crate::engine::{
    Fault, GraphParams, Inbox, Knowledge, Message, NodeProgram, NodeView, Outbox, ProgramFactory, Status, Step,
};
use crate::graph::NodeId;
use crate::problem::ProblemKind;
use crate::programs::{coloring, lookup, Entry, Length, Mode, Residual, Role};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown program `{0}`")]
    Unknown(String),
    #[error("`{name}` cannot be used as {slot}: {why}")]
    Slot { name: String, slot: &'static str, why: String },
    #[error("budget cannot be computed: {0}")]
    Budget(String),
}

/// How nodes compute a round budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Fixed(u32),
    /// The Linial coloring's length; needs Δ and d.
    Linial,
    /// The rooted-tree 3-coloring's length; needs d.
    Gps,
    /// n, an upper bound on greedy MIS rounds.
    Greedy,
}

impl Budget {
    pub fn knowledge(self) -> Knowledge {
        match self {
            Budget::Fixed(_) => Knowledge::NONE,
            Budget::Linial => Knowledge { max_degree: true, d: true, ..Knowledge::NONE },
            Budget::Gps => Knowledge { d: true, ..Knowledge::NONE },
            Budget::Greedy => Knowledge { n: true, ..Knowledge::NONE },
        }
    }

    pub fn rounds(self, p: &GraphParams) -> u32 {
        match self {
            Budget::Fixed(r) => r,
            Budget::Linial => coloring::linial_len(p),
            Budget::Gps => coloring::gps_len(p),
            Budget::Greedy => p.n as u32,
        }
    }
}

impl std::str::FromStr for Budget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linial" => Ok(Budget::Linial),
            "gps" => Ok(Budget::Gps),
            "greedy" | "n" => Ok(Budget::Greedy),
            _ => s.parse().map(Budget::Fixed).map_err(|_| format!("bad budget `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateSpec {
    Simple { init: String, reference: String },
    Consecutive { init: String, uniform: String, cleanup: Option<String>, reference: String, budget: Option<Budget> },
    Interleaved { init: String, uniform: String, reference: String, phase: u32 },
    Parallel { init: String, uniform: String, cleanup: Option<String>, part1: String, part2: String },
}

impl TemplateSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TemplateSpec::Simple { .. } => "simple",
            TemplateSpec::Consecutive { .. } => "consecutive",
            TemplateSpec::Interleaved { .. } => "interleaved",
            TemplateSpec::Parallel { .. } => "parallel",
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum SegKind {
    Run(&'static Entry),
    /// Uniform stage alongside a fault-tolerant coloring that only stores.
    Parallel { uniform: &'static Entry, part1: &'static Entry },
}

#[derive(Clone, Copy, Debug)]
struct Seg {
    kind: SegKind,
    /// `None` runs until every node is done.
    len: Option<u32>,
}

/// Round numbers derived from the graph parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Budgets {
    /// Initialization rounds.
    pub c: u32,
    /// Cleanup rounds.
    pub c_prime: u32,
    /// Reference budget (consecutive).
    pub r: Option<u32>,
    /// Part-1 budget (parallel), already rounded to whole uniform phases.
    pub r1: Option<u32>,
    /// Phase length (interleaved).
    pub phase: Option<u32>,
    /// Part-2 rounds (parallel).
    pub part2: Option<u32>,
}

/// A template with its stages resolved against the registry.
#[derive(Clone, Debug)]
pub struct Template {
    pub spec: TemplateSpec,
    problem: ProblemKind,
    knowledge: Knowledge,
    init: &'static Entry,
    uniform: Option<&'static Entry>,
    cleanup: Option<&'static Entry>,
    reference: Option<&'static Entry>,
    part1: Option<&'static Entry>,
    part2: Option<&'static Entry>,
    budget: Option<Budget>,
}

fn get(name: &str) -> Result<&'static Entry, TemplateError> {
    lookup(name).ok_or_else(|| TemplateError::Unknown(name.to_string()))
}

fn slot_err(e: &Entry, slot: &'static str, why: impl Into<String>) -> TemplateError {
    TemplateError::Slot { name: e.name.to_string(), slot, why: why.into() }
}

fn fixed(e: &Entry, slot: &'static str) -> Result<u32, TemplateError> {
    match e.length {
        Length::Fixed(r) => Ok(r),
        _ => Err(slot_err(e, slot, "needs a fixed length")),
    }
}

fn round_up(x: u32, m: u32) -> u32 {
    x.div_ceil(m) * m
}

impl Template {
    pub fn new(spec: TemplateSpec) -> Result<Self, TemplateError> {
        let (init, uniform, cleanup, reference, part1, part2, budget) = match &spec {
            TemplateSpec::Simple { init, reference } => (init, None, None, Some(reference), None, None, None),
            TemplateSpec::Consecutive { init, uniform, cleanup, reference, budget } => {
                (init, Some(uniform), cleanup.as_ref(), Some(reference), None, None, *budget)
            }
            TemplateSpec::Interleaved { init, uniform, reference, .. } => {
                (init, Some(uniform), None, Some(reference), None, None, None)
            }
            TemplateSpec::Parallel { init, uniform, cleanup, part1, part2 } => {
                (init, Some(uniform), cleanup.as_ref(), None, Some(part1), Some(part2), None)
            }
        };
        let init = get(init)?;
        let problem = init.problem;
        if init.role != Role::Init {
            return Err(slot_err(init, "initialization", "not an initialization program"));
        }
        fixed(init, "initialization")?;
        let same_problem = |e: &'static Entry, slot| {
            if e.problem == problem {
                Ok(e)
            } else {
                Err(slot_err(e, slot, format!("solves {} but the template solves {problem}", e.problem)))
            }
        };
        let uniform = uniform.map(|u| get(u).and_then(|e| same_problem(e, "measure-uniform"))).transpose()?;
        let cleanup = cleanup.map(|c| get(c).and_then(|e| same_problem(e, "clean-up"))).transpose()?;
        if let Some(c) = cleanup {
            fixed(c, "clean-up")?;
        }
        let reference = reference.map(|r| get(r).and_then(|e| same_problem(e, "reference"))).transpose()?;
        let part1 = part1.map(|p| get(p)).transpose()?;
        let part2 = part2.map(|p| get(p).and_then(|e| same_problem(e, "reference part 2"))).transpose()?;

        let mut knowledge = init.knowledge;
        for e in [uniform, cleanup, reference, part1, part2].into_iter().flatten() {
            knowledge = knowledge.union(e.knowledge);
        }

        match &spec {
            TemplateSpec::Consecutive { .. } => {
                let r = reference.unwrap();
                if budget.is_none() && matches!(r.length, Length::Open) {
                    return Err(TemplateError::Budget(format!(
                        "{} has no known round bound; set one explicitly",
                        r.name
                    )));
                }
            }
            TemplateSpec::Interleaved { phase, .. } => {
                for e in [uniform.unwrap(), reference.unwrap()] {
                    match e.phase {
                        None => return Err(slot_err(e, "interleaved phase", "not extendable at phase ends")),
                        Some(p) if *phase == 0 || phase % p != 0 => {
                            return Err(slot_err(e, "interleaved phase", format!("phase {phase} is not a multiple of {p}")))
                        }
                        _ => {}
                    }
                }
            }
            TemplateSpec::Parallel { .. } => {
                let p1 = part1.unwrap();
                if !p1.fault_tolerant {
                    return Err(slot_err(p1, "reference part 1", "not fault-tolerant"));
                }
                if matches!(p1.length, Length::Open) {
                    return Err(slot_err(p1, "reference part 1", "has no known round bound"));
                }
            }
            TemplateSpec::Simple { .. } => {}
        }
        if let Some(b) = budget {
            knowledge = knowledge.union(b.knowledge());
        }
        Ok(Template { spec, problem, knowledge, init, uniform, cleanup, reference, part1, part2, budget })
    }

    pub fn budgets(&self, p: &GraphParams) -> Budgets {
        let c = fixed(self.init, "").unwrap_or(0);
        let c_prime = self.cleanup.map_or(0, |e| fixed(e, "").unwrap_or(0));
        let mut b = Budgets { c, c_prime, ..Default::default() };
        match &self.spec {
            TemplateSpec::Consecutive { .. } => {
                b.r = match self.budget {
                    Some(x) => Some(x.rounds(p)),
                    None => self.reference.and_then(|e| e.length.rounds(p)),
                };
            }
            TemplateSpec::Interleaved { phase, .. } => b.phase = Some(*phase),
            TemplateSpec::Parallel { .. } => {
                let step = self.uniform.and_then(|u| u.phase).unwrap_or(1);
                let r1 = self.part1.and_then(|e| e.length.rounds(p)).unwrap_or(0);
                b.r1 = Some(round_up(r1.max(1), step));
                b.part2 = self.part2.and_then(|e| e.length.rounds(p));
            }
            TemplateSpec::Simple { .. } => {}
        }
        b
    }

    fn segments(&self, p: &GraphParams) -> (Vec<Seg>, Option<[Seg; 2]>) {
        let b = self.budgets(p);
        let run = |e: &'static Entry, len| Seg { kind: SegKind::Run(e), len };
        let mut segs = vec![run(self.init, Some(b.c))];
        let mut cycle = None;
        match &self.spec {
            TemplateSpec::Simple { .. } => segs.push(run(self.reference.unwrap(), None)),
            TemplateSpec::Consecutive { .. } => {
                segs.push(run(self.uniform.unwrap(), Some(b.r.unwrap_or(0) + b.c_prime)));
                if let Some(c) = self.cleanup {
                    segs.push(run(c, Some(b.c_prime)));
                }
                segs.push(run(self.reference.unwrap(), None));
            }
            TemplateSpec::Interleaved { phase, .. } => {
                cycle = Some([run(self.uniform.unwrap(), Some(*phase)), run(self.reference.unwrap(), Some(*phase))]);
            }
            TemplateSpec::Parallel { .. } => {
                let kind = SegKind::Parallel { uniform: self.uniform.unwrap(), part1: self.part1.unwrap() };
                segs.push(Seg { kind, len: b.r1 });
                if let Some(c) = self.cleanup {
                    segs.push(run(c, Some(b.c_prime)));
                }
                segs.push(run(self.part2.unwrap(), None));
            }
        }
        (segs, cycle)
    }

    /// Rounds after which the partial output must be extendable, up to `total`.
    pub fn checkpoints(&self, p: &GraphParams, total: u32) -> Vec<u32> {
        let (segs, cycle) = self.segments(p);
        let mut out = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while start < total {
            let seg = match segs.get(i) {
                Some(s) => *s,
                None => match cycle {
                    Some(c) => c[(i - segs.len()) % 2],
                    None => break,
                },
            };
            i += 1;
            let end = seg.len.map_or(total, |l| start + l).min(total);
            match seg.kind {
                SegKind::Run(e) => {
                    if let Some(ph) = e.phase {
                        out.extend((1..).map(|k| start + k * ph).take_while(|&r| r <= end));
                    }
                    if matches!(e.role, Role::Init | Role::Cleanup) && seg.len.is_some_and(|l| start + l <= total) {
                        out.push(end);
                    }
                }
                SegKind::Parallel { uniform, .. } => {
                    if let Some(ph) = uniform.phase {
                        out.extend((1..).map(|k| start + k * ph).take_while(|&r| r <= end));
                    }
                }
            }
            if seg.len.is_none() {
                break;
            }
            start = end;
        }
        out.retain(|&r| r > 0);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn init(&self) -> &'static Entry {
        self.init
    }
    pub fn uniform(&self) -> Option<&'static Entry> {
        self.uniform
    }
    pub fn reference(&self) -> Option<&'static Entry> {
        self.reference
    }
    pub fn part1(&self) -> Option<&'static Entry> {
        self.part1
    }
}

fn view_params(v: &NodeView) -> GraphParams {
    GraphParams { n: v.n.unwrap_or(0), d: v.d.unwrap_or(0), delta: v.max_degree.unwrap_or(0) }
}

impl ProgramFactory for Template {
    fn name(&self) -> String {
        self.spec.kind().to_string()
    }
    fn problem(&self) -> ProblemKind {
        self.problem
    }
    fn knowledge(&self) -> Knowledge {
        self.knowledge
    }
    fn prediction_kind(&self) -> Option<ProblemKind> {
        self.init.predictions
    }
    fn round_budget(&self, p: &GraphParams) -> Option<u32> {
        let b = self.budgets(p);
        let mut total = b.c + b.c_prime + b.r.unwrap_or(0) * 2 + b.r1.unwrap_or(0) + b.part2.unwrap_or(0);
        for e in [self.uniform, self.reference, self.part1].into_iter().flatten() {
            total += e.length.rounds(p).unwrap_or(0);
        }
        Some(total)
    }
    fn build(&self, view: &NodeView) -> Box<dyn NodeProgram> {
        let (segs, cycle) = self.segments(&view_params(view));
        let mut node = Composite {
            view: view.clone(),
            segs,
            cycle,
            idx: 0,
            start: 0,
            stage: Stage::Pending(Residual::fresh(view, self.problem)),
            finished: false,
        };
        node.enter(0);
        Box::new(node)
    }
}

enum Stage {
    Single(Box<dyn NodeProgram>),
    Pair { uniform: Box<dyn NodeProgram>, part1: Box<dyn NodeProgram> },
    /// Waiting for the current segment to end.
    Idle(Residual),
    /// Segment over; the next stage starts from this residual.
    Pending(Residual),
}

struct Composite {
    view: NodeView,
    segs: Vec<Seg>,
    cycle: Option<[Seg; 2]>,
    idx: usize,
    /// Global round after which the current segment started.
    start: u32,
    stage: Stage,
    /// The first stage has nothing to do.
    finished: bool,
}

/// Stored coloring merged into the uniform stage's view of the neighborhood.
fn merge(mut r: Residual, p1: Residual) -> Residual {
    r.color = p1.color;
    r.neighbor_colors = p1.neighbor_colors.into_iter().filter(|(u, _)| r.active.contains(u)).collect();
    r
}

impl Composite {
    fn seg(&self, i: usize) -> Option<Seg> {
        self.segs.get(i).copied().or_else(|| self.cycle.map(|c| c[(i - self.segs.len()) % 2]))
    }

    fn is_last(&self) -> bool {
        self.seg(self.idx).is_some_and(|s| s.len.is_none()) || self.seg(self.idx + 1).is_none()
    }

    /// Starts the segment beginning after global round `start`, skipping
    /// empty ones.
    fn enter(&mut self, start: u32) {
        let Stage::Pending(r) = std::mem::replace(&mut self.stage, Stage::Idle(Residual::default())) else {
            unreachable!("entering a segment while a stage runs")
        };
        while self.seg(self.idx).is_some_and(|s| s.len == Some(0)) {
            self.idx += 1;
        }
        self.start = start;
        let Some(seg) = self.seg(self.idx) else {
            self.stage = Stage::Idle(r);
            return;
        };
        self.stage = match seg.kind {
            SegKind::Run(e) => {
                let p = (e.build)(&self.view, r, Mode::Output);
                if self.idx == 0 && p.finished_at_start() {
                    self.finished = true;
                }
                Stage::Single(p)
            }
            SegKind::Parallel { uniform, part1 } => Stage::Pair {
                uniform: (uniform.build)(&self.view, r.clone(), Mode::Output),
                part1: (part1.build)(&self.view, r, Mode::Store),
            },
        };
    }

    fn current_residual(&self) -> Residual {
        match &self.stage {
            Stage::Single(p) => p.residual(),
            Stage::Pair { uniform, part1 } => merge(uniform.residual(), part1.residual()),
            Stage::Idle(r) | Stage::Pending(r) => r.clone(),
        }
    }
}

fn pair(a: Outbox, b: Outbox) -> Outbox {
    let mut m: BTreeMap<NodeId, (Option<Box<Message>>, Option<Box<Message>>)> = BTreeMap::new();
    for (u, x) in a {
        m.entry(u).or_default().0 = Some(Box::new(x));
    }
    for (u, x) in b {
        m.entry(u).or_default().1 = Some(Box::new(x));
    }
    m.into_iter().map(|(u, (x, y))| (u, Message::Pair(x, y))).collect()
}

fn split(inbox: &Inbox) -> (Inbox, Inbox) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (u, m) in inbox.iter() {
        if let Message::Pair(x, y) = m {
            if let Some(x) = x {
                a.push((u, (**x).clone()));
            }
            if let Some(y) = y {
                b.push((u, (**y).clone()));
            }
        }
    }
    (Inbox::new(a), Inbox::new(b))
}

impl NodeProgram for Composite {
    fn compose(&mut self, round: u32) -> Outbox {
        if matches!(self.stage, Stage::Pending(_)) {
            self.enter(round - 1);
        }
        let local = round - self.start;
        match &mut self.stage {
            Stage::Single(p) => p.compose(local),
            Stage::Pair { uniform, part1 } => pair(uniform.compose(local), part1.compose(local)),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        let local = round - self.start;
        let seg_len = self.seg(self.idx).and_then(|s| s.len);
        let last = self.is_last();
        let mut step = match &mut self.stage {
            Stage::Single(p) => p.process(local, inbox)?,
            Stage::Pair { uniform, part1 } => {
                let (a, b) = split(inbox);
                let s = uniform.process(local, &a)?;
                let s1 = part1.process(local, &b)?;
                if s1.status == Status::Done || !s1.outputs.is_empty() {
                    return Err(Fault("stored coloring produced output".into()));
                }
                s
            }
            _ => Step::active(),
        };
        if step.status == Status::Done {
            return Ok(step);
        }
        if step.status == Status::Handoff {
            if last {
                return Ok(step);
            }
            self.stage = Stage::Idle(self.current_residual());
            step.status = Status::Active;
        }
        if seg_len == Some(local) {
            let r = self.current_residual();
            self.stage = Stage::Pending(r);
            self.idx += 1;
            if self.seg(self.idx).is_none() {
                step.status = Status::Handoff;
            }
        }
        Ok(step)
    }

    fn residual(&self) -> Residual {
        self.current_residual()
    }

    fn stored_color(&self) -> Option<u64> {
        match &self.stage {
            Stage::Pair { part1, .. } => part1.stored_color(),
            Stage::Single(p) => p.stored_color(),
            _ => None,
        }
    }

    fn check_invariants(&self) -> Result<(), Fault> {
        match &self.stage {
            Stage::Single(p) => p.check_invariants(),
            Stage::Pair { uniform, part1 } => uniform.check_invariants().and(part1.check_invariants()),
            _ => Ok(()),
        }
    }

    fn finished_at_start(&self) -> bool {
        self.finished
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, Outcome, SimConfig};
    use crate::graph::{extendable, generate, validate, Family, Graph, IdScheme, RootedTree};
    use crate::problem::OutputValue;
    use crate::programs::testing::{bits, clique, path};
    use proptest::prelude::*;

    fn s(x: &str) -> String {
        x.to_string()
    }

    pub(crate) fn simple() -> Template {
        Template::new(TemplateSpec::Simple { init: s("mis.init"), reference: s("mis.greedy") }).unwrap()
    }

    fn consecutive(budget: u32) -> Template {
        Template::new(TemplateSpec::Consecutive {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            cleanup: Some(s("mis.cleanup")),
            reference: s("mis.greedy_min"),
            budget: Some(Budget::Fixed(budget)),
        })
        .unwrap()
    }

    fn interleaved(phase: u32) -> Template {
        Template::new(TemplateSpec::Interleaved {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            reference: s("mis.greedy_min"),
            phase,
        })
        .unwrap()
    }

    fn parallel() -> Template {
        Template::new(TemplateSpec::Parallel {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            cleanup: None,
            part1: s("vc.linial"),
            part2: s("mis.color_part2_combined"),
        })
        .unwrap()
    }

    fn tree_parallel() -> Template {
        Template::new(TemplateSpec::Parallel {
            init: s("mis.tree_init"),
            uniform: s("mis.tree_uniform"),
            cleanup: None,
            part1: s("mis.tree_gps"),
            part2: s("mis.tree_part2"),
        })
        .unwrap()
    }

    fn go(t: &Template, g: &Graph, tree: Option<&RootedTree>, p: &BTreeMap<NodeId, OutputValue>) -> Outcome {
        simulate(g, tree, t, Some(p), &SimConfig { trace: true, ..Default::default() }).unwrap()
    }

    fn audit(t: &Template, g: &Graph, out: &Outcome) {
        let tr = out.trace.as_ref().unwrap();
        for r in t.checkpoints(&GraphParams::of(g), out.total_rounds) {
            assert!(extendable(ProblemKind::Mis, g, &tr.outputs_at(r)).is_ok(), "round {r}");
        }
        assert!(validate(ProblemKind::Mis, g, &out.outputs).is_ok());
    }

    #[test]
    fn slots_are_checked() {
        let bad = Template::new(TemplateSpec::Simple { init: s("mis.greedy"), reference: s("mis.greedy") });
        assert!(matches!(bad, Err(TemplateError::Slot { .. })));
        let bad = Template::new(TemplateSpec::Simple { init: s("mis.init"), reference: s("vc.uniform") });
        assert!(matches!(bad, Err(TemplateError::Slot { .. })));
        let bad = Template::new(TemplateSpec::Simple { init: s("mis.init"), reference: s("nope") });
        assert_eq!(bad.unwrap_err(), TemplateError::Unknown(s("nope")));
        let bad = Template::new(TemplateSpec::Parallel {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            cleanup: None,
            part1: s("mis.greedy"),
            part2: s("mis.color_part2"),
        });
        assert!(matches!(bad, Err(TemplateError::Slot { .. })));
        let bad = Template::new(TemplateSpec::Consecutive {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            cleanup: None,
            reference: s("mis.greedy_min"),
            budget: None,
        });
        assert!(matches!(bad, Err(TemplateError::Budget(_))));
        assert!(Template::new(TemplateSpec::Interleaved {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            reference: s("mis.greedy_min"),
            phase: 3,
        })
        .is_err());
        let bad = Template::new(TemplateSpec::Interleaved {
            init: s("mis.init"),
            uniform: s("mis.greedy"),
            reference: s("mis.cleanup"),
            phase: 2,
        });
        assert!(matches!(bad, Err(TemplateError::Slot { .. })));
    }

    #[test]
    fn correct_predictions_take_three_rounds() {
        let g = generate(Family::Random { n: 20, p: 0.2, connected: false }, IdScheme::SeededPermutation, Some(100), 3)
            .unwrap()
            .graph;
        let sol = crate::programs::testing::run("mis.greedy", &g, None, None).unwrap().outputs;
        for t in [simple(), consecutive(4), interleaved(2), parallel()] {
            let out = go(&t, &g, None, &sol);
            assert_eq!(out.total_rounds, 3, "{}", t.name());
            assert_eq!(out.outputs, sol);
        }
    }

    #[test]
    fn all_ones_on_k6_takes_five_rounds() {
        let g = clique(6);
        let out = go(&simple(), &g, None, &bits(&g, |_| true));
        // init already settles a clique, the max id joins
        assert_eq!(out.total_rounds, 3);
        // with all zeros nothing is pruned and greedy needs 2 more rounds
        let out = go(&simple(), &g, None, &bits(&g, |_| false));
        assert_eq!(out.total_rounds, 5);
        audit(&simple(), &g, &out);
    }

    #[test]
    fn consecutive_switches_to_reference() {
        let g = path(30);
        let p = bits(&g, |_| false);
        // budget 0 plus one cleanup round: greedy runs 1 round
        let t = consecutive(0);
        let out = go(&t, &g, None, &p);
        audit(&t, &g, &out);
        let b = t.budgets(&GraphParams::of(&g));
        assert!(out.total_rounds <= b.c + 2 * (b.r.unwrap() + b.c_prime) + 30);
        // with a generous budget greedy finishes: c + n
        let t = consecutive(40);
        let out = go(&t, &g, None, &p);
        assert_eq!(out.total_rounds, 3 + 30);
        audit(&t, &g, &out);
    }

    #[test]
    fn interleaved_alternates_phases() {
        let g = path(12);
        let t = interleaved(2);
        let out = go(&t, &g, None, &bits(&g, |_| false));
        audit(&t, &g, &out);
        // both ends are eaten, each greedy variant clears a node pair per phase
        assert!(out.total_rounds <= 3 + 12);
        let cps = t.checkpoints(&GraphParams::of(&g), out.total_rounds);
        assert_eq!(cps[0], 3);
        assert!(cps.windows(2).all(|w| w[1] - w[0] <= 2));
    }

    #[test]
    fn parallel_falls_back_to_coloring() {
        let g = path(60);
        let t = parallel();
        let p = bits(&g, |_| false);
        let out = go(&t, &g, None, &p);
        audit(&t, &g, &out);
        let b = t.budgets(&GraphParams::of(&g));
        assert!(b.r1.unwrap() % 2 == 0);
        // the increasing path defeats greedy, so part 2 runs
        assert!(out.total_rounds > 3 + b.r1.unwrap());
        assert!(out.total_rounds <= 3 + b.r1.unwrap() + 2);
    }

    #[test]
    fn tree_parallel_on_mod3_line() {
        let inst = generate(Family::Tree { n: 15, shape: crate::graph::TreeShape::Path }, IdScheme::Increasing, None, 0)
            .unwrap();
        let tree = inst.tree.unwrap();
        let p: BTreeMap<NodeId, OutputValue> =
            tree.graph().nodes().map(|v| (v, OutputValue::Bit(tree.depth(v) % 3 != 0))).collect();
        let t = tree_parallel();
        let out = go(&t, tree.graph(), Some(&tree), &p);
        assert!(out.total_rounds <= 2);
        assert!(validate(ProblemKind::Mis, tree.graph(), &out.outputs).is_ok());
    }

    /// Builds `inner` as if the graph had the parameters `p`.
    struct Rescoped<'a> {
        inner: &'a dyn ProgramFactory,
        p: GraphParams,
    }

    impl ProgramFactory for Rescoped<'_> {
        fn name(&self) -> String {
            self.inner.name()
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
        fn build(&self, view: &NodeView) -> Box<dyn NodeProgram> {
            let mut v = view.clone();
            v.n = v.n.map(|_| self.p.n);
            v.d = v.d.map(|_| self.p.d);
            v.max_degree = v.max_degree.map(|_| self.p.delta);
            self.inner.build(&v)
        }
    }

    fn part1_messages(t: &crate::engine::Trace, from: u32, to: u32, shift: u32, paired: bool) -> Vec<String> {
        use crate::engine::{EventKind, Message};
        t.events
            .iter()
            .filter(|e| (from..=to).contains(&e.round))
            .filter_map(|e| match &e.kind {
                EventKind::Send { to: u, msg: Message::Pair(_, Some(m)) } if paired => {
                    Some(format!("{} {}>{} {m}", e.round - shift, e.node, u))
                }
                EventKind::Send { to: u, msg } if !paired => Some(format!("{} {}>{} {msg}", e.round - shift, e.node, u)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn part1_only_sees_part1_messages() {
        use crate::bench::crash::Crashing;
        use crate::programs::Standalone;
        let t = parallel();
        let linial = Standalone::named("vc.linial").unwrap();
        let (mut crashed_somewhere, mut compared) = (false, 0);
        for seed in 0..12u64 {
            let g = generate(Family::Random { n: 30, p: 0.15, connected: false }, IdScheme::SeededPermutation, Some(1000), seed)
                .unwrap()
                .graph;
            let p = bits(&g, |v| (v as u64 * 7 + seed) % 5 == 0);
            let cfg = SimConfig { trace: true, record_stored: true, ..Default::default() };
            let out = simulate(&g, None, &t, Some(&p), &cfg).unwrap();
            let params = GraphParams::of(&g);
            let b = t.budgets(&params);
            let (c, r1) = (b.c, b.r1.unwrap());
            if out.total_rounds <= c {
                continue;
            }
            let alive = out.active_after(c).unwrap();
            let h = g.induced_subgraph(&alive).unwrap();
            let schedule: BTreeMap<NodeId, u32> = alive
                .iter()
                .filter(|v| out.completed.contains(v))
                .map(|v| (*v, out.term_round[v] - c))
                .filter(|&(_, r)| r <= r1)
                .collect();
            crashed_somewhere |= !schedule.is_empty();
            let scoped = Rescoped { inner: &linial, p: params };
            let alone = simulate(&h, None, &Crashing { inner: &scoped, schedule }, None, &cfg).unwrap();
            let (tt, at) = (out.trace.unwrap(), alone.trace.unwrap());
            let last = r1.min(out.total_rounds - c);
            for j in 1..=last {
                assert_eq!(tt.stored[(c + j) as usize], at.stored[j as usize], "seed {seed} part-1 round {j}");
            }
            let m = part1_messages(&tt, c + 1, c + last, c, true);
            assert_eq!(m, part1_messages(&at, 1, last, 0, false), "seed {seed}");
            compared += m.len();
        }
        assert!(crashed_somewhere && compared > 0);
    }

    #[test]
    fn other_problems_compose() {
        let g = generate(Family::Random { n: 12, p: 0.3, connected: true }, IdScheme::SeededPermutation, Some(50), 1)
            .unwrap()
            .graph;
        let k = |name: &str| crate::programs::testing::run(name, &g, None, None).unwrap().outputs;
        let mm = Template::new(TemplateSpec::Consecutive {
            init: s("mm.init"),
            uniform: s("mm.uniform"),
            cleanup: Some(s("mm.cleanup")),
            reference: s("mm.uniform"),
            budget: Some(Budget::Fixed(1)),
        })
        .unwrap();
        let wrong: BTreeMap<NodeId, OutputValue> = g.nodes().map(|v| (v, OutputValue::Partner(None))).collect();
        let out = go(&mm, &g, None, &wrong);
        assert!(validate(ProblemKind::MaximalMatching, &g, &out.outputs).is_ok());
        let out = go(&mm, &g, None, &k("mm.uniform"));
        assert_eq!(out.total_rounds, 2);

        let vc = Template::new(TemplateSpec::Interleaved {
            init: s("vc.init"),
            uniform: s("vc.uniform"),
            reference: s("vc.uniform"),
            phase: 1,
        })
        .unwrap();
        let ones: BTreeMap<NodeId, OutputValue> = g.nodes().map(|v| (v, OutputValue::Color(1))).collect();
        let out = go(&vc, &g, None, &ones);
        assert!(validate(ProblemKind::VertexColoring, &g, &out.outputs).is_ok());

        let ec = Template::new(TemplateSpec::Consecutive {
            init: s("ec.base"),
            uniform: s("ec.uniform"),
            cleanup: Some(s("ec.cleanup")),
            reference: s("ec.uniform"),
            budget: Some(Budget::Fixed(2)),
        })
        .unwrap();
        let sol = k("ec.uniform");
        let out = go(&ec, &g, None, &sol);
        assert_eq!(out.total_rounds, 1);
        let all1: BTreeMap<NodeId, OutputValue> = g
            .nodes()
            .map(|v| (v, OutputValue::EdgeColors(g.neighbors(v).iter().map(|&u| (u, 1)).collect())))
            .collect();
        let out = go(&ec, &g, None, &all1);
        assert!(validate(ProblemKind::EdgeColoring, &g, &out.outputs).is_ok());
    }

    proptest! {
        #[test]
        fn every_template_yields_an_mis(g in crate::graph::arb_graph(12), flips in proptest::collection::vec(any::<bool>(), 12), budget in 0u32..6) {
            let nodes: Vec<NodeId> = g.nodes().collect();
            let p: BTreeMap<NodeId, OutputValue> = nodes.iter().enumerate().map(|(i, &v)| (v, OutputValue::Bit(flips[i % flips.len()]))).collect();
            for t in [simple(), consecutive(budget), interleaved(2), interleaved(4), parallel()] {
                let out = go(&t, &g, None, &p);
                let tr = out.trace.as_ref().unwrap();
                for r in t.checkpoints(&GraphParams::of(&g), out.total_rounds) {
                    prop_assert!(extendable(ProblemKind::Mis, &g, &tr.outputs_at(r)).is_ok(), "{} round {}", t.name(), r);
                }
                prop_assert!(validate(ProblemKind::Mis, &g, &out.outputs).is_ok(), "{}", t.name());
            }
        }
    }
}
