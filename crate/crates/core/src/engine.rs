//! Synchronous round executor.
//!
//! Every round has two stages. All active nodes first compose their outboxes
//! from their state at the end of the previous round; the messages are then
//! delivered and each active node processes its inbox, possibly assigning
//! outputs and terminating. A node that terminates in round `r` still has its
//! round-`r` messages delivered. Messages addressed to nodes that terminated
//! earlier are dropped.

use crate::graph::{Graph, NodeId, RootedTree};
use crate::problem::{OutputValue, ProblemKind};
use crate::programs::Residual;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write;
use thiserror::Error;

/// Which global facts a program may read from its [`NodeView`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Knowledge {
    pub n: bool,
    pub d: bool,
    pub max_degree: bool,
    pub rooted: bool,
    /// Identifiers of the neighbors' neighbors.
    pub two_hop: bool,
}

impl Knowledge {
    pub const NONE: Knowledge = Knowledge { n: false, d: false, max_degree: false, rooted: false, two_hop: false };
    pub const ALL: Knowledge = Knowledge { n: true, d: true, max_degree: true, rooted: true, two_hop: true };

    pub fn union(self, o: Knowledge) -> Knowledge {
        Knowledge {
            n: self.n || o.n,
            d: self.d || o.d,
            max_degree: self.max_degree || o.max_degree,
            rooted: self.rooted || o.rooted,
            two_hop: self.two_hop || o.two_hop,
        }
    }

    pub fn covers(self, need: Knowledge) -> bool {
        self.union(need) == self
    }
}

/// Global parameters a node may be told.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphParams {
    pub n: usize,
    pub d: u32,
    pub delta: usize,
}

impl GraphParams {
    pub fn of(g: &Graph) -> Self {
        GraphParams { n: g.n(), d: g.d(), delta: g.max_degree() }
    }
}

/// What a node knows when it starts.
#[derive(Clone, Debug)]
pub struct NodeView {
    pub id: NodeId,
    pub neighbors: Vec<NodeId>,
    pub n: Option<usize>,
    pub d: Option<u32>,
    pub max_degree: Option<usize>,
    /// `Some(None)` at the root of a rooted tree.
    pub parent: Option<Option<NodeId>>,
    pub prediction: Option<OutputValue>,
    pub two_hop: Option<BTreeMap<NodeId, Vec<NodeId>>>,
}

impl NodeView {
    pub fn delta(&self) -> usize {
        self.max_degree.expect("program was built without Δ knowledge")
    }

    pub fn params(&self) -> GraphParams {
        GraphParams {
            n: self.n.expect("program was built without n knowledge"),
            d: self.d.expect("program was built without d knowledge"),
            delta: self.delta(),
        }
    }

    /// Parent in a rooted tree, `None` at the root or when not rooted.
    pub fn tree_parent(&self) -> Option<NodeId> {
        self.parent.flatten()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Prediction(OutputValue),
    Join,
    Drop,
    Alive,
    Root,
    Leaf,
    Propose,
    Accept,
    Matched,
    Color(u64),
    EdgeColor(u32),
    EdgeInfo { used: Vec<u32>, uncolored: Vec<NodeId> },
    /// Two sub-channels sharing one message, used by the parallel template.
    Pair(Option<Box<Message>>, Option<Box<Message>>),
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Prediction(v) => write!(f, "prediction:{}", crate::problem::format_value(v)),
            Message::Color(c) => write!(f, "color:{c}"),
            Message::EdgeColor(c) => write!(f, "edge_color:{c}"),
            Message::EdgeInfo { used, uncolored } => write!(f, "edge_info:{used:?}/{uncolored:?}"),
            Message::Pair(a, b) => {
                let s = |m: &Option<Box<Message>>| m.as_ref().map_or("-".to_string(), |m| m.to_string());
                write!(f, "pair({}|{})", s(a), s(b))
            }
            other => write!(f, "{}", format!("{other:?}").to_lowercase()),
        }
    }
}

/// Messages received in one round, sorted by sender.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Inbox(Vec<(NodeId, Message)>);

impl Inbox {
    pub fn new(mut msgs: Vec<(NodeId, Message)>) -> Self {
        msgs.sort_by_key(|(v, _)| *v);
        Inbox(msgs)
    }

    pub fn get(&self, from: NodeId) -> Option<&Message> {
        self.0.binary_search_by_key(&from, |(v, _)| *v).ok().map(|i| &self.0[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Message)> {
        self.0.iter().map(|(v, m)| (*v, m))
    }

    pub fn senders(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().map(|(v, _)| *v)
    }

    /// Senders whose message equals `m`.
    pub fn senders_of<'a>(&'a self, m: &'a Message) -> impl Iterator<Item = NodeId> + 'a {
        self.0.iter().filter(move |(_, x)| x == m).map(|(v, _)| *v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

pub type Outbox = Vec<(NodeId, Message)>;

/// One output variable assigned by a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assignment {
    Bit(bool),
    Partner(Option<NodeId>),
    Color(u32),
    Edge(NodeId, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Active,
    /// Terminates; all outputs must be assigned.
    Done,
    /// Stops without completing its output, leaving the rest to whatever
    /// runs next. At the top level this is termination without output.
    Handoff,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub outputs: Vec<Assignment>,
    pub status: Status,
}

impl Step {
    pub fn active() -> Self {
        Step { outputs: Vec::new(), status: Status::Active }
    }
    pub fn active_with(outputs: Vec<Assignment>) -> Self {
        Step { outputs, status: Status::Active }
    }
    pub fn done(outputs: Vec<Assignment>) -> Self {
        Step { outputs, status: Status::Done }
    }
    pub fn handoff() -> Self {
        Step { outputs: Vec::new(), status: Status::Handoff }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fault(pub String);

/// Per-node state machine.
pub trait NodeProgram: Send {
    /// Messages for this round, computed from state at the end of the last.
    fn compose(&mut self, round: u32) -> Outbox;
    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault>;
    /// Local knowledge handed to the next stage of a composed program.
    fn residual(&self) -> Residual {
        Residual::default()
    }
    /// Color held locally but not yet output.
    fn stored_color(&self) -> Option<u64> {
        None
    }
    fn check_invariants(&self) -> Result<(), Fault> {
        Ok(())
    }
    /// True for nodes with nothing to do, which finish in round 0.
    fn finished_at_start(&self) -> bool {
        false
    }
}

/// Builds one program per node.
pub trait ProgramFactory: Sync {
    fn name(&self) -> String;
    fn problem(&self) -> ProblemKind;
    fn knowledge(&self) -> Knowledge;
    /// Kind of prediction read, if any.
    fn prediction_kind(&self) -> Option<ProblemKind>;
    /// Declared worst-case rounds, added to the default round limit.
    fn round_budget(&self, _p: &GraphParams) -> Option<u32> {
        None
    }
    fn build(&self, view: &NodeView) -> Box<dyn NodeProgram>;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("NON_TERMINATION: {active} nodes still active after {max_rounds} rounds")]
    NonTermination { max_rounds: u32, active: usize },
    #[error("PROTOCOL_VIOLATION in round {round} at node {node}: {reason}")]
    ProtocolViolation { round: u32, node: NodeId, reason: String },
    #[error("CONFIG: {0}")]
    Config(String),
    #[error("invalid prediction: {0}")]
    Prediction(String),
    #[error("round {0} out of range")]
    RoundOutOfRange(u32),
}

#[derive(Clone, Debug, Default)]
pub struct SimConfig {
    /// Defaults to `4n + 20` plus the program's declared budget.
    pub max_rounds: Option<u32>,
    pub trace: bool,
    /// Record each active node's stored color after every round.
    pub record_stored: bool,
    /// Record each active node's residual after every round.
    pub record_residuals: bool,
    /// Knowledge the run may grant; `None` grants whatever is asked for.
    pub allowed: Option<Knowledge>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Send { to: NodeId, msg: Message },
    Output(Assignment),
    Terminate { completed: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub round: u32,
    pub node: NodeId,
    pub kind: EventKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
    /// Index `r` holds the state after round `r`; index 0 is the start.
    pub stored: Vec<BTreeMap<NodeId, u64>>,
    pub residuals: Vec<BTreeMap<NodeId, Residual>>,
}

impl Trace {
    /// One `round,node,event,detail` line per event.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let (name, detail) = match &e.kind {
                EventKind::Send { to, msg } => ("SEND", format!("{to}:{msg}")),
                EventKind::Output(a) => ("OUTPUT", format_assignment(a)),
                EventKind::Terminate { completed } => {
                    ("TERMINATE", if *completed { "complete" } else { "handoff" }.to_string())
                }
            };
            writeln!(s, "{},{},{},{}", e.round, e.node, name, detail).unwrap();
        }
        s
    }

    /// Outputs assigned by the end of round `r`.
    pub fn outputs_at(&self, r: u32) -> BTreeMap<NodeId, OutputValue> {
        let mut out = BTreeMap::new();
        for e in self.events.iter().take_while(|e| e.round <= r) {
            if let EventKind::Output(a) = &e.kind {
                apply(&mut out, e.node, a);
            }
        }
        out
    }
}

fn format_assignment(a: &Assignment) -> String {
    match a {
        Assignment::Bit(b) => format!("bit={}", u8::from(*b)),
        Assignment::Partner(Some(p)) => format!("partner={p}"),
        Assignment::Partner(None) => "partner=-".into(),
        Assignment::Color(c) => format!("color={c}"),
        Assignment::Edge(u, c) => format!("edge[{u}]={c}"),
    }
}

// Records an assignment; returns false if it overwrites an earlier one.
fn apply(out: &mut BTreeMap<NodeId, OutputValue>, v: NodeId, a: &Assignment) -> bool {
    match a {
        Assignment::Edge(u, c) => {
            let e = out.entry(v).or_insert_with(|| OutputValue::EdgeColors(BTreeMap::new()));
            match e {
                OutputValue::EdgeColors(m) => m.insert(*u, *c).is_none(),
                _ => false,
            }
        }
        other => {
            let val = match other {
                Assignment::Bit(b) => OutputValue::Bit(*b),
                Assignment::Partner(p) => OutputValue::Partner(*p),
                Assignment::Color(c) => OutputValue::Color(*c),
                Assignment::Edge(..) => unreachable!(),
            };
            out.insert(v, val).is_none()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub outputs: BTreeMap<NodeId, OutputValue>,
    pub term_round: BTreeMap<NodeId, u32>,
    /// Nodes that terminated with a complete output.
    pub completed: BTreeSet<NodeId>,
    pub total_rounds: u32,
    pub trace: Option<Trace>,
}

impl Outcome {
    /// Nodes without a complete output at the end of round `r`.
    pub fn active_after(&self, r: u32) -> Result<BTreeSet<NodeId>, SimError> {
        if r > self.total_rounds {
            return Err(SimError::RoundOutOfRange(r));
        }
        Ok(self
            .term_round
            .iter()
            .filter(|(v, &t)| !(self.completed.contains(v) && t <= r))
            .map(|(&v, _)| v)
            .collect())
    }

    /// Nodes that stopped without completing their output.
    pub fn undecided(&self) -> BTreeSet<NodeId> {
        self.term_round.keys().filter(|v| !self.completed.contains(v)).copied().collect()
    }
}

/// Checks the prediction map against the graph and problem range.
pub fn check_prediction(
    kind: ProblemKind,
    g: &Graph,
    p: &BTreeMap<NodeId, OutputValue>,
) -> Result<(), SimError> {
    let delta = g.max_degree();
    let err = |s: String| Err(SimError::Prediction(s));
    for v in g.nodes() {
        let Some(x) = p.get(&v) else { return err(format!("node {v} has no prediction")) };
        if x.kind() != kind {
            return err(format!("node {v}: {x:?} is not a {kind} prediction"));
        }
        match x {
            OutputValue::Partner(Some(u)) if !g.has_edge(u.to_owned(), v) => {
                return err(format!("node {v} predicts non-neighbor {u}"))
            }
            OutputValue::Color(c) if *c == 0 || *c as usize > delta + 1 => {
                return err(format!("node {v}: color {c} outside 1..={}", delta + 1))
            }
            OutputValue::EdgeColors(m) => {
                if m.len() != g.degree(v) || m.keys().any(|&u| !g.has_edge(u, v)) {
                    return err(format!("node {v}: edge predictions do not match its edges"));
                }
                for (&u, &c) in m {
                    if c == 0 || c as usize > (2 * delta).saturating_sub(1) {
                        return err(format!("edge {v} {u}: color {c} out of range"));
                    }
                    if p.get(&u).and_then(|o| o.edge_colors()).and_then(|m| m.get(&v)) != Some(&c) {
                        return err(format!("INCONSISTENT_PREDICTION on edge {v} {u}"));
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(v) = p.keys().find(|v| !g.contains(**v)) {
        return err(format!("prediction for unknown node {v}"));
    }
    Ok(())
}

fn two_hop(g: &Graph, v: NodeId) -> BTreeMap<NodeId, Vec<NodeId>> {
    g.neighbors(v)
        .iter()
        .map(|&u| (u, g.neighbors(u).iter().copied().filter(|&w| w != v).collect()))
        .collect()
}

struct Node {
    program: Box<dyn NodeProgram>,
    neighbors: Vec<NodeId>,
}

pub fn simulate(
    g: &Graph,
    tree: Option<&RootedTree>,
    factory: &dyn ProgramFactory,
    predictions: Option<&BTreeMap<NodeId, OutputValue>>,
    cfg: &SimConfig,
) -> Result<Outcome, SimError> {
    let need = factory.knowledge();
    if let Some(allowed) = cfg.allowed {
        if !allowed.covers(need) {
            return Err(SimError::Config(format!(
                "{} needs knowledge {need:?} but only {allowed:?} is granted",
                factory.name()
            )));
        }
    }
    if need.rooted && tree.is_none() {
        return Err(SimError::Config(format!("{} needs a rooted tree", factory.name())));
    }
    match (factory.prediction_kind(), predictions) {
        (Some(k), Some(p)) => check_prediction(k, g, p)?,
        (Some(_), None) => return Err(SimError::Prediction("program needs predictions".into())),
        (None, _) => {}
    }
    let params = GraphParams::of(g);
    let max_rounds = cfg
        .max_rounds
        .unwrap_or(4 * g.n() as u32 + 20 + factory.round_budget(&params).unwrap_or(0));
    if max_rounds == 0 {
        return Err(SimError::Config("max_rounds must be at least 1".into()));
    }
    let problem = factory.problem();

    let mut nodes: BTreeMap<NodeId, Node> = BTreeMap::new();
    let mut term_round = BTreeMap::new();
    let mut completed = BTreeSet::new();
    let mut outputs: BTreeMap<NodeId, OutputValue> = BTreeMap::new();
    let mut trace = cfg.trace.then(Trace::default);
    for v in g.nodes() {
        let view = NodeView {
            id: v,
            neighbors: g.neighbors(v).to_vec(),
            n: need.n.then_some(params.n),
            d: need.d.then_some(params.d),
            max_degree: need.max_degree.then_some(params.delta),
            parent: if need.rooted { tree.map(|t| t.parent(v)) } else { None },
            prediction: if factory.prediction_kind().is_some() {
                predictions.and_then(|p| p.get(&v).cloned())
            } else {
                None
            },
            two_hop: need.two_hop.then(|| two_hop(g, v)),
        };
        let program = factory.build(&view);
        if program.finished_at_start() {
            term_round.insert(v, 0);
            completed.insert(v);
            if let Some(t) = trace.as_mut() {
                t.events.push(Event { round: 0, node: v, kind: EventKind::Terminate { completed: true } });
            }
        } else {
            nodes.insert(v, Node { program, neighbors: view.neighbors });
        }
    }
    let record = |nodes: &BTreeMap<NodeId, Node>, trace: &mut Option<Trace>| {
        if let Some(t) = trace.as_mut() {
            if cfg.record_stored {
                t.stored.push(
                    nodes.iter().filter_map(|(&v, n)| n.program.stored_color().map(|c| (v, c))).collect(),
                );
            }
            if cfg.record_residuals {
                t.residuals.push(nodes.iter().map(|(&v, n)| (v, n.program.residual())).collect());
            }
        }
    };
    record(&nodes, &mut trace);

    let mut round = 0;
    while !nodes.is_empty() {
        round += 1;
        if round > max_rounds {
            return Err(SimError::NonTermination { max_rounds, active: nodes.len() });
        }
        let violation = |node: NodeId, reason: String| SimError::ProtocolViolation { round, node, reason };

        // compose, from pre-round state only
        let mut inboxes: BTreeMap<NodeId, Vec<(NodeId, Message)>> = BTreeMap::new();
        let mut round_events = Vec::new();
        for (&v, node) in nodes.iter_mut() {
            let out = node.program.compose(round);
            let mut seen = BTreeSet::new();
            for (to, msg) in out {
                if node.neighbors.binary_search(&to).is_err() {
                    return Err(violation(v, format!("sent to non-neighbor {to}")));
                }
                if !seen.insert(to) {
                    return Err(violation(v, format!("two messages to {to} in one round")));
                }
                if trace.is_some() {
                    round_events.push(Event { round, node: v, kind: EventKind::Send { to, msg: msg.clone() } });
                }
                inboxes.entry(to).or_default().push((v, msg));
            }
        }

        // deliver to active nodes and process
        let mut finished = Vec::new();
        for (&v, node) in nodes.iter_mut() {
            let inbox = Inbox::new(inboxes.remove(&v).unwrap_or_default());
            let step = node.program.process(round, &inbox).map_err(|f| violation(v, f.0))?;
            for a in &step.outputs {
                let ok_kind = matches!(
                    (problem, a),
                    (ProblemKind::Mis, Assignment::Bit(_))
                        | (ProblemKind::MaximalMatching, Assignment::Partner(_))
                        | (ProblemKind::VertexColoring, Assignment::Color(_))
                        | (ProblemKind::EdgeColoring, Assignment::Edge(..))
                );
                if !ok_kind {
                    return Err(violation(v, format!("{a:?} is not a {problem} output")));
                }
                if let Assignment::Edge(u, _) = a {
                    if node.neighbors.binary_search(u).is_err() {
                        return Err(violation(v, format!("colored non-incident edge to {u}")));
                    }
                }
                if !apply(&mut outputs, v, a) {
                    return Err(violation(v, format!("output reassigned by {a:?}")));
                }
                if trace.is_some() {
                    round_events.push(Event { round, node: v, kind: EventKind::Output(a.clone()) });
                }
            }
            match step.status {
                Status::Active => {
                    node.program.check_invariants().map_err(|f| violation(v, f.0))?;
                }
                Status::Done | Status::Handoff => {
                    let complete = match outputs.get(&v) {
                        None => false,
                        Some(OutputValue::EdgeColors(m)) => m.len() == node.neighbors.len(),
                        Some(_) => true,
                    };
                    let done = step.status == Status::Done;
                    if done && !complete {
                        return Err(violation(v, "terminated with an incomplete output".into()));
                    }
                    if done {
                        completed.insert(v);
                    }
                    term_round.insert(v, round);
                    finished.push(v);
                    if trace.is_some() {
                        round_events.push(Event { round, node: v, kind: EventKind::Terminate { completed: done } });
                    }
                }
            }
        }
        for v in finished {
            nodes.remove(&v);
        }
        if let Some(t) = trace.as_mut() {
            round_events.sort_by_key(|e| e.node);
            t.events.extend(round_events);
        }
        record(&nodes, &mut trace);
    }

    Ok(Outcome {
        outputs,
        total_rounds: term_round.values().copied().max().unwrap_or(0),
        term_round,
        completed,
        trace,
    })
}
