//! Node programs and the name registry.
//!
//! Every program is written as a stage: it starts from a [`Residual`] (what
//! the node knows about its still-active surroundings) and can hand an
//! updated residual to whatever runs next. Run on its own, a stage starts
//! from [`Residual::fresh`].

pub mod coloring;
pub mod ecolor;
pub mod matching;
pub mod mis;
pub mod tree;
pub mod vcolor;

use crate::engine::{
    GraphParams, Inbox, Knowledge, Message, NodeProgram, NodeView, Outbox, ProgramFactory, Status, Step,
};
use crate::graph::NodeId;
use crate::problem::{OutputValue, ProblemKind};
use std::collections::{BTreeMap, BTreeSet};

/// Node-local knowledge passed between stages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Residual {
    /// Neighbors believed to be active (edge coloring: across uncolored edges).
    pub active: BTreeSet<NodeId>,
    /// Tree parent, while it is active.
    pub parent: Option<NodeId>,
    /// MIS: a neighbor joined the set and this node still owes its 0.
    pub dominated: bool,
    /// Matching: partner chosen but not yet announced.
    pub matched_to: Option<NodeId>,
    /// MIS predictions of the neighbors, once exchanged.
    pub neighbor_bits: Option<BTreeMap<NodeId, bool>>,
    /// Vertex coloring palette.
    pub palette: BTreeSet<u32>,
    /// Edge coloring palette per uncolored edge.
    pub edge_palettes: BTreeMap<NodeId, BTreeSet<u32>>,
    /// Edge colors this node has output.
    pub used_colors: BTreeSet<u32>,
    /// Edge colors output since they were last announced.
    pub unannounced: BTreeSet<u32>,
    /// Uncolored neighbors of each uncolored neighbor, excluding this node.
    pub two_hop: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// Locally stored color, 1-based.
    pub color: Option<u32>,
    pub neighbor_colors: BTreeMap<NodeId, u32>,
}

impl Residual {
    pub fn fresh(view: &NodeView, problem: ProblemKind) -> Self {
        let mut r = Residual {
            active: view.neighbors.iter().copied().collect(),
            parent: view.tree_parent(),
            ..Default::default()
        };
        match problem {
            ProblemKind::VertexColoring => {
                if let Some(delta) = view.max_degree {
                    r.palette = (1..=delta as u32 + 1).collect();
                }
            }
            ProblemKind::EdgeColoring => {
                if let Some(delta) = view.max_degree {
                    let pal: BTreeSet<u32> = (1..2 * delta as u32).collect();
                    r.edge_palettes = view.neighbors.iter().map(|&u| (u, pal.clone())).collect();
                }
                if let Some(th) = &view.two_hop {
                    r.two_hop = th.iter().map(|(&u, w)| (u, w.iter().copied().collect())).collect();
                }
            }
            _ => {}
        }
        if let Some(OutputValue::Color(c)) = view.prediction {
            r.color = Some(c);
        }
        r
    }

    /// Drops a neighbor that terminated (or an edge that got colored).
    pub fn forget(&mut self, v: NodeId) {
        self.active.remove(&v);
        if self.parent == Some(v) {
            self.parent = None;
        }
        self.edge_palettes.remove(&v);
        self.two_hop.remove(&v);
        self.neighbor_colors.remove(&v);
    }

    pub fn is_local_max(&self, id: NodeId) -> bool {
        self.active.iter().all(|&u| u < id)
    }

    pub fn is_local_min(&self, id: NodeId) -> bool {
        self.active.iter().all(|&u| u > id)
    }

    pub fn children(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.active.iter().copied().filter(move |&u| Some(u) != self.parent)
    }
}

pub(crate) fn broadcast<'a>(to: impl IntoIterator<Item = &'a NodeId>, m: Message) -> Outbox {
    to.into_iter().map(|&u| (u, m.clone())).collect()
}

/// Whether a part-1 coloring outputs its colors or only stores them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Output,
    Store,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Init,
    Uniform,
    Cleanup,
    Part1,
    Part2,
}

#[derive(Clone, Copy, Debug)]
pub enum Length {
    Fixed(u32),
    Computed(fn(&GraphParams) -> u32),
    /// Runs until every node terminates.
    Open,
}

impl Length {
    pub fn rounds(&self, p: &GraphParams) -> Option<u32> {
        match self {
            Length::Fixed(r) => Some(*r),
            Length::Computed(f) => Some(f(p)),
            Length::Open => None,
        }
    }
}

pub type Builder = fn(&NodeView, Residual, Mode) -> Box<dyn NodeProgram>;

/// Registry metadata for one program.
#[derive(Clone, Copy)]
pub struct Entry {
    pub name: &'static str,
    pub problem: ProblemKind,
    pub role: Role,
    pub knowledge: Knowledge,
    /// Kind of prediction the program reads when run from scratch.
    pub predictions: Option<ProblemKind>,
    /// The partial output is extendable after every multiple of this many rounds.
    pub phase: Option<u32>,
    pub fault_tolerant: bool,
    pub length: Length,
    pub build: Builder,
}

impl std::fmt::Debug for Entry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

const K_NONE: Knowledge = Knowledge::NONE;
const K_DELTA: Knowledge = Knowledge { max_degree: true, ..Knowledge::NONE };
const K_DELTA_D: Knowledge = Knowledge { max_degree: true, d: true, ..Knowledge::NONE };
const K_TREE: Knowledge = Knowledge { rooted: true, ..Knowledge::NONE };
const K_TREE_D: Knowledge = Knowledge { rooted: true, d: true, ..Knowledge::NONE };
const K_EC: Knowledge = Knowledge { max_degree: true, two_hop: true, ..Knowledge::NONE };

macro_rules! entry {
    ($name:expr, $p:ident, $role:ident, $k:expr, $pred:expr, $phase:expr, $ft:expr, $len:expr, $b:expr) => {
        Entry {
            name: $name,
            problem: ProblemKind::$p,
            role: Role::$role,
            knowledge: $k,
            predictions: $pred,
            phase: $phase,
            fault_tolerant: $ft,
            length: $len,
            build: $b,
        }
    };
}

const MIS: Option<ProblemKind> = Some(ProblemKind::Mis);
const MM: Option<ProblemKind> = Some(ProblemKind::MaximalMatching);
const VC: Option<ProblemKind> = Some(ProblemKind::VertexColoring);
const EC: Option<ProblemKind> = Some(ProblemKind::EdgeColoring);

fn part2_len(p: &GraphParams) -> u32 {
    p.delta.max(1) as u32
}

pub static REGISTRY: &[Entry] = &[
    entry!("mis.base", Mis, Init, K_NONE, MIS, None, false, Length::Fixed(3), mis::build_base),
    entry!("mis.init", Mis, Init, K_NONE, MIS, None, false, Length::Fixed(3), mis::build_init),
    entry!("mis.greedy", Mis, Uniform, K_NONE, None, Some(2), false, Length::Open, mis::build_greedy),
    entry!("mis.greedy_min", Mis, Uniform, K_NONE, None, Some(2), false, Length::Open, mis::build_greedy_min),
    entry!("mis.cleanup", Mis, Cleanup, K_NONE, None, None, false, Length::Fixed(1), mis::build_cleanup),
    entry!("mis.color_part2", Mis, Part2, K_DELTA, VC, None, false, Length::Computed(part2_len), mis::build_part2),
    entry!(
        "mis.color_part2_combined",
        Mis,
        Part2,
        K_DELTA,
        VC,
        None,
        false,
        Length::Computed(part2_len),
        mis::build_part2_combined
    ),
    entry!("mis.u_bw", Mis, Uniform, K_NONE, MIS, Some(2), false, Length::Open, mis::build_u_bw),
    entry!("mis.tree_init", Mis, Init, K_TREE, MIS, None, false, Length::Fixed(4), tree::build_init),
    entry!("mis.tree_uniform", Mis, Uniform, K_TREE, None, Some(2), false, Length::Open, tree::build_uniform),
    entry!(
        "mis.tree_gps",
        VertexColoring,
        Part1,
        K_TREE_D,
        None,
        None,
        true,
        Length::Computed(coloring::gps_len),
        coloring::build_gps
    ),
    entry!("mis.tree_part2", Mis, Part2, K_NONE, VC, None, false, Length::Fixed(2), tree::build_part2),
    entry!("mm.base", MaximalMatching, Init, K_NONE, MM, None, false, Length::Fixed(2), matching::build_base),
    entry!("mm.init", MaximalMatching, Init, K_NONE, MM, None, false, Length::Fixed(2), matching::build_init),
    entry!("mm.uniform", MaximalMatching, Uniform, K_NONE, None, Some(3), false, Length::Open, matching::build_uniform),
    entry!("mm.cleanup", MaximalMatching, Cleanup, K_NONE, None, None, false, Length::Fixed(1), matching::build_cleanup),
    entry!("vc.base", VertexColoring, Init, K_DELTA, VC, None, false, Length::Fixed(2), vcolor::build_base),
    entry!("vc.init", VertexColoring, Init, K_DELTA, VC, None, false, Length::Fixed(2), vcolor::build_init),
    entry!("vc.uniform", VertexColoring, Uniform, K_DELTA, None, Some(1), false, Length::Open, vcolor::build_uniform),
    entry!(
        "vc.linial",
        VertexColoring,
        Part1,
        K_DELTA_D,
        None,
        None,
        true,
        Length::Computed(coloring::linial_len),
        coloring::build_linial
    ),
    entry!("ec.base", EdgeColoring, Init, K_DELTA, EC, None, false, Length::Fixed(2), ecolor::build_base),
    entry!("ec.uniform", EdgeColoring, Uniform, K_EC, None, Some(2), false, Length::Open, ecolor::build_uniform),
    entry!("ec.cleanup", EdgeColoring, Cleanup, K_DELTA, None, None, false, Length::Fixed(1), ecolor::build_cleanup),
];

pub fn lookup(name: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Runs a registry program from scratch. A stage that is still active
/// when its fixed length runs out stops without output.
#[derive(Clone, Copy, Debug)]
pub struct Standalone(pub &'static Entry);

impl Standalone {
    pub fn named(name: &str) -> Option<Self> {
        lookup(name).map(Standalone)
    }
}

impl ProgramFactory for Standalone {
    fn name(&self) -> String {
        self.0.name.to_string()
    }
    fn problem(&self) -> ProblemKind {
        self.0.problem
    }
    fn knowledge(&self) -> Knowledge {
        self.0.knowledge
    }
    fn prediction_kind(&self) -> Option<ProblemKind> {
        self.0.predictions
    }
    fn round_budget(&self, p: &GraphParams) -> Option<u32> {
        self.0.length.rounds(p)
    }
    fn build(&self, view: &NodeView) -> Box<dyn NodeProgram> {
        let len = match self.0.length {
            Length::Fixed(r) => Some(r),
            Length::Computed(_) => None, // the program knows its own length
            Length::Open => None,
        };
        let inner = (self.0.build)(view, Residual::fresh(view, self.0.problem), Mode::Output);
        Box::new(Bounded { inner, len })
    }
}

/// Turns "still active at the last round" into a handoff.
pub(crate) struct Bounded {
    pub inner: Box<dyn NodeProgram>,
    pub len: Option<u32>,
}

impl NodeProgram for Bounded {
    fn compose(&mut self, round: u32) -> Outbox {
        self.inner.compose(round)
    }
    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, crate::engine::Fault> {
        let mut step = self.inner.process(round, inbox)?;
        if step.status == Status::Active && Some(round) == self.len {
            step.status = Status::Handoff;
        }
        Ok(step)
    }
    fn residual(&self) -> Residual {
        self.inner.residual()
    }
    fn stored_color(&self) -> Option<u64> {
        self.inner.stored_color()
    }
    fn check_invariants(&self) -> Result<(), crate::engine::Fault> {
        self.inner.check_invariants()
    }
    fn finished_at_start(&self) -> bool {
        self.inner.finished_at_start()
    }
}
