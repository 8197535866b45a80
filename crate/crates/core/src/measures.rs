//! Error components, error measures and prediction generators.

use crate::engine::{simulate, SimConfig, SimError};
use crate::graph::{alpha, enumerate_mis, tau, Graph, GraphError, Instance, Layout, NodeId, RootedTree};
use crate::problem::{color_limit, OutputValue, ProblemKind};
use crate::programs::Standalone;
use crate::rng::{stream_rng, Stream};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("pattern {pattern} does not fit: {why}")]
    Pattern { pattern: &'static str, why: String },
    #[error("cannot corrupt {k} of {n} nodes")]
    TooMany { k: usize, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    General,
    /// Nodes predicted 1.
    Black,
    /// Nodes predicted 0.
    White,
    /// Built from uncolored edges.
    EdgeInduced,
}

#[derive(Clone, Debug)]
pub struct ErrorComponent {
    pub graph: Graph,
    pub kind: ComponentKind,
}

fn base_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Mis => "mis.base",
        ProblemKind::MaximalMatching => "mm.base",
        ProblemKind::VertexColoring => "vc.base",
        ProblemKind::EdgeColoring => "ec.base",
    }
}

/// Nodes left undecided by the base algorithm, and its outputs.
fn run_base(
    kind: ProblemKind,
    g: &Graph,
    p: &BTreeMap<NodeId, OutputValue>,
) -> Result<(BTreeSet<NodeId>, BTreeMap<NodeId, OutputValue>), MeasureError> {
    let f = Standalone::named(base_name(kind)).expect("base programs are registered");
    let out = simulate(g, None, &f, Some(p), &SimConfig::default())?;
    Ok((out.undecided(), out.outputs))
}

/// Components left by the problem's base algorithm.
pub fn error_components(
    kind: ProblemKind,
    g: &Graph,
    p: &BTreeMap<NodeId, OutputValue>,
) -> Result<Vec<ErrorComponent>, MeasureError> {
    let (active, outputs) = run_base(kind, g, p)?;
    if kind == ProblemKind::EdgeColoring {
        let colored = |u: NodeId, v: NodeId| outputs.get(&u).and_then(|o| o.edge_colors()).is_some_and(|m| m.contains_key(&v));
        let edges: BTreeSet<(NodeId, NodeId)> = g.edges().filter(|&(u, v)| !colored(u, v)).collect();
        let sub = g.edge_subgraph(&edges)?;
        return Ok(sub
            .components()
            .into_iter()
            .map(|graph| ErrorComponent { graph, kind: ComponentKind::EdgeInduced })
            .collect());
    }
    Ok(g.induced_subgraph(&active)?
        .components()
        .into_iter()
        .map(|graph| ErrorComponent { graph, kind: ComponentKind::General })
        .collect())
}

pub fn mu1(s: &Graph) -> usize {
    s.n()
}

pub fn mu2(s: &Graph) -> Result<usize, GraphError> {
    Ok(2 * alpha(s)?.min(tau(s)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Mu1,
    Mu2,
}

fn max_over(comps: &[ErrorComponent], m: Measure) -> Result<usize, GraphError> {
    comps.iter().try_fold(0, |acc, c| {
        let v = match m {
            Measure::Mu1 => mu1(&c.graph),
            Measure::Mu2 => mu2(&c.graph)?,
        };
        Ok(acc.max(v))
    })
}

pub fn eta(m: Measure, kind: ProblemKind, g: &Graph, p: &BTreeMap<NodeId, OutputValue>) -> Result<usize, MeasureError> {
    Ok(max_over(&error_components(kind, g, p)?, m)?)
}

fn bit(p: &BTreeMap<NodeId, OutputValue>, v: NodeId) -> bool {
    p.get(&v).and_then(OutputValue::bit).unwrap_or_else(|| panic!("node {v} lacks an MIS prediction"))
}

/// Black and white components among the nodes the MIS base algorithm leaves.
pub fn bw_components(g: &Graph, p: &BTreeMap<NodeId, OutputValue>) -> Result<Vec<ErrorComponent>, MeasureError> {
    let (active, _) = run_base(ProblemKind::Mis, g, p)?;
    let mut out = Vec::new();
    for (black, kind) in [(true, ComponentKind::Black), (false, ComponentKind::White)] {
        let keep: BTreeSet<NodeId> = active.iter().copied().filter(|&v| bit(p, v) == black).collect();
        out.extend(g.induced_subgraph(&keep)?.components().into_iter().map(|graph| ErrorComponent { graph, kind }));
    }
    Ok(out)
}

pub fn eta_bw(g: &Graph, p: &BTreeMap<NodeId, OutputValue>) -> Result<usize, MeasureError> {
    Ok(bw_components(g, p)?.iter().map(|c| c.graph.n()).max().unwrap_or(0))
}

/// Most nodes on a monochromatic parent path among the nodes the base
/// algorithm leaves; 0 when it leaves none.
pub fn eta_t(t: &RootedTree, p: &BTreeMap<NodeId, OutputValue>) -> Result<usize, MeasureError> {
    let (active, _) = run_base(ProblemKind::Mis, t.graph(), p)?;
    let mut best = 0;
    for &v in &active {
        let mut len = 1;
        let mut cur = v;
        while let Some(u) = t.parent(cur) {
            if !active.contains(&u) || bit(p, u) != bit(p, v) {
                break;
            }
            len += 1;
            cur = u;
        }
        best = best.max(len);
    }
    Ok(best)
}

/// Fewest prediction changes that give an MIS, solved per component.
pub fn eta_hamming(g: &Graph, p: &BTreeMap<NodeId, OutputValue>) -> Result<usize, MeasureError> {
    let mut total = 0;
    for c in g.components() {
        let best = enumerate_mis(&c)?
            .iter()
            .map(|m| c.nodes().filter(|&v| bit(p, v) != m.contains(&v)).count())
            .min()
            .unwrap_or(0);
        total += best;
    }
    Ok(total)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ErrorReport {
    pub components: usize,
    pub eta1: usize,
    /// `None` when a component is too large for the exact oracles.
    pub eta2: Option<usize>,
    pub eta_bw: Option<usize>,
    pub eta_t: Option<usize>,
    pub eta_h: Option<usize>,
}

pub fn report(
    kind: ProblemKind,
    g: &Graph,
    tree: Option<&RootedTree>,
    p: &BTreeMap<NodeId, OutputValue>,
) -> Result<ErrorReport, MeasureError> {
    let comps = error_components(kind, g, p)?;
    let capped = |r: Result<usize, MeasureError>| match r {
        Ok(x) => Ok(Some(x)),
        Err(MeasureError::Graph(GraphError::CapExceeded { .. })) => Ok(None),
        Err(e) => Err(e),
    };
    let mis = kind == ProblemKind::Mis;
    Ok(ErrorReport {
        components: comps.len(),
        eta1: max_over(&comps, Measure::Mu1)?,
        eta2: capped(max_over(&comps, Measure::Mu2).map_err(MeasureError::from))?,
        eta_bw: if mis { Some(eta_bw(g, p)?) } else { None },
        eta_t: match tree {
            Some(t) if mis => Some(eta_t(t, p)?),
            _ => None,
        },
        eta_h: if mis { capped(eta_hamming(g, p))? } else { None },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    AllOnes,
    AllZeros,
    /// 2×2 checkerboard blocks on a grid.
    Grid4Block,
    /// White at depths divisible by 3 on a rooted line.
    Mod3Line,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Solve, then re-randomize the outputs of `k` seeded nodes.
    Corrupt { k: usize, seed: u64 },
    Pattern(Pattern),
}

fn solver(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Mis => "mis.greedy",
        ProblemKind::MaximalMatching => "mm.uniform",
        ProblemKind::VertexColoring => "vc.uniform",
        ProblemKind::EdgeColoring => "ec.uniform",
    }
}

/// A correct solution from the problem's measure-uniform program.
pub fn solve(kind: ProblemKind, g: &Graph) -> Result<BTreeMap<NodeId, OutputValue>, MeasureError> {
    let f = Standalone::named(solver(kind)).expect("solvers are registered");
    let mut out = simulate(g, None, &f, None, &SimConfig::default())?.outputs;
    if kind == ProblemKind::EdgeColoring {
        for v in g.nodes() {
            out.entry(v).or_insert_with(|| OutputValue::EdgeColors(BTreeMap::new()));
        }
    }
    Ok(out)
}

pub fn make_predictions(
    kind: ProblemKind,
    inst: &Instance,
    source: Source,
) -> Result<BTreeMap<NodeId, OutputValue>, MeasureError> {
    let g = &inst.graph;
    match source {
        Source::Corrupt { k, seed } => {
            if k > g.n() {
                return Err(MeasureError::TooMany { k, n: g.n() });
            }
            let mut p = solve(kind, g)?;
            let nodes: Vec<NodeId> = g.nodes().collect();
            let mut rng = stream_rng(seed, Stream::Corruption);
            let mut picked: Vec<NodeId> = index::sample(&mut rng, nodes.len(), k).into_iter().map(|i| nodes[i]).collect();
            picked.sort_unstable();
            for v in picked {
                corrupt(kind, g, &mut p, v, &mut rng);
            }
            Ok(p)
        }
        Source::Pattern(pat) => pattern(kind, inst, pat),
    }
}

fn corrupt(kind: ProblemKind, g: &Graph, p: &mut BTreeMap<NodeId, OutputValue>, v: NodeId, rng: &mut impl Rng) {
    let delta = g.max_degree();
    match kind {
        ProblemKind::Mis => {
            let b = bit(p, v);
            p.insert(v, OutputValue::Bit(!b));
        }
        ProblemKind::MaximalMatching => {
            let cur = p[&v].partner().flatten();
            let options: Vec<Option<NodeId>> =
                std::iter::once(None).chain(g.neighbors(v).iter().map(|&u| Some(u))).filter(|&o| o != cur).collect();
            if let Some(&o) = options.choose(rng) {
                p.insert(v, OutputValue::Partner(o));
            }
        }
        ProblemKind::VertexColoring => {
            let cur = p[&v].color().unwrap_or(0);
            let options: Vec<u32> = (1..=color_limit(kind, delta).unwrap()).filter(|&c| c != cur).collect();
            if let Some(&c) = options.choose(rng) {
                p.insert(v, OutputValue::Color(c));
            }
        }
        ProblemKind::EdgeColoring => {
            let Some(&u) = g.neighbors(v).choose(rng) else { return };
            let cur = p[&v].edge_colors().and_then(|m| m.get(&u).copied()).unwrap_or(0);
            let options: Vec<u32> = (1..=color_limit(kind, delta).unwrap()).filter(|&c| c != cur).collect();
            if let Some(&c) = options.choose(rng) {
                for (a, b) in [(v, u), (u, v)] {
                    if let Some(OutputValue::EdgeColors(m)) = p.get_mut(&a) {
                        m.insert(b, c);
                    }
                }
            }
        }
    }
}

fn pattern(kind: ProblemKind, inst: &Instance, pat: Pattern) -> Result<BTreeMap<NodeId, OutputValue>, MeasureError> {
    let name = match pat {
        Pattern::AllOnes => "all_ones",
        Pattern::AllZeros => "all_zeros",
        Pattern::Grid4Block => "grid_4block",
        Pattern::Mod3Line => "mod3_line",
    };
    let err = |why: &str| MeasureError::Pattern { pattern: name, why: why.to_string() };
    if kind != ProblemKind::Mis {
        return Err(err("patterns are MIS predictions"));
    }
    let g = &inst.graph;
    let bits: BTreeMap<NodeId, bool> = match pat {
        Pattern::AllOnes => g.nodes().map(|v| (v, true)).collect(),
        Pattern::AllZeros => g.nodes().map(|v| (v, false)).collect(),
        Pattern::Grid4Block => {
            let Layout::Grid { cell } = &inst.layout else { return Err(err("needs a grid")) };
            cell.iter().map(|(&v, &(i, j))| (v, (i % 4 < 2) == (j % 4 < 2))).collect()
        }
        Pattern::Mod3Line => {
            let t = inst.tree.as_ref().ok_or_else(|| err("needs a rooted tree"))?;
            if t.graph().max_degree() > 2 {
                return Err(err("needs a line"));
            }
            g.nodes().map(|v| (v, t.depth(v) % 3 != 0)).collect()
        }
    };
    Ok(bits.into_iter().map(|(v, b)| (v, OutputValue::Bit(b))).collect())
}

pub fn parse_pattern(s: &str) -> Option<Pattern> {
    match s {
        "all_ones" => Some(Pattern::AllOnes),
        "all_zeros" => Some(Pattern::AllZeros),
        "grid_4block" => Some(Pattern::Grid4Block),
        "mod3_line" => Some(Pattern::Mod3Line),
        _ => None,
    }
}
