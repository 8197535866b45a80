//! Instance generators for the graph families used in experiments.

use super::{Graph, GraphError, NodeId, RootedTree};
use crate::rng::{stream_rng, Stream};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Line { n: usize },
    /// Wheel with `k` rim nodes and a subdivided spoke for every rim node.
    Wheel { k: usize },
    Grid { rows: usize, cols: usize },
    Random { n: usize, p: f64, connected: bool },
    Tree { n: usize, shape: TreeShape },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeShape {
    Random,
    Path,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum IdScheme {
    #[default]
    Increasing,
    SeededPermutation,
}

/// Where each node sits in its family's drawing, used by prediction patterns.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    Line { order: Vec<NodeId> },
    Wheel { hub: NodeId, spokes: Vec<NodeId>, rim: Vec<NodeId> },
    Grid { cell: BTreeMap<NodeId, (usize, usize)> },
    Random,
    Tree,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub family: &'static str,
    pub graph: Graph,
    pub tree: Option<RootedTree>,
    pub layout: Layout,
}

impl Instance {
    /// Wraps an arbitrary graph, e.g. one read from a file.
    pub fn plain(graph: Graph, tree: Option<RootedTree>) -> Self {
        let layout = if tree.is_some() { Layout::Tree } else { Layout::Random };
        Instance { family: "file", graph, tree, layout }
    }
}

const MAX_CONNECT_ATTEMPTS: usize = 10_000;

/// Builds an instance. `d` defaults to the node count.
pub fn generate(
    family: Family,
    ids: IdScheme,
    d: Option<u32>,
    seed: u64,
) -> Result<Instance, GraphError> {
    let (name, n, edges, parent) = positional(family, seed)?;
    let d = d.unwrap_or(n as u32);
    if (d as usize) < n {
        return Err(GraphError::InvalidParameter(format!("d = {d} is smaller than n = {n}")));
    }
    let id_of: Vec<NodeId> = match ids {
        IdScheme::Increasing => (1..=n as u32).collect(),
        IdScheme::SeededPermutation => {
            let mut rng = stream_rng(seed, Stream::Identifiers);
            index::sample(&mut rng, d as usize, n).into_iter().map(|i| i as u32 + 1).collect()
        }
    };
    let graph = Graph::new(d, id_of.iter().copied(), edges.iter().map(|&(a, b)| (id_of[a], id_of[b])))?;
    let tree = match parent {
        Some(par) => {
            let map = par.iter().enumerate().map(|(i, p)| (id_of[i], p.map(|p| id_of[p]))).collect();
            Some(RootedTree::new(graph.clone(), map)?)
        }
        None => None,
    };
    let layout = match family {
        Family::Line { .. } => Layout::Line { order: id_of.clone() },
        Family::Wheel { k } => Layout::Wheel {
            hub: id_of[0],
            spokes: id_of[1..=k].to_vec(),
            rim: id_of[k + 1..].to_vec(),
        },
        Family::Grid { cols, .. } => Layout::Grid {
            cell: id_of.iter().enumerate().map(|(i, &v)| (v, (i / cols, i % cols))).collect(),
        },
        Family::Random { .. } => Layout::Random,
        Family::Tree { .. } => Layout::Tree,
    };
    Ok(Instance { family: name, graph, tree, layout })
}

type Positional = (&'static str, usize, Vec<(usize, usize)>, Option<Vec<Option<usize>>>);

fn positional(family: Family, seed: u64) -> Result<Positional, GraphError> {
    let bad = |m: &str| Err(GraphError::InvalidParameter(m.into()));
    Ok(match family {
        Family::Line { n } => {
            if n == 0 {
                return bad("line needs n >= 1");
            }
            let parent = (0..n).map(|i| i.checked_sub(1)).collect();
            ("line", n, (1..n).map(|i| (i - 1, i)).collect(), Some(parent))
        }
        Family::Wheel { k } => {
            if k < 3 {
                return bad("wheel needs k >= 3");
            }
            let mut e = Vec::new();
            for i in 0..k {
                e.push((0, 1 + i));
                e.push((1 + i, k + 1 + i));
                e.push((k + 1 + i, k + 1 + (i + 1) % k));
            }
            ("wheel", 2 * k + 1, e, None)
        }
        Family::Grid { rows, cols } => {
            if rows == 0 || cols == 0 {
                return bad("grid needs positive dimensions");
            }
            let mut e = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    if c + 1 < cols {
                        e.push((i, i + 1));
                    }
                    if r + 1 < rows {
                        e.push((i, i + cols));
                    }
                }
            }
            ("grid", rows * cols, e, None)
        }
        Family::Random { n, p, connected } => {
            if n == 0 {
                return bad("random graph needs n >= 1");
            }
            if !(0.0..=1.0).contains(&p) {
                return bad("edge probability must lie in [0, 1]");
            }
            let mut rng = stream_rng(seed, Stream::Edges);
            for _ in 0..MAX_CONNECT_ATTEMPTS {
                let mut e = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        if rng.gen_bool(p) {
                            e.push((u, v));
                        }
                    }
                }
                if !connected || is_connected(n, &e) {
                    return Ok(("random", n, e, None));
                }
            }
            return bad("could not draw a connected graph; raise p");
        }
        Family::Tree { n, shape } => {
            if n == 0 {
                return bad("tree needs n >= 1");
            }
            let mut rng = stream_rng(seed, Stream::Tree);
            let parent: Vec<Option<usize>> = (0..n)
                .map(|i| match (i, shape) {
                    (0, _) => None,
                    (_, TreeShape::Path) => Some(i - 1),
                    (_, TreeShape::Random) => Some(rng.gen_range(0..i)),
                })
                .collect();
            // relabel positions so ids are not correlated with depth
            let mut perm: Vec<usize> = (0..n).collect();
            if shape == TreeShape::Random {
                perm[1..].shuffle(&mut rng);
            }
            let edges = (1..n).map(|i| (perm[i].min(perm[parent[i].unwrap()]), perm[i].max(perm[parent[i].unwrap()])));
            let mut par = vec![None; n];
            for i in 1..n {
                par[perm[i]] = Some(perm[parent[i].unwrap()]);
            }
            ("tree", n, edges.collect(), Some(par))
        }
    })
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0];
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}
