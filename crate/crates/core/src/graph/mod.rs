//! Undirected simple graphs over identifiers drawn from `1..=d`.

mod generate;
mod io;
mod oracle;
mod validate;

pub use generate::{generate, Family, IdScheme, Instance, Layout, TreeShape};
pub use io::{read_graph, write_graph};
pub use oracle::{alpha, enumerate_mis, tau, ALPHA_CAP, MIS_ENUM_CAP};
pub use validate::{extendable, validate, Violation, ViolationCode};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("DUPLICATE_ID: {0}")]
    DuplicateId(String),
    #[error("SELF_LOOP at node {0}")]
    SelfLoop(NodeId),
    #[error("ID_OUT_OF_RANGE: {id} not in 1..={d}")]
    IdOutOfRange { id: u64, d: u64 },
    #[error("MALFORMED_LINE: {0}")]
    MalformedLine(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("CAP_EXCEEDED: {size} nodes, cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not a rooted tree: {0}")]
    NotATree(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<GraphError>,
    },
}

impl GraphError {
    fn at(self, line: usize) -> Self {
        GraphError::AtLine { line, source: Box::new(self) }
    }
}

/// Immutable graph. Neighbor lists are sorted and duplicate free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    d: u32,
    adj: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Graph {
    pub fn new(
        d: u32,
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for v in nodes {
            if v == 0 || v > d {
                return Err(GraphError::IdOutOfRange { id: v.into(), d: d.into() });
            }
            if adj.insert(v, BTreeSet::new()).is_some() {
                return Err(GraphError::DuplicateId(format!("node {v}")));
            }
        }
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            for x in [u, v] {
                if !adj.contains_key(&x) {
                    return Err(GraphError::UnknownNode(x));
                }
            }
            if !adj.get_mut(&u).unwrap().insert(v) {
                return Err(GraphError::DuplicateId(format!("edge {u} {v}")));
            }
            adj.get_mut(&v).unwrap().insert(u);
        }
        Ok(Graph {
            d,
            adj: adj.into_iter().map(|(v, s)| (v, s.into_iter().collect())).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.adj.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn node_set(&self) -> BTreeSet<NodeId> {
        self.nodes().collect()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.adj.contains_key(&v)
    }

    /// Panics on an unknown node.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[&v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[&v].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj.get(&u).is_some_and(|a| a.binary_search(&v).is_ok())
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&u, a)| a.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(Vec::len).sum::<usize>() / 2
    }

    pub fn induced_subgraph(&self, keep: &BTreeSet<NodeId>) -> Result<Graph, GraphError> {
        if let Some(&v) = keep.iter().find(|v| !self.contains(**v)) {
            return Err(GraphError::UnknownNode(v));
        }
        let adj = keep
            .iter()
            .map(|&v| {
                let a = self.adj[&v].iter().copied().filter(|u| keep.contains(u)).collect();
                (v, a)
            })
            .collect();
        Ok(Graph { d: self.d, adj })
    }

    /// Subgraph made of the given edges and their endpoints only.
    pub fn edge_subgraph(&self, edges: &BTreeSet<(NodeId, NodeId)>) -> Result<Graph, GraphError> {
        let mut nodes = BTreeSet::new();
        for &(u, v) in edges {
            if !self.has_edge(u, v) {
                return Err(GraphError::UnknownNode(if self.contains(u) { v } else { u }));
            }
            nodes.insert(u);
            nodes.insert(v);
        }
        Graph::new(self.d, nodes, edges.iter().copied())
    }

    /// Connected components ordered by smallest member.
    pub fn components(&self) -> Vec<Graph> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.nodes() {
            if seen.contains(&v) {
                continue;
            }
            let comp = self.reach(v);
            seen.extend(comp.iter().copied());
            out.push(self.induced_subgraph(&comp).expect("component nodes exist"));
        }
        out
    }

    fn reach(&self, s: NodeId) -> BTreeSet<NodeId> {
        let mut comp = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &w in &self.adj[&u] {
                if comp.insert(w) {
                    stack.push(w);
                }
            }
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.adj.keys().next().is_none_or(|&s| self.reach(s).len() == self.n())
    }

    pub fn bfs_distances(&self, s: NodeId) -> BTreeMap<NodeId, usize> {
        let mut dist = BTreeMap::from([(s, 0)]);
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let du = dist[&u];
            for &w in &self.adj[&u] {
                dist.entry(w).or_insert_with(|| {
                    q.push_back(w);
                    du + 1
                });
            }
        }
        dist
    }

    pub fn diameter(&self) -> Diameter {
        let mut best = 0;
        for v in self.nodes() {
            let dist = self.bfs_distances(v);
            if dist.len() < self.n() {
                return Diameter::Infinite;
            }
            best = best.max(dist.values().copied().max().unwrap_or(0));
        }
        Diameter::Finite(best)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Diameter {
    Finite(usize),
    Infinite,
}

/// A tree where every node knows its parent. `None` marks the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedTree {
    graph: Graph,
    parent: BTreeMap<NodeId, Option<NodeId>>,
}

impl RootedTree {
    pub fn new(graph: Graph, parent: BTreeMap<NodeId, Option<NodeId>>) -> Result<Self, GraphError> {
        if parent.len() != graph.n() || graph.nodes().any(|v| !parent.contains_key(&v)) {
            return Err(GraphError::NotATree("parent map does not cover the nodes".into()));
        }
        if graph.n() > 0 && (graph.edge_count() != graph.n() - 1 || !graph.is_connected()) {
            return Err(GraphError::NotATree("graph is not a tree".into()));
        }
        let roots = parent.values().filter(|p| p.is_none()).count();
        if graph.n() > 0 && roots != 1 {
            return Err(GraphError::NotATree(format!("{roots} roots")));
        }
        for (&v, &p) in &parent {
            if let Some(p) = p {
                if !graph.has_edge(v, p) {
                    return Err(GraphError::NotATree(format!("parent {p} of {v} is not a neighbor")));
                }
            }
        }
        // n-1 parent edges in a tree with one root: check they are all distinct edges
        let mut used = BTreeSet::new();
        for (&v, &p) in &parent {
            if let Some(p) = p {
                if !used.insert((v.min(p), v.max(p))) {
                    return Err(GraphError::NotATree(format!("edge {v} {p} used twice")));
                }
            }
        }
        Ok(RootedTree { graph, parent })
    }

    /// Orients a tree away from `root`.
    pub fn from_root(graph: Graph, root: NodeId) -> Result<Self, GraphError> {
        if !graph.contains(root) {
            return Err(GraphError::UnknownNode(root));
        }
        let mut parent = BTreeMap::from([(root, None)]);
        let mut q = VecDeque::from([root]);
        while let Some(u) = q.pop_front() {
            for &w in graph.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(w) {
                    e.insert(Some(u));
                    q.push_back(w);
                }
            }
        }
        RootedTree::new(graph, parent)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[&v]
    }

    pub fn parents(&self) -> &BTreeMap<NodeId, Option<NodeId>> {
        &self.parent
    }

    pub fn root(&self) -> Option<NodeId> {
        self.parent.iter().find(|(_, p)| p.is_none()).map(|(&v, _)| v)
    }

    pub fn depth(&self, v: NodeId) -> usize {
        let mut d = 0;
        let mut cur = v;
        while let Some(p) = self.parent[&cur] {
            cur = p;
            d += 1;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: u32) -> Graph {
        Graph::new(n, 1..=n, (1..n).map(|i| (i, i + 1))).unwrap()
    }

    // union-find reference for component membership
    fn uf_components(g: &Graph) -> BTreeSet<BTreeSet<NodeId>> {
        let ids: Vec<NodeId> = g.nodes().collect();
        let idx = |v: NodeId| ids.iter().position(|&x| x == v).unwrap();
        let mut p: Vec<usize> = (0..ids.len()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for (u, v) in g.edges() {
            let (a, b) = (find(&mut p, idx(u)), find(&mut p, idx(v)));
            p[a] = b;
        }
        let mut groups: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
        for (i, &v) in ids.iter().enumerate() {
            let r = find(&mut p, i);
            groups.entry(r).or_default().insert(v);
        }
        groups.into_values().collect()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(Graph::new(3, [1, 1], []), Err(GraphError::DuplicateId("node 1".into())));
        assert_eq!(Graph::new(3, [1, 2], [(2, 2)]), Err(GraphError::SelfLoop(2)));
        assert!(matches!(Graph::new(3, [4], []), Err(GraphError::IdOutOfRange { .. })));
        assert!(matches!(Graph::new(3, [0], []), Err(GraphError::IdOutOfRange { .. })));
        assert!(Graph::new(3, [1, 2], [(1, 2), (2, 1)]).is_err());
    }

    #[test]
    fn components_examples() {
        assert!(Graph::new(1, [], []).unwrap().components().is_empty());
        assert_eq!(path(5).components().len(), 1);
        let g = Graph::new(9, [1, 2, 7, 9], [(1, 9), (2, 7)]).unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].node_set(), BTreeSet::from([1, 9]));
        assert_eq!(comps[1].node_set(), BTreeSet::from([2, 7]));
        let got: BTreeSet<_> = comps.iter().map(Graph::node_set).collect();
        assert_eq!(got, uf_components(&g));
    }

    #[test]
    fn induced_subgraph_examples() {
        let g = path(5);
        assert_eq!(g.induced_subgraph(&g.node_set()).unwrap(), g);
        let h = g.induced_subgraph(&BTreeSet::from([1, 3, 5])).unwrap();
        assert_eq!((h.n(), h.edge_count(), h.d()), (3, 0, 5));
        assert_eq!(g.induced_subgraph(&BTreeSet::from([6])), Err(GraphError::UnknownNode(6)));
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(Graph::new(1, [1], []).unwrap().diameter(), Diameter::Finite(0));
        assert_eq!(path(5).diameter(), Diameter::Finite(4));
        assert_eq!(Graph::new(2, [1, 2], []).unwrap().diameter(), Diameter::Infinite);
    }

    #[test]
    fn rooted_tree_checks() {
        let t = RootedTree::from_root(path(4), 1).unwrap();
        assert_eq!(t.parent(4), Some(3));
        assert_eq!(t.depth(4), 3);
        assert_eq!(t.root(), Some(1));
        let mut bad = t.parents().clone();
        bad.insert(1, Some(2));
        assert!(RootedTree::new(path(4), bad).is_err());
        let cyc = Graph::new(3, 1..=3, [(1, 2), (2, 3), (1, 3)]).unwrap();
        assert!(RootedTree::from_root(cyc, 1).is_err());
    }

    use proptest::prelude::*;

    pub(crate) fn arb_graph(max_n: u32) -> impl Strategy<Value = Graph> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs: Vec<(u32, u32)> =
                (1..=n).flat_map(|u| (u + 1..=n).map(move |v| (u, v))).collect();
            let k = pairs.len();
            proptest::collection::vec(any::<bool>(), k).prop_map(move |mask| {
                let e = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(&p, _)| p);
                Graph::new(n, 1..=n, e).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn components_partition_nodes(g in arb_graph(12)) {
            let comps = g.components();
            let mut all = BTreeSet::new();
            for c in &comps {
                prop_assert!(c.is_connected());
                for v in c.nodes() {
                    prop_assert!(all.insert(v));
                }
            }
            prop_assert_eq!(&all, &g.node_set());
            for (i, a) in comps.iter().enumerate() {
                for b in &comps[i + 1..] {
                    for u in a.nodes() {
                        for v in b.nodes() {
                            prop_assert!(!g.has_edge(u, v));
                        }
                    }
                }
            }
            let got: BTreeSet<_> = comps.iter().map(Graph::node_set).collect();
            prop_assert_eq!(got, uf_components(&g));
        }

        #[test]
        fn adjacency_is_symmetric_and_sorted(g in arb_graph(12)) {
            for v in g.nodes() {
                let a = g.neighbors(v);
                prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
                for &u in a {
                    prop_assert!(g.has_edge(u, v));
                    prop_assert_ne!(u, v);
                }
            }
            let max = g.nodes().map(|v| g.degree(v)).max().unwrap_or(0);
            prop_assert_eq!(max, g.max_degree());
        }
    }

}

#[cfg(test)]
pub(crate) use tests::arb_graph;
