//! Text format:
//!
//! ```text
//! n d
//! u v        # one edge, u < v
//! N v        # a node with no edges
//! P u p      # parent of u; the root is written `P r 0`
//! ```

use super::{Graph, GraphError, NodeId, RootedTree};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

fn num(tok: &str, line: usize) -> Result<u64, GraphError> {
    tok.parse()
        .map_err(|_| GraphError::MalformedLine(format!("`{tok}` is not a number")).at(line))
}

fn id(tok: &str, d: u32, line: usize) -> Result<NodeId, GraphError> {
    let v = num(tok, line)?;
    if v == 0 || v > d as u64 {
        return Err(GraphError::IdOutOfRange { id: v, d: d.into() }.at(line));
    }
    Ok(v as NodeId)
}

pub fn read_graph(text: &str) -> Result<(Graph, Option<RootedTree>), GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| GraphError::MalformedLine("empty file".into()).at(1))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 2 {
        return Err(GraphError::MalformedLine("header must be `n d`".into()).at(hl));
    }
    let n = num(h[0], hl)? as usize;
    let d = u32::try_from(num(h[1], hl)?)
        .map_err(|_| GraphError::MalformedLine("d too large".into()).at(hl))?;
    if n > d as usize {
        return Err(GraphError::MalformedLine(format!("n = {n} exceeds d = {d}")).at(hl));
    }

    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut parent: BTreeMap<NodeId, Option<NodeId>> = BTreeMap::new();
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        match t.as_slice() {
            ["P", u, p] => {
                let u = id(u, d, ln)?;
                let p = match num(p, ln)? {
                    0 => None,
                    _ => Some(id(p, d, ln)?),
                };
                if parent.insert(u, p).is_some() {
                    return Err(GraphError::DuplicateId(format!("parent of {u}")).at(ln));
                }
                nodes.insert(u);
                nodes.extend(p);
            }
            ["N", v] => {
                nodes.insert(id(v, d, ln)?);
            }
            [u, v] => {
                let (u, v) = (id(u, d, ln)?, id(v, d, ln)?);
                if u == v {
                    return Err(GraphError::SelfLoop(u).at(ln));
                }
                if !edges.insert((u.min(v), u.max(v))) {
                    return Err(GraphError::DuplicateId(format!("edge {u} {v}")).at(ln));
                }
                nodes.insert(u);
                nodes.insert(v);
            }
            _ => return Err(GraphError::MalformedLine(format!("cannot parse `{l}`")).at(ln)),
        }
    }
    if nodes.len() > n {
        return Err(GraphError::MalformedLine(format!("{} distinct ids but n = {n}", nodes.len())).at(hl));
    }
    // unmentioned nodes take the smallest free identifiers
    let mut next = 1;
    while nodes.len() < n {
        if !nodes.contains(&next) {
            nodes.insert(next);
        }
        next += 1;
    }
    let g = Graph::new(d, nodes, edges)?;
    let tree = if parent.is_empty() { None } else { Some(RootedTree::new(g.clone(), parent)?) };
    Ok((g, tree))
}

pub fn write_graph(g: &Graph, tree: Option<&RootedTree>) -> String {
    let mut s = format!("{} {}\n", g.n(), g.d());
    for v in g.nodes().filter(|&v| g.degree(v) == 0) {
        writeln!(s, "N {v}").unwrap();
    }
    for (u, v) in g.edges() {
        writeln!(s, "{u} {v}").unwrap();
    }
    if let Some(t) = tree {
        for (v, p) in t.parents() {
            writeln!(s, "P {v} {}", p.unwrap_or(0)).unwrap();
        }
    }
    s
}
