//! Checks complete and partial outputs against the problem definitions.

use super::{Graph, NodeId};
use crate::problem::{color_limit, OutputValue, ProblemKind};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationCode {
    Independence,
    Maximality,
    Symmetry,
    Range,
    Conflict,
    Incomplete,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationCode::Independence => "INDEPENDENCE",
            ViolationCode::Maximality => "MAXIMALITY",
            ViolationCode::Symmetry => "SYMMETRY",
            ViolationCode::Range => "RANGE",
            ViolationCode::Conflict => "CONFLICT",
            ViolationCode::Incomplete => "INCOMPLETE",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub node: NodeId,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at node {}: {}", self.code, self.node, self.detail)
    }
}

fn fail(code: ViolationCode, node: NodeId, detail: impl Into<String>) -> Result<(), Violation> {
    Err(Violation { code, node, detail: detail.into() })
}

/// Checks a complete output. Every node must have a value of the right kind.
pub fn validate(
    kind: ProblemKind,
    g: &Graph,
    outputs: &BTreeMap<NodeId, OutputValue>,
) -> Result<(), Violation> {
    for v in g.nodes() {
        match outputs.get(&v) {
            // an isolated node has no edges to color
            None if kind == ProblemKind::EdgeColoring && g.degree(v) == 0 => {}
            None => return fail(ViolationCode::Incomplete, v, "no output"),
            Some(o) if o.kind() != kind => {
                return fail(ViolationCode::Range, v, format!("value {o:?} is not a {kind} output"))
            }
            Some(OutputValue::EdgeColors(m)) if m.len() != g.degree(v) => {
                return fail(ViolationCode::Incomplete, v, "uncolored incident edge")
            }
            _ => {}
        }
    }
    check(kind, g, outputs, true)
}

/// Checks that a partial output can be extended by any solution of the rest.
///
/// For edge coloring the palette agreement at both endpoints follows from
/// both endpoints seeing the same committed colors, which is what is checked.
pub fn extendable(
    kind: ProblemKind,
    g: &Graph,
    partial: &BTreeMap<NodeId, OutputValue>,
) -> Result<(), Violation> {
    for (&v, o) in partial {
        if !g.contains(v) {
            return fail(ViolationCode::Range, v, "unknown node");
        }
        if o.kind() != kind {
            return fail(ViolationCode::Range, v, format!("value {o:?} is not a {kind} output"));
        }
    }
    check(kind, g, partial, false)
}

fn check(
    kind: ProblemKind,
    g: &Graph,
    out: &BTreeMap<NodeId, OutputValue>,
    complete: bool,
) -> Result<(), Violation> {
    let delta = g.max_degree();
    match kind {
        ProblemKind::Mis => {
            let bit = |v: NodeId| out.get(&v).and_then(OutputValue::bit);
            for (&v, o) in out {
                let b = o.bit().unwrap();
                if b {
                    for &u in g.neighbors(v) {
                        match bit(u) {
                            Some(true) => {
                                return fail(ViolationCode::Independence, v, format!("neighbor {u} also outputs 1"))
                            }
                            None if !complete => {
                                return fail(ViolationCode::Maximality, v, format!("neighbor {u} of a 1-node is undecided"))
                            }
                            _ => {}
                        }
                    }
                } else if !g.neighbors(v).iter().any(|&u| bit(u) == Some(true)) {
                    return fail(ViolationCode::Maximality, v, "outputs 0 without a neighbor in the set");
                }
            }
        }
        ProblemKind::MaximalMatching => {
            let partner = |v: NodeId| out.get(&v).and_then(OutputValue::partner);
            for (&v, o) in out {
                match o.partner().unwrap() {
                    Some(u) => {
                        if !g.has_edge(u, v) {
                            return fail(ViolationCode::Range, v, format!("partner {u} is not a neighbor"));
                        }
                        if partner(u) != Some(Some(v)) {
                            return fail(ViolationCode::Symmetry, v, format!("partner {u} does not reciprocate"));
                        }
                    }
                    None => {
                        for &u in g.neighbors(v) {
                            if !matches!(partner(u), Some(Some(_))) {
                                return fail(ViolationCode::Maximality, v, format!("unmatched with unmatched neighbor {u}"));
                            }
                        }
                    }
                }
            }
        }
        ProblemKind::VertexColoring => {
            let limit = color_limit(kind, delta).unwrap();
            for (&v, o) in out {
                let c = o.color().unwrap();
                if c == 0 || c > limit {
                    return fail(ViolationCode::Range, v, format!("color {c} outside 1..={limit}"));
                }
                for &u in g.neighbors(v) {
                    if out.get(&u).and_then(OutputValue::color) == Some(c) {
                        return fail(ViolationCode::Conflict, v, format!("neighbor {u} has color {c}"));
                    }
                }
            }
        }
        ProblemKind::EdgeColoring => {
            let limit = color_limit(kind, delta).unwrap();
            for (&v, o) in out {
                let m = o.edge_colors().unwrap();
                let mut seen = BTreeMap::new();
                for (&u, &c) in m {
                    if !g.has_edge(u, v) {
                        return fail(ViolationCode::Range, v, format!("{u} is not a neighbor"));
                    }
                    if c == 0 || c > limit {
                        return fail(ViolationCode::Range, v, format!("edge to {u} has color {c} outside 1..={limit}"));
                    }
                    let other = out.get(&u).and_then(|o| o.edge_colors()).and_then(|m| m.get(&v));
                    if other != Some(&c) {
                        return fail(ViolationCode::Symmetry, v, format!("endpoint {u} disagrees on the shared edge"));
                    }
                    if let Some(w) = seen.insert(c, u) {
                        return fail(ViolationCode::Conflict, v, format!("edges to {w} and {u} share color {c}"));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::arb_graph;
    use proptest::prelude::*;

    fn path(n: u32) -> Graph {
        Graph::new(n, 1..=n, (1..n).map(|i| (i, i + 1))).unwrap()
    }

    fn bits(pairs: &[(NodeId, bool)]) -> BTreeMap<NodeId, OutputValue> {
        pairs.iter().map(|&(v, b)| (v, OutputValue::Bit(b))).collect()
    }

    #[test]
    fn mis_examples() {
        let one = Graph::new(1, [1], []).unwrap();
        assert_eq!(validate(ProblemKind::Mis, &one, &bits(&[(1, true)])), Ok(()));
        let e = path(2);
        let err = validate(ProblemKind::Mis, &e, &bits(&[(1, true), (2, true)])).unwrap_err();
        assert_eq!(err.code, ViolationCode::Independence);
        let err = validate(ProblemKind::Mis, &e, &bits(&[(1, true)])).unwrap_err();
        assert_eq!(err.code, ViolationCode::Incomplete);
        let err = validate(ProblemKind::Mis, &e, &bits(&[(1, false), (2, false)])).unwrap_err();
        assert_eq!(err.code, ViolationCode::Maximality);
    }

    #[test]
    fn mis_extendability() {
        let g = path(3);
        assert!(extendable(ProblemKind::Mis, &g, &bits(&[])).is_ok());
        assert!(extendable(ProblemKind::Mis, &g, &bits(&[(1, true)])).is_err());
        assert!(extendable(ProblemKind::Mis, &g, &bits(&[(1, true), (2, false)])).is_ok());
        assert!(extendable(ProblemKind::Mis, &g, &bits(&[(3, false)])).is_err());
    }

    #[test]
    fn matching_checks() {
        let g = path(3);
        let m = |v: &[(NodeId, Option<NodeId>)]| -> BTreeMap<_, _> {
            v.iter().map(|&(a, b)| (a, OutputValue::Partner(b))).collect()
        };
        assert!(validate(ProblemKind::MaximalMatching, &g, &m(&[(1, Some(2)), (2, Some(1)), (3, None)])).is_ok());
        let e = validate(ProblemKind::MaximalMatching, &g, &m(&[(1, Some(2)), (2, Some(3)), (3, Some(2))]));
        assert_eq!(e.unwrap_err().code, ViolationCode::Symmetry);
        let e = validate(ProblemKind::MaximalMatching, &g, &m(&[(1, None), (2, None), (3, None)]));
        assert_eq!(e.unwrap_err().code, ViolationCode::Maximality);
        assert!(extendable(ProblemKind::MaximalMatching, &g, &m(&[(3, None)])).is_err());
        assert!(extendable(ProblemKind::MaximalMatching, &g, &m(&[(2, Some(3)), (3, Some(2)), (1, None)])).is_ok());
    }

    #[test]
    fn coloring_checks() {
        let g = path(3);
        let c = |v: &[u32]| -> BTreeMap<_, _> {
            v.iter().enumerate().map(|(i, &c)| (i as u32 + 1, OutputValue::Color(c))).collect()
        };
        assert!(validate(ProblemKind::VertexColoring, &g, &c(&[1, 2, 1])).is_ok());
        assert_eq!(validate(ProblemKind::VertexColoring, &g, &c(&[1, 1, 2])).unwrap_err().code, ViolationCode::Conflict);
        assert_eq!(validate(ProblemKind::VertexColoring, &g, &c(&[1, 4, 1])).unwrap_err().code, ViolationCode::Range);

        let ec = |v: &[(NodeId, &[(NodeId, u32)])]| -> BTreeMap<_, _> {
            v.iter().map(|&(a, m)| (a, OutputValue::EdgeColors(m.iter().copied().collect()))).collect()
        };
        let ok = ec(&[(1, &[(2, 1)]), (2, &[(1, 1), (3, 2)]), (3, &[(2, 2)])]);
        assert!(validate(ProblemKind::EdgeColoring, &g, &ok).is_ok());
        let clash = ec(&[(1, &[(2, 1)]), (2, &[(1, 1), (3, 1)]), (3, &[(2, 1)])]);
        assert_eq!(validate(ProblemKind::EdgeColoring, &g, &clash).unwrap_err().code, ViolationCode::Conflict);
        let half = ec(&[(1, &[(2, 1)]), (2, &[(3, 2)]), (3, &[(2, 2)])]);
        assert_eq!(extendable(ProblemKind::EdgeColoring, &g, &half).unwrap_err().code, ViolationCode::Symmetry);
    }

    // naive double loop over all pairs
    fn naive_mis(g: &Graph, set: &[bool]) -> bool {
        let ids: Vec<NodeId> = g.nodes().collect();
        for i in 0..ids.len() {
            for j in 0..ids.len() {
                if i != j && set[i] && set[j] && g.has_edge(ids[i], ids[j]) {
                    return false;
                }
            }
        }
        (0..ids.len()).all(|i| set[i] || (0..ids.len()).any(|j| set[j] && g.has_edge(ids[i], ids[j])))
    }

    proptest! {
        #[test]
        fn mis_validator_matches_naive(g in arb_graph(12), mask in any::<u16>()) {
            let set: Vec<bool> = (0..g.n()).map(|i| mask >> i & 1 == 1).collect();
            let out = g.nodes().zip(&set).map(|(v, &b)| (v, OutputValue::Bit(b))).collect();
            prop_assert_eq!(validate(ProblemKind::Mis, &g, &out).is_ok(), naive_mis(&g, &set));
        }
    }
}
