//! Exact solvers used as ground truth by the error measures.

use super::{Graph, GraphError, NodeId};
use std::collections::BTreeSet;

/// Largest component handled by [`alpha`] and [`tau`].
pub const ALPHA_CAP: usize = 25;
/// Largest graph handled by [`enumerate_mis`].
pub const MIS_ENUM_CAP: usize = 20;

struct Masks {
    ids: Vec<NodeId>,
    nbr: Vec<u64>,
}

fn masks(g: &Graph) -> Masks {
    let ids: Vec<NodeId> = g.nodes().collect();
    let nbr = ids
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .map(|u| 1u64 << ids.binary_search(u).unwrap())
                .fold(0, |a, b| a | b)
        })
        .collect();
    Masks { ids, nbr }
}

fn mis_size(m: &Masks, cand: u64, cur: u32, best: &mut u32) {
    if cand == 0 {
        *best = (*best).max(cur);
        return;
    }
    if cur + cand.count_ones() <= *best {
        return;
    }
    // branch on the candidate with most candidate neighbors
    let mut pick = 0;
    let mut pick_deg = 0;
    let mut rest = cand;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let deg = (m.nbr[i] & cand).count_ones();
        if deg <= 1 {
            // a vertex of degree <= 1 is in some maximum independent set
            mis_size(m, cand & !(1 << i) & !m.nbr[i], cur + 1, best);
            return;
        }
        if deg > pick_deg {
            pick = i;
            pick_deg = deg;
        }
    }
    mis_size(m, cand & !(1 << pick) & !m.nbr[pick], cur + 1, best);
    mis_size(m, cand & !(1 << pick), cur, best);
}

/// Maximum independent set size, solved exactly per component.
pub fn alpha(g: &Graph) -> Result<usize, GraphError> {
    let mut total = 0;
    for c in g.components() {
        if c.n() > ALPHA_CAP {
            return Err(GraphError::CapExceeded { size: c.n(), cap: ALPHA_CAP });
        }
        let m = masks(&c);
        let mut best = 0;
        mis_size(&m, (1u64 << c.n()) - 1, 0, &mut best);
        total += best as usize;
    }
    Ok(total)
}

/// Minimum vertex cover size, the complement of [`alpha`].
pub fn tau(g: &Graph) -> Result<usize, GraphError> {
    Ok(g.n() - alpha(g)?)
}

/// All maximal independent sets, in lexicographic order.
pub fn enumerate_mis(g: &Graph) -> Result<Vec<BTreeSet<NodeId>>, GraphError> {
    if g.n() > MIS_ENUM_CAP {
        return Err(GraphError::CapExceeded { size: g.n(), cap: MIS_ENUM_CAP });
    }
    let m = masks(g);
    let mut out = Vec::new();
    let all = if g.n() == 0 { 0 } else { (1u64 << g.n()) - 1 };
    bron_kerbosch(&m, 0, all, 0, &mut out);
    let mut sets: Vec<BTreeSet<NodeId>> = out
        .into_iter()
        .map(|r| (0..m.ids.len()).filter(|i| r >> i & 1 == 1).map(|i| m.ids[i]).collect())
        .collect();
    sets.sort();
    Ok(sets)
}

// Maximal cliques of the complement graph.
fn bron_kerbosch(m: &Masks, r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    let compat = |i: usize| !m.nbr[i] & !(1u64 << i);
    let pivot = (p | x).trailing_zeros() as usize;
    let mut todo = p & !compat(pivot);
    while todo != 0 {
        let i = todo.trailing_zeros() as usize;
        todo &= todo - 1;
        bron_kerbosch(m, r | 1 << i, p & compat(i), x & compat(i), out);
        p &= !(1 << i);
        x |= 1 << i;
    }
}
