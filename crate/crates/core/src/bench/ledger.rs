//! Round bounds each run is checked against.
//!
//! `f` is the round bound of a measure-uniform program in terms of the error
//! measures. A missing measure falls back to η1, which bounds all of them.

use super::config::Algorithm;
use crate::engine::GraphParams;
use crate::measures::ErrorReport;
use crate::programs::{Entry, Length};
use crate::templates::{Template, TemplateSpec};

/// Error measures a bound may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Measures {
    pub eta1: usize,
    pub eta2: Option<usize>,
    pub eta_bw: Option<usize>,
    pub eta_t: Option<usize>,
}

impl From<&ErrorReport> for Measures {
    fn from(r: &ErrorReport) -> Self {
        Measures { eta1: r.eta1, eta2: r.eta2, eta_bw: r.eta_bw, eta_t: r.eta_t }
    }
}

impl Measures {
    /// Every measure at its largest, `n`.
    pub fn worst(n: usize) -> Self {
        Measures { eta1: n, eta2: None, eta_bw: None, eta_t: None }
    }
}

/// Rounds a uniform program needs given the measures, `None` if unknown.
pub fn f(program: &str, m: &Measures) -> Option<u32> {
    let e1 = m.eta1 as u32;
    if e1 == 0 {
        return Some(0);
    }
    let or1 = |x: Option<usize>| x.map_or(e1, |v| v as u32);
    Some(match program {
        "mis.greedy" | "mis.greedy_min" => e1.min(m.eta2.map_or(e1, |v| v as u32 + 1)),
        "mis.u_bw" => 4 * or1(m.eta_bw).div_ceil(2),
        "mis.tree_uniform" => or1(m.eta_t).div_ceil(2) + 1,
        "mm.uniform" if e1 < 2 => 1,
        "mm.uniform" => 3 * (e1 / 2),
        "vc.uniform" => e1,
        "ec.uniform" => (2 * e1).saturating_sub(3).max(1),
        _ => return None,
    })
}

/// A program's own round bound: its length, or `f` at the worst measures.
fn own_bound(e: &Entry, p: &GraphParams) -> Option<u32> {
    e.length.rounds(p).or_else(|| f(e.name, &Measures::worst(p.n)))
}

fn f_of(e: &Entry, p: &GraphParams, m: &Measures) -> Option<u32> {
    match e.length {
        Length::Open => f(e.name, m),
        _ => e.length.rounds(p),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    /// Rounds allowed with correct predictions.
    pub consistency: Option<u32>,
    /// Rounds allowed as a function of the error.
    pub degrading: Option<u32>,
    /// Rounds allowed regardless of the error.
    pub robust: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub consistency: bool,
    pub degrading: bool,
    pub robust: bool,
}

impl Ledger {
    /// `eta1` of `None` means the run had no predictions.
    pub fn check(&self, rounds: u32, eta1: Option<usize>) -> Verdict {
        let within = |b: Option<u32>| b.is_none_or(|b| rounds <= b);
        Verdict {
            consistency: eta1 != Some(0) || within(self.consistency),
            degrading: within(self.degrading),
            robust: within(self.robust),
        }
    }
}

fn template_ledger(t: &Template, p: &GraphParams, m: &Measures) -> Ledger {
    let b = t.budgets(p);
    let c = b.c;
    let mut l = Ledger { consistency: Some(c), ..Default::default() };
    match &t.spec {
        TemplateSpec::Simple { .. } => {
            let r = t.reference().unwrap();
            l.degrading = f_of(r, p, m).map(|f| c + f);
            l.robust = own_bound(r, p).map(|x| c + x);
        }
        TemplateSpec::Consecutive { .. } => {
            let budget = b.r.unwrap_or(0);
            l.degrading = f_of(t.uniform().unwrap(), p, m).map(|f| c + 2 * f + b.c_prime);
            l.robust = own_bound(t.reference().unwrap(), p).map(|x| c + budget + 2 * b.c_prime + x);
        }
        TemplateSpec::Interleaved { phase, .. } => {
            let whole = |x: u32| c + 2 * phase * x.div_ceil(*phase);
            l.degrading = f_of(t.uniform().unwrap(), p, m).map(whole);
            l.robust = own_bound(t.reference().unwrap(), p).map(whole);
        }
        TemplateSpec::Parallel { .. } => {
            l.degrading = f_of(t.uniform().unwrap(), p, m).map(|f| c + f + 2);
            l.robust = Some(c + b.r1.unwrap_or(0) + b.c_prime + b.part2.unwrap_or(0));
        }
    }
    l
}

/// Bounds for one run. `m` holds the error measures for runs with
/// predictions, or the measures of the graph itself otherwise.
pub fn ledger(alg: &Algorithm, p: &GraphParams, m: &Measures) -> Ledger {
    match alg {
        Algorithm::Template(t) => template_ledger(t, p, m),
        Algorithm::Program(e) => Ledger {
            consistency: e.predictions.and(e.length.rounds(p)),
            degrading: f_of(e, p, m),
            robust: own_bound(e, p),
        },
    }
}

/// Closed-form parallel MIS bound with the Linial reference: `η2 + 4 + 2` while
/// that fits in part 1, else the length of both reference parts.
pub fn parallel_mis_bound(eta2: usize, r1: u32, delta: usize) -> u32 {
    let e = eta2 as u32;
    if e + 4 <= r1 {
        e + 6
    } else {
        3 + r1 + delta as u32 + 1
    }
}

/// Closed-form rooted-tree bound for runs that finish inside part 1.
pub fn tree_mis_bound(eta_t: usize) -> u32 {
    (eta_t as u32).div_ceil(2) + 5
}

/// `(n - 5) / 2` for MIS lines, `(n - 3) / 2` otherwise, rounded up.
pub fn line_threshold(mis: bool, n: usize) -> u32 {
    let gap = if mis { 5 } else { 3 };
    (n.saturating_sub(gap) as u32).div_ceil(2)
}
