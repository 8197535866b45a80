//! Trace auditing: the partial output must be extendable at every round
//! where the algorithm claims it is.

use super::config::Algorithm;
use crate::engine::{GraphParams, Outcome};
use crate::graph::{extendable, Graph, Violation};
use crate::problem::ProblemKind;
use crate::programs::Length;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditFailure {
    pub round: u32,
    pub violation: Violation,
}

impl std::fmt::Display for AuditFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "not extendable after round {}: {}", self.round, self.violation)
    }
}

/// Rounds at which `alg`'s partial output must be extendable.
pub fn checkpoints(alg: &Algorithm, p: &GraphParams, total: u32) -> Vec<u32> {
    match alg {
        Algorithm::Template(t) => t.checkpoints(p, total),
        Algorithm::Program(e) => {
            let mut out: Vec<u32> = match e.phase {
                Some(ph) => (1..).map(|k| k * ph).take_while(|&r| r <= total).collect(),
                None => Vec::new(),
            };
            if let Length::Fixed(l) = e.length {
                if l <= total && !out.contains(&l) {
                    out.push(l);
                }
            }
            out
        }
    }
}

/// Checks every checkpoint of a traced run.
pub fn audit(kind: ProblemKind, g: &Graph, alg: &Algorithm, out: &Outcome) -> Vec<AuditFailure> {
    let Some(trace) = &out.trace else { return Vec::new() };
    checkpoints(alg, &GraphParams::of(g), out.total_rounds)
        .into_iter()
        .filter_map(|round| {
            extendable(kind, g, &trace.outputs_at(round)).err().map(|violation| AuditFailure { round, violation })
        })
        .collect()
}
