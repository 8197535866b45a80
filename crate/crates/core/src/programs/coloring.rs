//! Fault-tolerant colorings used as the first part of reference algorithms.
//!
//! Both broadcast their current color every round and treat any neighbor
//! that stays silent as gone for good. Every update only depends on colors
//! received in the same round, so the coloring of the surviving nodes stays
//! proper whichever nodes stop.

use super::{broadcast, Mode, Residual};
use crate::engine::{Assignment, Fault, GraphParams, Inbox, Message, NodeProgram, NodeView, Outbox, Step};
use crate::graph::NodeId;
use std::collections::{BTreeMap, BTreeSet};

fn next_prime(mut x: u64) -> u64 {
    x = x.max(2);
    loop {
        if (2..).take_while(|p| p * p <= x).all(|p| x % p != 0) {
            return x;
        }
        x += 1;
    }
}

/// Smallest `r` with `r^e >= m`.
fn root_ceil(m: u64, e: u32) -> u64 {
    let pow = |r: u64| (0..e).try_fold(1u64, |a, _| a.checked_mul(r)).unwrap_or(u64::MAX);
    let mut r = (m as f64).powf(1.0 / e as f64).floor() as u64;
    r = r.saturating_sub(1).max(1);
    while pow(r) < m {
        r += 1;
    }
    r
}

/// Color reduction plan: polynomial steps `(k, q)` shrinking the palette to
/// `q²` each, then one round per color class above Δ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinialPlan {
    pub steps: Vec<(u32, u64)>,
    pub palette: u64,
    pub delta: u64,
}

impl LinialPlan {
    pub fn new(delta: usize, d: u32) -> Self {
        let delta = delta as u64;
        let mut m = u64::from(d.max(1));
        let mut steps = Vec::new();
        loop {
            let best = (1..=40u32)
                .map(|k| {
                    let q = next_prime((delta * u64::from(k) + 1).max(root_ceil(m, k + 1)));
                    (q * q, k, q)
                })
                .min();
            match best {
                Some((size, k, q)) if size < m => {
                    steps.push((k, q));
                    m = size;
                }
                _ => break,
            }
        }
        LinialPlan { steps, palette: m, delta }
    }

    fn reduce_rounds(&self) -> u64 {
        self.palette.saturating_sub(self.delta + 1)
    }

    /// Rounds including the closing broadcast of final colors.
    pub fn rounds(&self) -> u32 {
        (self.steps.len() as u64 + self.reduce_rounds() + 1) as u32
    }
}

pub fn linial_len(p: &GraphParams) -> u32 {
    LinialPlan::new(p.delta, p.d).rounds()
}

fn digits(mut c: u64, q: u64, k: u32) -> Vec<u64> {
    (0..=k)
        .map(|_| {
            let dgt = c % q;
            c /= q;
            dgt
        })
        .collect()
}

fn eval(coef: &[u64], x: u64, q: u64) -> u64 {
    coef.iter().rev().fold(0, |acc, &a| (acc * x + a) % q)
}

pub struct Linial {
    r: Residual,
    color: u64,
    plan: LinialPlan,
    len: u32,
    mode: Mode,
}

pub fn build_linial(view: &NodeView, r: Residual, mode: Mode) -> Box<dyn NodeProgram> {
    let plan = LinialPlan::new(view.delta(), view.d.expect("linial needs d"));
    let len = plan.rounds();
    Box::new(Linial { r, color: u64::from(view.id - 1), plan, len, mode })
}

/// Forgets silent neighbors and returns the colors heard this round.
fn listen(r: &mut Residual, inbox: &Inbox) -> BTreeMap<NodeId, u64> {
    let heard: BTreeMap<NodeId, u64> = inbox
        .iter()
        .filter_map(|(u, m)| match m {
            Message::Color(c) => Some((u, *c)),
            _ => None,
        })
        .collect();
    let gone: Vec<NodeId> = r.active.iter().copied().filter(|u| !heard.contains_key(u)).collect();
    for u in gone {
        r.forget(u);
    }
    heard.into_iter().filter(|(u, _)| r.active.contains(u)).collect()
}

impl NodeProgram for Linial {
    fn compose(&mut self, _: u32) -> Outbox {
        broadcast(&self.r.active, Message::Color(self.color))
    }

    fn process(&mut self, t: u32, inbox: &Inbox) -> Result<Step, Fault> {
        let heard = listen(&mut self.r, inbox);
        if let Some((u, _)) = heard.iter().find(|(_, &c)| c == self.color) {
            return Err(Fault(format!("neighbor {u} holds the same color {}", self.color)));
        }
        let s = self.plan.steps.len() as u64;
        let t64 = u64::from(t);
        if t64 <= s {
            let (k, q) = self.plan.steps[t as usize - 1];
            let mine = digits(self.color, q, k);
            let theirs: Vec<Vec<u64>> = heard.values().map(|&c| digits(c, q, k)).collect();
            let x = (0..q)
                .find(|&x| {
                    let v = eval(&mine, x, q);
                    theirs.iter().all(|p| eval(p, x, q) != v)
                })
                .ok_or_else(|| Fault("no separating point".into()))?;
            self.color = x * q + eval(&mine, x, q);
        } else if t64 <= s + self.plan.reduce_rounds() {
            let class = self.plan.palette - (t64 - s);
            if self.color == class {
                let used: BTreeSet<u64> = heard.values().copied().collect();
                self.color = (0..=self.plan.delta)
                    .find(|c| !used.contains(c))
                    .ok_or_else(|| Fault("no free color".into()))?;
            }
        } else {
            self.r.neighbor_colors = heard.iter().map(|(&u, &c)| (u, c as u32 + 1)).collect();
        }
        if t >= self.len {
            self.r.color = Some(self.color as u32 + 1);
            if self.mode == Mode::Output {
                return Ok(Step::done(vec![Assignment::Color(self.color as u32 + 1)]));
            }
        }
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn stored_color(&self) -> Option<u64> {
        Some(self.color)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GpsStep {
    /// Cole–Vishkin bit trick against the parent.
    Reduce,
    /// Every node takes its parent's color; the root picks a new one.
    ShiftDown,
    /// Nodes of this color move into {0, 1, 2}.
    Recolor(u64),
    Broadcast,
}

pub fn gps_plan(d: u32) -> Vec<GpsStep> {
    let mut m = u64::from(d.max(1));
    let mut steps = Vec::new();
    while m > 6 {
        steps.push(GpsStep::Reduce);
        m = 2 * u64::from(64 - (m - 1).leading_zeros());
    }
    for x in [5, 4, 3] {
        if x < m {
            steps.push(GpsStep::ShiftDown);
            steps.push(GpsStep::Recolor(x));
        }
    }
    steps.push(GpsStep::Broadcast);
    steps
}

pub fn gps_len(p: &GraphParams) -> u32 {
    gps_plan(p.d).len() as u32
}

/// Rooted-tree 3-coloring in O(log* d) rounds.
pub struct Gps {
    r: Residual,
    color: u64,
    plan: Vec<GpsStep>,
    mode: Mode,
}

pub fn build_gps(view: &NodeView, r: Residual, mode: Mode) -> Box<dyn NodeProgram> {
    let color = if view.neighbors.is_empty() { 0 } else { u64::from(view.id - 1) };
    Box::new(Gps { r, color, plan: gps_plan(view.d.expect("gps needs d")), mode })
}

impl NodeProgram for Gps {
    fn compose(&mut self, _: u32) -> Outbox {
        broadcast(&self.r.active, Message::Color(self.color))
    }

    fn process(&mut self, t: u32, inbox: &Inbox) -> Result<Step, Fault> {
        let heard = listen(&mut self.r, inbox);
        let parent = self.r.parent.and_then(|p| heard.get(&p).copied());
        match self.plan.get(t as usize - 1).copied().unwrap_or(GpsStep::Broadcast) {
            GpsStep::Reduce => {
                self.color = match parent {
                    Some(pc) => {
                        let i = u64::from((self.color ^ pc).trailing_zeros());
                        2 * i + (self.color >> i & 1)
                    }
                    None => self.color & 1,
                };
            }
            GpsStep::ShiftDown => {
                self.color = match parent {
                    Some(pc) => pc,
                    None => (0..3).find(|&c| c != self.color).unwrap(),
                };
            }
            GpsStep::Recolor(x) => {
                if self.color == x {
                    let used: BTreeSet<u64> = heard.values().copied().collect();
                    self.color = (0..3).find(|c| !used.contains(c)).ok_or_else(|| Fault("no free color".into()))?;
                }
            }
            GpsStep::Broadcast => {
                self.r.neighbor_colors = heard.iter().map(|(&u, &c)| (u, c as u32 + 1)).collect();
            }
        }
        if t as usize >= self.plan.len() {
            self.r.color = Some(self.color as u32 + 1);
            if self.mode == Mode::Output {
                return Ok(Step::done(vec![Assignment::Color(self.color as u32 + 1)]));
            }
        }
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }

    fn stored_color(&self) -> Option<u64> {
        Some(self.color)
    }
}
