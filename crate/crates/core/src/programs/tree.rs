//! MIS stages for rooted trees.

use super::{broadcast, Mode, Residual};
use crate::engine::{Assignment, Fault, Inbox, Message, NodeProgram, NodeView, Outbox, Step};
use crate::graph::NodeId;
use crate::problem::OutputValue;
use std::collections::BTreeMap;

fn one() -> Step {
    Step::done(vec![Assignment::Bit(true)])
}

fn zero() -> Step {
    Step::done(vec![Assignment::Bit(false)])
}

/// Four-round initialization after which every active component is
/// monochromatic.
///
/// Round 1 exchanges predictions. In round 2 the black nodes without a black
/// parent join and notify; their neighbors output 0 without notifying. In
/// round 3 every remaining node speaks (white nodes without a white parent
/// join, the others send a heartbeat) so silent neighbors are known to be
/// gone. In round 4 the neighbors of the round-3 joiners output 0.
pub struct TreeInit {
    pred: bool,
    r: Residual,
    first: bool,
    second: bool,
    dominated: bool,
}

pub fn build_init(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    let pred = match view.prediction {
        Some(OutputValue::Bit(b)) => b,
        _ => panic!("node {} has no MIS prediction", view.id),
    };
    Box::new(TreeInit { pred, r, first: false, second: false, dominated: false })
}

impl TreeInit {
    fn parent_bit(&self) -> Option<bool> {
        let p = self.r.parent?;
        self.r.neighbor_bits.as_ref()?.get(&p).copied()
    }
}

impl NodeProgram for TreeInit {
    fn compose(&mut self, round: u32) -> Outbox {
        match round {
            1 => broadcast(&self.r.active, Message::Prediction(OutputValue::Bit(self.pred))),
            2 if self.first => broadcast(&self.r.active, Message::Join),
            3 => {
                // white parent judged by prediction, even if it already left
                self.second = !self.pred && self.parent_bit() != Some(false);
                let m = if self.second { Message::Join } else { Message::Alive };
                broadcast(&self.r.active, m)
            }
            4 if self.dominated => broadcast(&self.r.active, Message::Drop),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        match round {
            1 => {
                let bits: BTreeMap<NodeId, bool> = inbox
                    .iter()
                    .filter_map(|(u, m)| match m {
                        Message::Prediction(OutputValue::Bit(b)) => Some((u, *b)),
                        _ => None,
                    })
                    .collect();
                self.r.neighbor_bits = Some(bits);
                self.first = self.pred && self.parent_bit() != Some(true);
                Ok(Step::active())
            }
            2 => {
                if self.first {
                    Ok(one())
                } else if inbox.senders_of(&Message::Join).next().is_some() {
                    Ok(zero())
                } else {
                    Ok(Step::active())
                }
            }
            3 => {
                let silent: Vec<NodeId> =
                    self.r.active.iter().copied().filter(|&u| inbox.get(u).is_none()).collect();
                for u in silent {
                    self.r.forget(u);
                }
                let joined: Vec<NodeId> = inbox.senders_of(&Message::Join).collect();
                for &u in &joined {
                    self.r.forget(u);
                }
                if self.second {
                    if let Some(u) = joined.first() {
                        return Err(Fault(format!("neighbor {u} joined in the same round")));
                    }
                    return Ok(one());
                }
                self.dominated = !joined.is_empty();
                Ok(Step::active())
            }
            _ => {
                if self.dominated {
                    return Ok(zero());
                }
                for u in inbox.senders_of(&Message::Drop).collect::<Vec<_>>() {
                    self.r.forget(u);
                }
                Ok(Step::handoff())
            }
        }
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// Measure-uniform MIS on rooted trees. In odd rounds roots and leaves join
/// (a leaf whose parent is a root outputs 0 instead); in even rounds their
/// neighbors output 0.
pub struct TreeUniform {
    r: Residual,
    role: Option<Role>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Root,
    Leaf,
}

pub fn build_uniform(_: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    Box::new(TreeUniform { r, role: None })
}

impl NodeProgram for TreeUniform {
    fn compose(&mut self, round: u32) -> Outbox {
        self.role = None;
        if round % 2 == 1 {
            if self.r.dominated {
                return Vec::new();
            }
            match self.r.parent {
                None => {
                    self.role = Some(Role::Root);
                    return broadcast(&self.r.active, Message::Root);
                }
                Some(p) if self.r.children().next().is_none() => {
                    self.role = Some(Role::Leaf);
                    return vec![(p, Message::Leaf)];
                }
                _ => {}
            }
        } else if self.r.dominated {
            return broadcast(&self.r.active, Message::Drop);
        }
        Vec::new()
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round % 2 == 1 {
            match self.role {
                Some(Role::Root) => return Ok(one()),
                Some(Role::Leaf) => {
                    let p = self.r.parent.unwrap();
                    return Ok(if inbox.get(p) == Some(&Message::Root) { zero() } else { one() });
                }
                None => {
                    let senders: Vec<NodeId> = inbox.senders().collect();
                    for &u in &senders {
                        self.r.forget(u);
                    }
                    self.r.dominated |= !senders.is_empty();
                }
            }
        } else {
            if self.r.dominated {
                return Ok(zero());
            }
            for u in inbox.senders_of(&Message::Drop).collect::<Vec<_>>() {
                self.r.forget(u);
            }
        }
        Ok(Step::active())
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}

/// Two rounds turning a stored proper 3-coloring into an MIS: color 1 joins
/// in round 1, then color 2, and color 3 joins unless told otherwise.
pub struct TreePart2 {
    color: u32,
    r: Residual,
}

pub fn build_part2(view: &NodeView, r: Residual, _: Mode) -> Box<dyn NodeProgram> {
    let color = r.color.unwrap_or_else(|| panic!("node {} has no stored color", view.id));
    Box::new(TreePart2 { color, r })
}

impl NodeProgram for TreePart2 {
    fn compose(&mut self, round: u32) -> Outbox {
        match round {
            1 => broadcast(&self.r.active, Message::Color(self.color.into())),
            _ if self.color == 2 => self
                .r
                .active
                .iter()
                .filter(|u| self.r.neighbor_colors.get(u) == Some(&3))
                .map(|&u| (u, Message::Join))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn process(&mut self, round: u32, inbox: &Inbox) -> Result<Step, Fault> {
        if round == 1 {
            if !(1..=3).contains(&self.color) {
                return Err(Fault(format!("stored color {} is not in 1..=3", self.color)));
            }
            self.r.neighbor_colors.clear();
            for (u, m) in inbox.iter() {
                if let Message::Color(c) = m {
                    if *c == u64::from(self.color) {
                        return Err(Fault(format!("stored coloring improper: neighbor {u} shares color {c}")));
                    }
                    self.r.neighbor_colors.insert(u, *c as u32);
                }
            }
            if self.color == 1 {
                return Ok(one());
            }
            if self.r.neighbor_colors.values().any(|&c| c == 1) {
                return Ok(zero());
            }
            return Ok(Step::active());
        }
        match self.color {
            2 => Ok(one()),
            _ if inbox.is_empty() => Ok(one()),
            _ => Ok(zero()),
        }
    }

    fn residual(&self) -> Residual {
        self.r.clone()
    }
}
