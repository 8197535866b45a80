//! Problem kinds and per-node output values.

use crate::graph::NodeId;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Mis,
    MaximalMatching,
    VertexColoring,
    EdgeColoring,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Mis,
        ProblemKind::MaximalMatching,
        ProblemKind::VertexColoring,
        ProblemKind::EdgeColoring,
    ];

    pub fn short(self) -> &'static str {
        match self {
            ProblemKind::Mis => "mis",
            ProblemKind::MaximalMatching => "mm",
            ProblemKind::VertexColoring => "vc",
            ProblemKind::EdgeColoring => "ec",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mis" => Ok(ProblemKind::Mis),
            "mm" | "matching" | "maximal_matching" => Ok(ProblemKind::MaximalMatching),
            "vc" | "vertex_coloring" => Ok(ProblemKind::VertexColoring),
            "ec" | "edge_coloring" => Ok(ProblemKind::EdgeColoring),
            _ => Err(format!("unknown problem `{s}` (expected mis, mm, vc or ec)")),
        }
    }
}

/// A node's output, or a prediction of it.
///
/// Edge colors map each neighbor to the color of the shared edge; a partial
/// map is a partial output.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OutputValue {
    Bit(bool),
    Partner(Option<NodeId>),
    Color(u32),
    EdgeColors(BTreeMap<NodeId, u32>),
}

impl OutputValue {
    pub fn kind(&self) -> ProblemKind {
        match self {
            OutputValue::Bit(_) => ProblemKind::Mis,
            OutputValue::Partner(_) => ProblemKind::MaximalMatching,
            OutputValue::Color(_) => ProblemKind::VertexColoring,
            OutputValue::EdgeColors(_) => ProblemKind::EdgeColoring,
        }
    }

    pub fn bit(&self) -> Option<bool> {
        match self {
            OutputValue::Bit(b) => Some(*b),
            _ => None,
        }
    }

    pub fn partner(&self) -> Option<Option<NodeId>> {
        match self {
            OutputValue::Partner(p) => Some(*p),
            _ => None,
        }
    }

    pub fn color(&self) -> Option<u32> {
        match self {
            OutputValue::Color(c) => Some(*c),
            _ => None,
        }
    }

    pub fn edge_colors(&self) -> Option<&BTreeMap<NodeId, u32>> {
        match self {
            OutputValue::EdgeColors(m) => Some(m),
            _ => None,
        }
    }
}

/// Largest legal color (vertex: Δ+1, edge: 2Δ−1); `None` for other kinds.
pub fn color_limit(kind: ProblemKind, delta: usize) -> Option<u32> {
    match kind {
        ProblemKind::VertexColoring => Some(delta as u32 + 1),
        ProblemKind::EdgeColoring => Some((2 * delta as u32).saturating_sub(1)),
        _ => None,
    }
}

/// Text form of a value as it appears in prediction files and traces.
/// Edge colors print as `neighbor:color` pairs.
pub fn format_value(v: &OutputValue) -> String {
    match v {
        OutputValue::Bit(b) => u8::from(*b).to_string(),
        OutputValue::Partner(Some(p)) => p.to_string(),
        OutputValue::Partner(None) => "-".into(),
        OutputValue::Color(c) => c.to_string(),
        OutputValue::EdgeColors(m) => m.iter().map(|(u, c)| format!("{u}:{c}")).collect::<Vec<_>>().join(","),
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ValuesError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("node {0} listed twice")]
    Duplicate(NodeId),
    #[error("INCONSISTENT_PREDICTION on edge {0} {1}")]
    Inconsistent(NodeId, NodeId),
}

/// Parses `node value` lines (`node neighbor color` for edge coloring).
/// Blank lines and `#` comments are skipped.
pub fn read_values(kind: ProblemKind, text: &str) -> Result<BTreeMap<NodeId, OutputValue>, ValuesError> {
    let mut out: BTreeMap<NodeId, OutputValue> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let bad = |msg: &str| ValuesError::Malformed { line, msg: msg.to_string() };
        let toks: Vec<&str> = body.split_whitespace().collect();
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad(&format!("`{s}` is not a number")));
        let want = if kind == ProblemKind::EdgeColoring { 3 } else { 2 };
        if toks.len() != want {
            return Err(bad(&format!("expected {want} fields")));
        }
        let v = num(toks[0])?;
        let value = match kind {
            ProblemKind::Mis => match toks[1] {
                "0" => OutputValue::Bit(false),
                "1" => OutputValue::Bit(true),
                _ => return Err(bad("MIS values are 0 or 1")),
            },
            ProblemKind::MaximalMatching => {
                OutputValue::Partner(if toks[1] == "-" { None } else { Some(num(toks[1])?) })
            }
            ProblemKind::VertexColoring => OutputValue::Color(num(toks[1])?),
            ProblemKind::EdgeColoring => {
                let (u, c) = (num(toks[1])?, num(toks[2])?);
                let e = out.entry(v).or_insert_with(|| OutputValue::EdgeColors(BTreeMap::new()));
                if let OutputValue::EdgeColors(m) = e {
                    if m.insert(u, c).is_some() {
                        return Err(bad(&format!("edge {v} {u} listed twice")));
                    }
                }
                continue;
            }
        };
        if out.insert(v, value).is_some() {
            return Err(ValuesError::Duplicate(v));
        }
    }
    if kind == ProblemKind::EdgeColoring {
        for (&v, val) in &out {
            for (&u, c) in val.edge_colors().into_iter().flatten() {
                if out.get(&u).and_then(|o| o.edge_colors()).and_then(|m| m.get(&v)) != Some(c) {
                    return Err(ValuesError::Inconsistent(v.min(u), v.max(u)));
                }
            }
        }
    }
    Ok(out)
}

pub fn write_values(values: &BTreeMap<NodeId, OutputValue>) -> String {
    let mut s = String::new();
    for (v, val) in values {
        match val {
            OutputValue::EdgeColors(m) => {
                for (u, c) in m {
                    s.push_str(&format!("{v} {u} {c}\n"));
                }
            }
            other => s.push_str(&format!("{v} {}\n", format_value(other))),
        }
    }
    s
}
