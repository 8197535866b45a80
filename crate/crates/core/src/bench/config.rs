//! Flat `key = value` experiment files.
//!
//! ```toml
//! family = "random"
//! n = 14
//! p = 0.3
//! problem = "mis"
//! template = "simple"
//! init = "mis.init"
//! reference = "mis.greedy"
//! corrupt_range = "0..=8"
//! seed_range = "0..20"
//! ```

use crate::graph::{Family, IdScheme, TreeShape};
use crate::measures::{parse_pattern, Pattern};
use crate::problem::ProblemKind;
use crate::programs::{lookup, Entry};
use crate::templates::{Budget, Template, TemplateSpec};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(String),
    #[error("`{field}`: {msg}")]
    Field { field: &'static str, msg: String },
}

fn field(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, msg: msg.into() }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    family: Option<String>,
    n: Option<usize>,
    p: Option<f64>,
    rim: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
    d: Option<u32>,
    shape: Option<String>,
    id_scheme: Option<String>,
    graph_seed: Option<u64>,
    connected: Option<bool>,
    graph_file: Option<String>,
    problem: Option<String>,
    prediction: Option<String>,
    corrupt: Option<usize>,
    seed: Option<u64>,
    repetitions: Option<u64>,
    corrupt_range: Option<toml::Value>,
    seed_range: Option<toml::Value>,
    template: Option<String>,
    program: Option<String>,
    init: Option<String>,
    uniform: Option<String>,
    cleanup: Option<String>,
    reference: Option<String>,
    part1: Option<String>,
    part2: Option<String>,
    r: Option<toml::Value>,
    phase: Option<u32>,
    out: Option<String>,
    outputs: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSpec {
    Generated {
        family: Family,
        ids: IdScheme,
        d: Option<u32>,
        /// Fixed graph seed; `None` reuses each row's seed.
        seed: Option<u64>,
    },
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionSpec {
    /// Solve, then corrupt `k` nodes.
    Corrupt,
    Pattern(Pattern),
}

#[derive(Clone, Debug)]
pub enum Algorithm {
    Template(Template),
    /// A single registry program run from scratch.
    Program(&'static Entry),
}

impl Algorithm {
    pub fn label(&self) -> String {
        match self {
            Algorithm::Template(t) => t.spec.kind().to_string(),
            Algorithm::Program(e) => e.name.to_string(),
        }
    }

    pub fn problem(&self) -> ProblemKind {
        match self {
            Algorithm::Template(t) => t.init().problem,
            Algorithm::Program(e) => e.problem,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub graph: Option<GraphSpec>,
    pub problem: ProblemKind,
    pub prediction: PredictionSpec,
    pub algorithm: Option<Algorithm>,
    /// Corruption counts, outer loop of a sweep.
    pub corruptions: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    /// Output file checked by `verify`.
    pub outputs: Option<PathBuf>,
    /// `n` as written, for `sanity`.
    pub n: Option<usize>,
}

/// Parses `a..=b`, `a..b`, a single number or an array of numbers.
fn range(name: &'static str, v: &toml::Value) -> Result<Vec<u64>, ConfigError> {
    let bad = || field(name, format!("expected `a..=b`, `a..b`, a number or a list, got {v}"));
    let out: Vec<u64> = match v {
        toml::Value::Integer(i) => vec![u64::try_from(*i).map_err(|_| bad())?],
        toml::Value::Array(a) => a
            .iter()
            .map(|x| x.as_integer().and_then(|i| u64::try_from(i).ok()).ok_or_else(bad))
            .collect::<Result<_, _>>()?,
        toml::Value::String(s) => {
            let s = s.trim();
            let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
            if let Some((a, b)) = s.split_once("..=") {
                (num(a)?..=num(b)?).collect()
            } else if let Some((a, b)) = s.split_once("..") {
                (num(a)?..num(b)?).collect()
            } else {
                vec![num(s)?]
            }
        }
        _ => return Err(bad()),
    };
    if out.is_empty() {
        return Err(field(name, "range is empty"));
    }
    Ok(out)
}

fn need<T>(v: Option<T>, name: &'static str, why: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| field(name, format!("required {why}")))
}

fn graph_spec(raw: &Raw, base: &Path) -> Result<Option<GraphSpec>, ConfigError> {
    if let Some(f) = &raw.graph_file {
        if raw.family.as_deref().is_some_and(|x| x != "file") {
            return Err(field("graph_file", "cannot be combined with a generated family"));
        }
        return Ok(Some(GraphSpec::File(base.join(f))));
    }
    let Some(name) = raw.family.as_deref() else { return Ok(None) };
    let n = |why| need(raw.n, "n", why);
    let family = match name {
        "line" => Family::Line { n: n("for a line")? },
        "wheel" => Family::Wheel { k: need(raw.rim, "rim", "for a wheel")? },
        "grid" => Family::Grid { rows: need(raw.rows, "rows", "for a grid")?, cols: need(raw.cols, "cols", "for a grid")? },
        "random" => {
            let p = need(raw.p, "p", "for a random graph")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(field("p", "must lie in [0, 1]"));
            }
            Family::Random { n: n("for a random graph")?, p, connected: raw.connected.unwrap_or(false) }
        }
        "tree" => {
            let shape = match raw.shape.as_deref().unwrap_or("random") {
                "random" => TreeShape::Random,
                "path" | "line" => TreeShape::Path,
                s => return Err(field("shape", format!("unknown tree shape `{s}` (random or path)"))),
            };
            Family::Tree { n: n("for a tree")?, shape }
        }
        "file" => return Err(field("graph_file", "required for family = \"file\"")),
        s => return Err(field("family", format!("unknown family `{s}` (line, wheel, grid, random, tree)"))),
    };
    let ids = match raw.id_scheme.as_deref().unwrap_or("increasing") {
        "increasing" => IdScheme::Increasing,
        "permuted" | "seeded_permutation" => IdScheme::SeededPermutation,
        s => return Err(field("id_scheme", format!("unknown scheme `{s}` (increasing or permuted)"))),
    };
    Ok(Some(GraphSpec::Generated { family, ids, d: raw.d, seed: raw.graph_seed }))
}

fn algorithm(raw: &Raw) -> Result<Option<Algorithm>, ConfigError> {
    let Some(kind) = raw.template.as_deref() else {
        return match &raw.program {
            Some(_) => Err(field("template", "set template = \"program\" to run a single program")),
            None => Ok(None),
        };
    };
    let slot = |v: &Option<String>, name: &'static str| need(v.clone(), name, &format!("for template = \"{kind}\""));
    let spec = match kind {
        "program" => {
            let name = slot(&raw.program, "program")?;
            let e = lookup(&name).ok_or_else(|| field("program", format!("unknown program `{name}`")))?;
            return Ok(Some(Algorithm::Program(e)));
        }
        "simple" => TemplateSpec::Simple { init: slot(&raw.init, "init")?, reference: slot(&raw.reference, "reference")? },
        "consecutive" => {
            let budget = match &raw.r {
                None => None,
                Some(toml::Value::Integer(i)) => {
                    Some(Budget::Fixed(u32::try_from(*i).map_err(|_| field("r", "must be a non-negative integer"))?))
                }
                Some(toml::Value::String(s)) => Some(s.parse::<Budget>().map_err(|m| field("r", m))?),
                Some(v) => return Err(field("r", format!("expected a number or a budget name, got {v}"))),
            };
            TemplateSpec::Consecutive {
                init: slot(&raw.init, "init")?,
                uniform: slot(&raw.uniform, "uniform")?,
                cleanup: raw.cleanup.clone(),
                reference: slot(&raw.reference, "reference")?,
                budget,
            }
        }
        "interleaved" => TemplateSpec::Interleaved {
            init: slot(&raw.init, "init")?,
            uniform: slot(&raw.uniform, "uniform")?,
            reference: slot(&raw.reference, "reference")?,
            phase: raw.phase.unwrap_or(2),
        },
        "parallel" => TemplateSpec::Parallel {
            init: slot(&raw.init, "init")?,
            uniform: slot(&raw.uniform, "uniform")?,
            cleanup: raw.cleanup.clone(),
            part1: slot(&raw.part1, "part1")?,
            part2: slot(&raw.part2, "part2")?,
        },
        s => {
            return Err(field(
                "template",
                format!("unknown template `{s}` (simple, consecutive, interleaved, parallel, program)"),
            ))
        }
    };
    Template::new(spec).map(|t| Some(Algorithm::Template(t))).map_err(|e| field("template", e.to_string()))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative file names are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: Raw = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let algorithm = algorithm(&raw)?;
        let problem = match (&raw.problem, &algorithm) {
            (Some(p), alg) => {
                let p: ProblemKind = p.parse().map_err(|m: String| field("problem", m))?;
                if let Some(a) = alg {
                    if a.problem() != p {
                        return Err(field("problem", format!("{} solves {} but problem = {p}", a.label(), a.problem())));
                    }
                }
                p
            }
            (None, Some(a)) => a.problem(),
            (None, None) => return Err(field("problem", "required when no template is given")),
        };
        let prediction = match raw.prediction.as_deref().unwrap_or("corrupt") {
            "corrupt" => PredictionSpec::Corrupt,
            s => PredictionSpec::Pattern(parse_pattern(s).ok_or_else(|| {
                field("prediction", format!("unknown source `{s}` (corrupt, all_ones, all_zeros, grid_4block, mod3_line)"))
            })?),
        };
        let corruptions = match &raw.corrupt_range {
            Some(v) => {
                if raw.corrupt.is_some() {
                    return Err(field("corrupt", "cannot be combined with corrupt_range"));
                }
                range("corrupt_range", v)?.into_iter().map(|k| k as usize).collect()
            }
            None => vec![raw.corrupt.unwrap_or(0)],
        };
        let seeds = match &raw.seed_range {
            Some(v) => {
                if raw.seed.is_some() || raw.repetitions.is_some() {
                    return Err(field("seed_range", "cannot be combined with seed or repetitions"));
                }
                range("seed_range", v)?
            }
            None => {
                let start = raw.seed.unwrap_or(0);
                let reps = raw.repetitions.unwrap_or(1);
                if reps == 0 {
                    return Err(field("repetitions", "must be at least 1"));
                }
                (start..start + reps).collect()
            }
        };
        let graph = graph_spec(&raw, base)?;
        if let Some(GraphSpec::Generated { family, .. }) = &graph {
            let n = match *family {
                Family::Line { n } | Family::Random { n, .. } | Family::Tree { n, .. } => n,
                Family::Wheel { k } => 1 + 2 * k,
                Family::Grid { rows, cols } => rows * cols,
            };
            if let Some(&k) = corruptions.iter().max() {
                if prediction == PredictionSpec::Corrupt && k > n {
                    return Err(field("corrupt", format!("k = {k} exceeds n = {n}")));
                }
            }
        }
        Ok(ExperimentConfig {
            graph,
            problem,
            prediction,
            algorithm,
            corruptions,
            seeds,
            out: raw.out.map(PathBuf::from),
            outputs: raw.outputs.map(|o| base.join(o)),
            n: raw.n,
        })
    }
}
