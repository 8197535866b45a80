//! Experiment harness behind the command-line tool.

pub mod audit;
pub mod config;
pub mod crash;
pub mod ledger;

use crate::engine::{simulate, GraphParams, Outcome, ProgramFactory, SimConfig, SimError};
use crate::graph::{generate, read_graph, validate, Family, Graph, GraphError, IdScheme, Instance};
use crate::measures::{make_predictions, mu2, report, ErrorReport, MeasureError, Source};
use crate::problem::{read_values, ProblemKind};
use crate::programs::{Entry, Standalone};
use config::{Algorithm, ExperimentConfig, GraphSpec, PredictionSpec};
use ledger::{ledger, Measures};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// The configuration cannot be run at all.
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

/// One CSV line. Unknown measures stay empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResultRow {
    pub family: String,
    pub n: usize,
    pub d: u32,
    pub delta: usize,
    pub problem: String,
    pub template: String,
    pub k: Option<usize>,
    pub seed: u64,
    pub eta1: Option<usize>,
    pub eta2: Option<usize>,
    pub eta_bw: Option<usize>,
    pub eta_t: Option<usize>,
    pub eta_h: Option<usize>,
    pub rounds: Option<u32>,
    pub bound_consistency: bool,
    pub bound_degrading: bool,
    pub bound_robust: bool,
    pub valid: String,
}

pub const VALID: &str = "VALID";

/// A row plus what went wrong producing it.
#[derive(Clone, Debug)]
pub struct RowResult {
    pub row: ResultRow,
    pub failures: Vec<String>,
    pub trace: Option<String>,
}

impl RowResult {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn sim_code(e: &SimError) -> &'static str {
    match e {
        SimError::NonTermination { .. } => "NON_TERMINATION",
        SimError::ProtocolViolation { .. } => "PROTOCOL_VIOLATION",
        SimError::Config(_) => "CONFIG",
        SimError::Prediction(_) => "PREDICTION",
        SimError::RoundOutOfRange(_) => "ROUND_OUT_OF_RANGE",
    }
}

fn config_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Config(e.to_string())
}

pub fn instance(spec: &GraphSpec, seed: u64) -> Result<Instance, BenchError> {
    match spec {
        GraphSpec::Generated { family, ids, d, seed: fixed } => {
            generate(*family, *ids, *d, fixed.unwrap_or(seed)).map_err(config_err)
        }
        GraphSpec::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Io { path: path.display().to_string(), msg: e.to_string() })?;
            let (g, t) = read_graph(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            Ok(Instance::plain(g, t))
        }
    }
}

/// Largest component size and μ2 of the graph itself; edge coloring
/// ignores isolated nodes.
pub fn graph_measures(kind: ProblemKind, g: &Graph) -> Result<Measures, GraphError> {
    let mut m = Measures { eta2: Some(0), ..Default::default() };
    for c in g.components() {
        if kind == ProblemKind::EdgeColoring && c.n() < 2 {
            continue;
        }
        m.eta1 = m.eta1.max(c.n());
        m.eta2 = match (m.eta2, mu2(&c)) {
            (Some(a), Ok(b)) => Some(a.max(b)),
            (_, Err(GraphError::CapExceeded { .. })) | (None, _) => None,
            (_, Err(e)) => return Err(e),
        };
    }
    Ok(m)
}

fn factory(alg: &Algorithm) -> Box<dyn ProgramFactory + '_> {
    match alg {
        Algorithm::Template(t) => Box::new(t.clone()),
        Algorithm::Program(e) => Box::new(Standalone(e)),
    }
}

/// Everything one run produces, for callers that need more than the row.
pub struct Run {
    pub instance: Instance,
    pub report: Option<ErrorReport>,
    pub outcome: Result<Outcome, SimError>,
    pub result: RowResult,
}

/// Runs one configuration at corruption count `k` and seed `seed`.
pub fn run_one(cfg: &ExperimentConfig, alg: &Algorithm, k: usize, seed: u64, keep_trace: bool) -> Result<Run, BenchError> {
    let spec = cfg.graph.as_ref().ok_or_else(|| config_err("`family`: required to run"))?;
    let inst = instance(spec, seed)?;
    let g = &inst.graph;
    let fac = factory(alg);
    let pred_kind = fac.prediction_kind();
    let predictions = match pred_kind {
        Some(kind) => {
            let source = match cfg.prediction {
                PredictionSpec::Corrupt => Source::Corrupt { k, seed },
                PredictionSpec::Pattern(p) => Source::Pattern(p),
            };
            Some(make_predictions(kind, &inst, source).map_err(config_err)?)
        }
        None => None,
    };
    let rep = match (&predictions, pred_kind) {
        (Some(p), Some(kind)) if kind == cfg.problem => {
            Some(report(kind, g, inst.tree.as_ref(), p).map_err(|e: MeasureError| config_err(e))?)
        }
        _ => None,
    };
    let sim_cfg = SimConfig { trace: true, ..Default::default() };
    let outcome = simulate(g, inst.tree.as_ref(), fac.as_ref(), predictions.as_ref(), &sim_cfg);
    if let Err(SimError::Config(m)) = &outcome {
        return Err(BenchError::Config(m.clone()));
    }
    let params = GraphParams::of(g);
    let measures = match &rep {
        Some(r) => Measures::from(r),
        None => graph_measures(cfg.problem, g).map_err(config_err)?,
    };
    let bounds = ledger(alg, &params, &measures);
    let mut failures = Vec::new();
    let (rounds, valid, verdict) = match &outcome {
        Ok(out) => {
            let valid = match validate(cfg.problem, g, &out.outputs) {
                Ok(()) => VALID.to_string(),
                Err(v) => {
                    failures.push(v.to_string());
                    v.code.to_string()
                }
            };
            for a in audit::audit(cfg.problem, g, alg, out) {
                failures.push(a.to_string());
            }
            let verdict = bounds.check(out.total_rounds, rep.as_ref().map(|r| r.eta1));
            for (ok, name, b) in [
                (verdict.consistency, "consistency", bounds.consistency),
                (verdict.degrading, "degrading", bounds.degrading),
                (verdict.robust, "robust", bounds.robust),
            ] {
                if !ok {
                    failures.push(format!("{} rounds exceed the {name} bound {}", out.total_rounds, b.unwrap_or(0)));
                }
            }
            (Some(out.total_rounds), valid, verdict)
        }
        Err(e) => {
            failures.push(e.to_string());
            (None, sim_code(e).to_string(), ledger::Verdict { consistency: false, degrading: false, robust: false })
        }
    };
    let trace = match &outcome {
        Ok(out) if keep_trace || !failures.is_empty() => out.trace.as_ref().map(|t| t.dump()),
        _ => None,
    };
    let row = ResultRow {
        family: inst.family.to_string(),
        n: g.n(),
        d: g.d(),
        delta: g.max_degree(),
        problem: cfg.problem.to_string(),
        template: alg.label(),
        k: (pred_kind.is_some() && cfg.prediction == PredictionSpec::Corrupt).then_some(k),
        seed,
        eta1: rep.as_ref().map(|r| r.eta1),
        eta2: rep.as_ref().and_then(|r| r.eta2),
        eta_bw: rep.as_ref().and_then(|r| r.eta_bw),
        eta_t: rep.as_ref().and_then(|r| r.eta_t),
        eta_h: rep.as_ref().and_then(|r| r.eta_h),
        rounds,
        bound_consistency: verdict.consistency,
        bound_degrading: verdict.degrading,
        bound_robust: verdict.robust,
        valid,
    };
    Ok(Run { instance: inst, report: rep, outcome, result: RowResult { row, failures, trace } })
}

fn algorithm(cfg: &ExperimentConfig) -> Result<&Algorithm, BenchError> {
    cfg.algorithm.as_ref().ok_or_else(|| config_err("`template`: required to run"))
}

/// One row per seed at the configured corruption count.
pub fn cmd_run(cfg: &ExperimentConfig, keep_trace: bool) -> Result<Vec<RowResult>, BenchError> {
    let k = *cfg.corruptions.first().unwrap_or(&0);
    let jobs: Vec<(usize, u64)> = cfg.seeds.iter().map(|&s| (k, s)).collect();
    run_jobs(cfg, &jobs, keep_trace)
}

/// The Cartesian product of corruption counts and seeds, ordered by k then seed.
pub fn cmd_sweep(cfg: &ExperimentConfig, keep_trace: bool) -> Result<Vec<RowResult>, BenchError> {
    let jobs: Vec<(usize, u64)> =
        cfg.corruptions.iter().flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s))).collect();
    run_jobs(cfg, &jobs, keep_trace)
}

fn run_jobs(cfg: &ExperimentConfig, jobs: &[(usize, u64)], keep_trace: bool) -> Result<Vec<RowResult>, BenchError> {
    let alg = algorithm(cfg)?;
    jobs.par_iter().map(|&(k, s)| run_one(cfg, alg, k, s, keep_trace).map(|r| r.result)).collect()
}

pub fn write_csv(rows: &[ResultRow], out: &mut dyn std::io::Write) -> Result<(), BenchError> {
    let io = |e: csv::Error| BenchError::Io { path: "csv".into(), msg: e.to_string() };
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    if rows.is_empty() {
        // header only
        w.write_record(CSV_HEADER).map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::Io { path: "csv".into(), msg: e.to_string() })
}

pub const CSV_HEADER: [&str; 18] = [
    "family",
    "n",
    "d",
    "delta",
    "problem",
    "template",
    "k",
    "seed",
    "eta1",
    "eta2",
    "eta_bw",
    "eta_t",
    "eta_h",
    "rounds",
    "bound_consistency",
    "bound_degrading",
    "bound_robust",
    "valid",
];

/// Checks an output file against a graph file.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<Result<(), String>, BenchError> {
    let spec = cfg.graph.as_ref().ok_or_else(|| config_err("`graph_file`: required for verify"))?;
    let inst = instance(spec, 0)?;
    let path = cfg.outputs.as_ref().ok_or_else(|| config_err("`outputs`: required for verify"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let values = read_values(cfg.problem, &text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok(validate(cfg.problem, &inst.graph, &values).map_err(|v| v.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SanityReport {
    pub program: &'static str,
    pub n: usize,
    pub rounds: u32,
    pub threshold: u32,
}

impl SanityReport {
    pub fn pass(&self) -> bool {
        self.rounds >= self.threshold
    }
}

impl std::fmt::Display for SanityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} line n={} rounds={} threshold={}", self.program, self.n, self.rounds, self.threshold)
    }
}

pub fn uniform_program(kind: ProblemKind) -> &'static Entry {
    let name = match kind {
        ProblemKind::Mis => "mis.greedy",
        ProblemKind::MaximalMatching => "mm.uniform",
        ProblemKind::VertexColoring => "vc.uniform",
        ProblemKind::EdgeColoring => "ec.uniform",
    };
    crate::programs::lookup(name).expect("registered")
}

/// Runs the problem's measure-uniform program on an increasing-id line.
pub fn cmd_sanity(kind: ProblemKind, n: usize) -> Result<SanityReport, BenchError> {
    let e = uniform_program(kind);
    let g = generate(Family::Line { n }, IdScheme::Increasing, None, 0).map_err(config_err)?.graph;
    let out = simulate(&g, None, &Standalone(e), None, &SimConfig::default()).map_err(config_err)?;
    Ok(SanityReport {
        program: e.name,
        n,
        rounds: out.total_rounds,
        threshold: ledger::line_threshold(kind == ProblemKind::Mis, n),
    })
}

/// Loads a config, mapping failures to the config error.
pub fn load(path: &Path) -> Result<ExperimentConfig, BenchError> {
    ExperimentConfig::load(path).map_err(config_err)
}
