//! Experiment harness: grid generators, the gap metric, per-variable method
//! comparison, and the CSV / JSON-lines report formats.

mod generators;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorgraph::{FactorGraph, VariableId};
use crate::measure::{Measure, MeasureBox};
use crate::propagation::{
    boxprop_sawtree, boxprop_subtree, bp_marginals, build_saw_tree, build_subtree, exact_marginals,
    BoundResult, BpOptions, BpResult, ExactEngine, Method, BRUTE_FORCE_LIMIT,
};

pub use generators::{
    gen_ising_grid, gen_random_graph, gen_random_tree, gen_ternary_grid, spin, GridSpec,
    RandomGraphSpec,
};

/// Tightness of a bound: `max_x (upper(x) - lower(x))`.
pub fn gap(b: &MeasureBox) -> f64 {
    b.width()
}

/// Largest absolute per-state difference between two measures on one scope.
pub fn sup_distance(a: &Measure, b: &Measure) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Builds the tree for `method` and propagates; `elapsed` covers both steps.
pub fn run_bound(
    g: &FactorGraph,
    root: VariableId,
    method: Method,
    max_nodes: usize,
) -> Result<BoundResult> {
    let start = Instant::now();
    let mut r = match method {
        Method::SubT => boxprop_subtree(g, &build_subtree(g, root, max_nodes))?,
        Method::SawT => boxprop_sawtree(g, &build_saw_tree(g, root, max_nodes))?,
    };
    r.elapsed = start.elapsed();
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodBudget {
    pub method: Method,
    pub max_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactChoice {
    /// Skip the exact oracle.
    Off,
    /// Brute force when the joint space is small enough, else elimination.
    Auto,
    Engine(ExactEngine),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub bp: Option<BpOptions>,
    pub exact: ExactChoice,
    /// Variables to bound; `None` means all.
    pub roots: Option<Vec<VariableId>>,
    pub parallel: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            bp: Some(BpOptions::default()),
            exact: ExactChoice::Auto,
            roots: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub variable: VariableId,
    pub method: Method,
    pub gap: f64,
    pub elapsed: Duration,
}

/// One (variable, method) result as written to the detail stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRecord {
    pub variable: usize,
    pub method: Method,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes_used: usize,
    pub time_ms: f64,
}

impl From<&BoundResult> for DetailRecord {
    fn from(r: &BoundResult) -> Self {
        DetailRecord {
            variable: r.variable.0,
            method: r.method,
            lower: r.bounds.lower().values().to_vec(),
            upper: r.bounds.upper().values().to_vec(),
            nodes_used: r.nodes_used,
            time_ms: r.elapsed.as_secs_f64() * 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub variable: VariableId,
    pub method: Method,
    pub error: Error,
}

#[derive(Debug, Clone, Default)]
pub struct CompareReport {
    /// Sorted by method, then variable.
    pub results: Vec<BoundResult>,
    pub failures: Vec<Failure>,
    pub exact: Option<Vec<Measure>>,
    /// Why the exact oracle is missing, when it was requested.
    pub exact_error: Option<Error>,
    pub bp: Option<BpResult>,
}

impl CompareReport {
    pub fn gap_records(&self) -> Vec<GapRecord> {
        self.results
            .iter()
            .map(|r| GapRecord {
                variable: r.variable,
                method: r.method,
                gap: r.gap(),
                elapsed: r.elapsed,
            })
            .collect()
    }

    pub fn details(&self) -> Vec<DetailRecord> {
        self.results.iter().map(DetailRecord::from).collect()
    }

    /// `max_x |belief(x) - exact(x)|` per variable, when both are available.
    pub fn bp_errors(&self) -> Option<Vec<f64>> {
        let (bp, exact) = (self.bp.as_ref()?, self.exact.as_ref()?);
        Some(
            bp.beliefs
                .iter()
                .zip(exact)
                .map(|(b, e)| sup_distance(b, e))
                .collect(),
        )
    }

    pub fn method_totals(&self) -> BTreeMap<Method, Duration> {
        let mut out = BTreeMap::new();
        for r in &self.results {
            *out.entry(r.method).or_insert(Duration::ZERO) += r.elapsed;
        }
        out
    }

    pub fn gaps_of(&self, method: Method) -> Vec<f64> {
        self.results
            .iter()
            .filter(|r| r.method == method)
            .map(BoundResult::gap)
            .collect()
    }

    /// Checks every box is a valid bound on a probability vector:
    /// `0 <= lower <= upper <= 1` and `sum lower <= 1 <= sum upper`.
    pub fn check_invariants(&self, slack: f64) -> std::result::Result<(), String> {
        for r in &self.results {
            let l = r.bounds.lower().values();
            let u = r.bounds.upper().values();
            let ok_range = l
                .iter()
                .zip(u)
                .all(|(&l, &u)| l >= -slack && l <= u + slack && u <= 1.0 + slack);
            let sl: f64 = l.iter().sum();
            let su: f64 = u.iter().sum();
            if !ok_range || sl > 1.0 + slack || su < 1.0 - slack {
                return Err(format!(
                    "{} box for variable {} is not a valid probability bound: {l:?} .. {u:?}",
                    r.method, r.variable
                ));
            }
        }
        Ok(())
    }
}

/// Runs every method on every requested variable, plus the optional BP and
/// exact oracles. Failures are recorded per (variable, method).
pub fn compare(g: &FactorGraph, methods: &[MethodBudget], opts: &CompareOptions) -> CompareReport {
    let roots: Vec<VariableId> = opts
        .roots
        .clone()
        .unwrap_or_else(|| g.variable_ids().collect());
    let tasks: Vec<(VariableId, MethodBudget)> = methods
        .iter()
        .flat_map(|&m| roots.iter().map(move |&v| (v, m)))
        .collect();
    let run = |&(v, m): &(VariableId, MethodBudget)| {
        (v, m.method, run_bound(g, v, m.method, m.max_nodes))
    };
    let outcomes: Vec<_> = if opts.parallel {
        tasks.par_iter().map(run).collect()
    } else {
        tasks.iter().map(run).collect()
    };

    let mut report = CompareReport::default();
    for (variable, method, outcome) in outcomes {
        match outcome {
            Ok(r) => report.results.push(r),
            Err(error) => report.failures.push(Failure {
                variable,
                method,
                error,
            }),
        }
    }
    report.results.sort_by_key(|r| (r.method, r.variable));
    report.failures.sort_by_key(|f| (f.method, f.variable));

    if methods.is_empty() {
        return report;
    }
    let engine = match opts.exact {
        ExactChoice::Off => None,
        ExactChoice::Auto if g.joint_states() <= BRUTE_FORCE_LIMIT.min(1 << 16) => {
            Some(ExactEngine::Brute)
        }
        ExactChoice::Auto => Some(ExactEngine::VarElim),
        ExactChoice::Engine(e) => Some(e),
    };
    if let Some(engine) = engine {
        match exact_marginals(g, engine) {
            Ok(m) => report.exact = Some(m),
            Err(e) => report.exact_error = Some(e),
        }
    }
    report.bp = opts.bp.map(|o| bp_marginals(g, o));
    report
}

/// Summary CSV: `variable,method,gap,time_ms`, sorted by method then variable.
pub fn summary_csv(report: &CompareReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["variable", "method", "gap", "time_ms"])
        .map_err(io)?;
    for r in report.gap_records() {
        w.write_record([
            r.variable.0.to_string(),
            r.method.to_string(),
            r.gap.to_string(),
            format!("{:.3}", r.elapsed.as_secs_f64() * 1e3),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One JSON object per line with `variable`, `method`, `lower`, `upper`,
/// `nodes_used`, `time_ms`.
pub fn detail_lines(records: &[DetailRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

pub fn parse_detail_lines(text: &str) -> Result<Vec<DetailRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Plot-ready sorted profiles: `series,rank,value`, one series per method
/// (gaps, ascending) plus `BP-error` when available.
pub fn profile_csv(report: &CompareReport) -> Result<String> {
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &report.results {
        series
            .entry(r.method.to_string())
            .or_default()
            .push(r.gap());
    }
    if let Some(errs) = report.bp_errors() {
        series.insert("BP-error".into(), errs);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["series", "rank", "value"]).map_err(io)?;
    for (name, mut values) in series {
        values.sort_by(f64::total_cmp);
        for (rank, v) in values.iter().enumerate() {
            w.write_record([name.clone(), rank.to_string(), v.to_string()])
                .map_err(io)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}
