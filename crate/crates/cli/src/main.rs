//! `boxprop`: generate factor graphs, bound their marginals, and compare
//! against loopy BP and exact inference.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a computation or
//! validation error.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use boxprop_core::bench::{
    compare, detail_lines, gen_ising_grid, gen_ternary_grid, median, profile_csv, run_bound,
    summary_csv, CompareOptions, DetailRecord, ExactChoice, GridSpec, MethodBudget,
};
use boxprop_core::propagation::{
    bp_marginals, exact_marginals, BpOptions, ExactEngine, DEFAULT_MAX_NODES,
};
use boxprop_core::{parse_fg, validate, write_fg, FactorGraph, Measure, Method, VariableId};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "boxprop",
    version,
    about = "Rigorous bounds on factor-graph marginals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded benchmark graph.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Check that a graph is connected and satisfies the positivity condition.
    Validate(InputArgs),
    /// Bound single-variable marginals with box propagation.
    Bound(BoundArgs),
    /// Loopy belief propagation.
    Bp(BpArgs),
    /// Exact marginals.
    Exact(ExactArgs),
    /// Run both bound methods, BP and the exact oracle on every variable.
    Compare(CompareArgs),
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Square-lattice grid: a binary spin glass (domain 2) or a ternary grid
    /// with random pairwise tables (domain 3).
    Grid(GridArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// 2 or 3.
    #[arg(long, default_value_t = 2)]
    domain: usize,
    /// Interaction strength; parameters are drawn at strength 1 and scaled.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Factor graph in `.fg` format.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Root {
    All,
    One(usize),
}

impl FromStr for Root {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Root::All);
        }
        s.parse()
            .map(Root::One)
            .map_err(|_| format!("expected `all` or a variable id, got `{s}`"))
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Root::All => f.write_str("all"),
            Root::One(v) => write!(f, "{v}"),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum MethodArg {
    Subtree,
    Sawtree,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Subtree => Method::SubT,
            MethodArg::Sawtree => Method::SawT,
        }
    }
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Node budget for the subtree or SAW tree.
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: usize,
    /// `all` or a single variable id.
    #[arg(long, default_value_t = Root::All)]
    root: Root,
    /// Write detail records (one JSON object per line) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct BpFlags {
    /// Convergence threshold on the largest message change.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Weight of the previous message, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
}

impl BpFlags {
    fn options(self) -> anyhow::Result<BpOptions> {
        if self.tol.is_nan() || self.tol < 0.0 {
            usage(format!("--tol must be nonnegative, got {}", self.tol))?;
        }
        if !(0.0..1.0).contains(&self.damping) {
            usage(format!(
                "--damping must lie in [0, 1), got {}",
                self.damping
            ))?;
        }
        Ok(BpOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
        })
    }
}

#[derive(Args, Debug)]
struct BpArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bp: BpFlags,
    /// Write beliefs (one line per variable) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum EngineArg {
    Brute,
    Varelim,
}

impl From<EngineArg> for ExactEngine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Brute => ExactEngine::Brute,
            EngineArg::Varelim => ExactEngine::VarElim,
        }
    }
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = EngineArg::Varelim)]
    engine: EngineArg,
    /// Write marginals (one line per variable) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ExactArg {
    /// Brute force on small joint spaces, elimination otherwise.
    Auto,
    Off,
    Brute,
    Varelim,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Node budget shared by both methods.
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: usize,
    #[arg(long, value_enum, default_value_t = ExactArg::Auto)]
    exact: ExactArg,
    #[command(flatten)]
    bp: BpFlags,
    /// Summary CSV (`variable,method,gap,time_ms`); printed to stdout if absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Detail records, one JSON object per line.
    #[arg(long)]
    details: Option<PathBuf>,
    /// Sorted gap and BP-error profiles (`series,rank,value`).
    #[arg(long)]
    profile: Option<PathBuf>,
}

/// Marks an error as a usage error (exit status 1).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: String) -> anyhow::Result<T> {
    Err(Usage(msg).into())
}

/// Echoes every effective flag to stderr. Absent optional paths are omitted.
fn banner(command: &str, fields: &[(&str, String)]) {
    let rest: Vec<String> = fields
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| format!("--{k} {v}"))
        .collect();
    eprintln!("# boxprop {command} {}", rest.join(" "));
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn show_opt(p: &Option<PathBuf>) -> String {
    p.as_deref().map(show).unwrap_or_default()
}

/// Writes `contents` to a temporary file beside `path`, then renames it.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<FactorGraph> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_fg(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Loads and validates; violations are printed and turn into an error.
fn load_valid(path: &Path) -> anyhow::Result<FactorGraph> {
    let g = load(path)?;
    let violations = validate(&g);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        bail!(
            "{} failed validation ({} violations)",
            path.display(),
            violations.len()
        );
    }
    Ok(g)
}

fn check_max_nodes(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        usage("--max-nodes must be at least 1".into())?;
    }
    Ok(())
}

fn fmt_values(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn marginal_lines(ms: &[Measure]) -> String {
    ms.iter()
        .enumerate()
        .map(|(v, m)| format!("{v} {}\n", fmt_values(m.values())))
        .collect()
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(a: &GridArgs) -> anyhow::Result<()> {
    banner(
        "gen grid",
        &[
            ("rows", a.rows.to_string()),
            ("cols", a.cols.to_string()),
            ("domain", a.domain.to_string()),
            ("beta", a.beta.to_string()),
            ("seed", a.seed.to_string()),
            ("out", show(&a.out)),
        ],
    );
    let spec = GridSpec {
        rows: a.rows,
        cols: a.cols,
        domain_size: a.domain,
        beta: a.beta,
        seed: a.seed,
    };
    let generated = match a.domain {
        2 => gen_ising_grid(&spec),
        3 => gen_ternary_grid(&spec),
        d => return usage(format!("--domain must be 2 or 3, got {d}")),
    };
    let g = generated.map_err(|e| Usage(e.to_string()))?;
    write_atomic(&a.out, &write_fg(&g))
}

fn cmd_validate(a: &InputArgs) -> anyhow::Result<()> {
    banner("validate", &[("in", show(&a.input))]);
    let g = load_valid(&a.input)?;
    println!(
        "ok: {} variables, {} factors",
        g.num_variables(),
        g.num_factors()
    );
    Ok(())
}

fn cmd_bound(a: &BoundArgs) -> anyhow::Result<()> {
    let method = Method::from(a.method);
    banner(
        "bound",
        &[
            ("method", format!("{:?}", a.method).to_lowercase()),
            ("max-nodes", a.max_nodes.to_string()),
            ("root", a.root.to_string()),
            ("in", show(&a.input.input)),
            ("out", show_opt(&a.out)),
        ],
    );
    check_max_nodes(a.max_nodes)?;
    let g = load_valid(&a.input.input)?;
    let roots: Vec<VariableId> = match a.root {
        Root::All => g.variable_ids().collect(),
        Root::One(v) if v < g.num_variables() => vec![VariableId(v)],
        Root::One(v) => {
            return usage(format!(
                "--root {v} is out of range; the graph has {} variables",
                g.num_variables()
            ))
        }
    };
    let mut records = Vec::with_capacity(roots.len());
    for v in roots {
        let r = run_bound(&g, v, method, a.max_nodes)
            .with_context(|| format!("{method} bound for variable {v}"))?;
        println!(
            "{v} {method} lower={} upper={} gap={} nodes={}",
            fmt_values(r.bounds.lower().values()),
            fmt_values(r.bounds.upper().values()),
            r.gap(),
            r.nodes_used
        );
        records.push(DetailRecord::from(&r));
    }
    if let Some(out) = &a.out {
        write_atomic(out, &detail_lines(&records))?;
    }
    Ok(())
}

fn cmd_bp(a: &BpArgs) -> anyhow::Result<()> {
    banner(
        "bp",
        &[
            ("tol", a.bp.tol.to_string()),
            ("max-iter", a.bp.max_iter.to_string()),
            ("damping", a.bp.damping.to_string()),
            ("in", show(&a.input.input)),
            ("out", show_opt(&a.out)),
        ],
    );
    let opts = a.bp.options()?;
    let g = load_valid(&a.input.input)?;
    let r = bp_marginals(&g, opts);
    eprintln!(
        "converged={} iterations={} max_change={:e}",
        r.converged, r.iterations, r.max_change
    );
    emit(&a.out, &marginal_lines(&r.beliefs))
}

fn cmd_exact(a: &ExactArgs) -> anyhow::Result<()> {
    let engine = ExactEngine::from(a.engine);
    banner(
        "exact",
        &[
            ("engine", engine.to_string()),
            ("in", show(&a.input.input)),
            ("out", show_opt(&a.out)),
        ],
    );
    let g = load_valid(&a.input.input)?;
    let m = exact_marginals(&g, engine)?;
    emit(&a.out, &marginal_lines(&m))
}

fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    banner(
        "compare",
        &[
            ("max-nodes", a.max_nodes.to_string()),
            ("exact", format!("{:?}", a.exact).to_lowercase()),
            ("tol", a.bp.tol.to_string()),
            ("max-iter", a.bp.max_iter.to_string()),
            ("damping", a.bp.damping.to_string()),
            ("in", show(&a.input.input)),
            ("summary", show_opt(&a.summary)),
            ("details", show_opt(&a.details)),
            ("profile", show_opt(&a.profile)),
        ],
    );
    check_max_nodes(a.max_nodes)?;
    let bp = a.bp.options()?;
    let g = load_valid(&a.input.input)?;
    let methods = [Method::SubT, Method::SawT].map(|method| MethodBudget {
        method,
        max_nodes: a.max_nodes,
    });
    let opts = CompareOptions {
        bp: Some(bp),
        exact: match a.exact {
            ExactArg::Auto => ExactChoice::Auto,
            ExactArg::Off => ExactChoice::Off,
            ExactArg::Brute => ExactChoice::Engine(ExactEngine::Brute),
            ExactArg::Varelim => ExactChoice::Engine(ExactEngine::VarElim),
        },
        ..CompareOptions::default()
    };
    let report = compare(&g, &methods, &opts);
    for f in &report.failures {
        eprintln!("failed: variable {} {}: {}", f.variable, f.method, f.error);
    }
    if let Some(e) = &report.exact_error {
        eprintln!("exact oracle unavailable: {e}");
    }
    if let Some(bp) = &report.bp {
        eprintln!(
            "bp: converged={} iterations={}",
            bp.converged, bp.iterations
        );
    }
    report
        .check_invariants(1e-9)
        .map_err(|e| anyhow::anyhow!("report failed its invariants: {e}"))?;
    for (method, total) in report.method_totals() {
        eprintln!(
            "{method}: total {:.3} ms, median gap {}",
            total.as_secs_f64() * 1e3,
            median(&report.gaps_of(method))
        );
    }
    emit(&a.summary, &summary_csv(&report)?)?;
    if let Some(p) = &a.details {
        write_atomic(p, &detail_lines(&report.details()))?;
    }
    if let Some(p) = &a.profile {
        write_atomic(p, &profile_csv(&report)?)?;
    }
    if !report.failures.is_empty() {
        bail!("{} bound computations failed", report.failures.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen {
            kind: GenKind::Grid(a),
        } => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Bp(a) => cmd_bp(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
