//! Seeded random factor graphs.
//!
//! All generators draw from `ChaCha8Rng::seed_from_u64(seed)`; normal variates
//! come from `rand_distr::StandardNormal`. Identical arguments give identical
//! graphs within this implementation; nothing is promised across
//! implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factorgraph::{FactorGraph, VariableId};
use crate::measure::Measure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub domain_size: usize,
    pub beta: f64,
    pub seed: u64,
}

impl GridSpec {
    fn check(&self, domain: usize) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one row and column".into(),
            ));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.domain_size != domain {
            return Err(Error::InvalidArgument(format!(
                "expected domain size {domain}, got {}",
                self.domain_size
            )));
        }
        if self.rows * self.cols < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least two variables".into(),
            ));
        }
        Ok(())
    }

    /// Nearest-neighbor edges: all horizontal edges row by row, then all
    /// vertical edges.
    pub fn edges(&self) -> Vec<(VariableId, VariableId)> {
        let id = |r: usize, c: usize| VariableId(r * self.cols + c);
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols.saturating_sub(1) {
                out.push((id(r, c), id(r, c + 1)));
            }
        }
        for r in 0..self.rows.saturating_sub(1) {
            for c in 0..self.cols {
                out.push((id(r, c), id(r + 1, c)));
            }
        }
        out
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Spin value of a binary state: state 0 is spin -1, state 1 is spin +1.
pub fn spin(state: usize) -> f64 {
    if state == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Binary spin-glass grid `P(x) ~ exp(sum_i theta_i x_i + sum_{ij} J_ij x_i x_j)`.
///
/// Fields and couplings are drawn once at unit strength (all fields in
/// variable order, then couplings in [`GridSpec::edges`] order) and then
/// multiplied by `beta`, so one seed gives the same instance at every
/// interaction strength. Factors: one unary factor per variable, then one
/// pairwise factor per edge.
pub fn gen_ising_grid(spec: &GridSpec) -> Result<FactorGraph> {
    spec.check(2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.rows * spec.cols;
    let theta: Vec<f64> = (0..n).map(|_| normal(&mut rng) * spec.beta).collect();
    let edges = spec.edges();
    let coupling: Vec<f64> = edges.iter().map(|_| normal(&mut rng) * spec.beta).collect();
    let mut tables = Vec::with_capacity(n + edges.len());
    for (i, &t) in theta.iter().enumerate() {
        tables.push(Measure::unary(
            VariableId(i),
            (0..2).map(|s| (t * spin(s)).exp()).collect(),
        )?);
    }
    for (&(a, b), &j) in edges.iter().zip(&coupling) {
        let values = (0..4)
            .map(|k| (j * spin(k % 2) * spin(k / 2)).exp())
            .collect();
        tables.push(Measure::new(vec![a, b], vec![2, 2], values)?);
    }
    FactorGraph::from_tables(tables)
}

/// Ternary grid with pairwise factors only; every table entry is
/// `exp(beta * z)` with `z` standard normal, drawn edge by edge.
pub fn gen_ternary_grid(spec: &GridSpec) -> Result<FactorGraph> {
    spec.check(3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tables = spec
        .edges()
        .into_iter()
        .map(|(a, b)| {
            let values = (0..9)
                .map(|_| (normal(&mut rng) * spec.beta).exp())
                .collect();
            Measure::new(vec![a, b], vec![3, 3], values)
        })
        .collect::<Result<Vec<_>>>()?;
    FactorGraph::from_tables(tables)
}

/// Shape of a random connected graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGraphSpec {
    pub num_variables: usize,
    /// Domain sizes are drawn uniformly from `2..=max_domain`.
    pub max_domain: usize,
    /// Factor arities are drawn uniformly from `2..=max_arity`.
    pub max_arity: usize,
    /// Factors beyond the spanning ones, creating cycles.
    pub extra_factors: usize,
    /// Probability of attaching a unary factor to each variable.
    pub unary_prob: f64,
    /// Standard deviation of the log table entries.
    pub strength: f64,
    pub seed: u64,
}

fn positive_table(
    rng: &mut ChaCha8Rng,
    scope: Vec<VariableId>,
    domains: &[usize],
    strength: f64,
) -> Result<Measure> {
    let cards: Vec<usize> = scope.iter().map(|v| domains[v.0]).collect();
    let len = cards.iter().product();
    let values = (0..len).map(|_| (normal(rng) * strength).exp()).collect();
    Measure::new(scope, cards, values)
}

fn pick_distinct(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    exclude: &[VariableId],
) -> Vec<VariableId> {
    let mut out: Vec<VariableId> = Vec::with_capacity(k);
    let available = n - exclude.len();
    let k = k.min(available);
    while out.len() < k {
        let v = VariableId(rng.random_range(0..n));
        if !exclude.contains(&v) && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Connected graph with strictly positive tables: a spanning set of factors
/// linking each variable to earlier ones, `extra_factors` further factors over
/// random variable sets, and optional unary factors.
pub fn gen_random_graph(spec: &RandomGraphSpec) -> Result<FactorGraph> {
    let n = spec.num_variables;
    if n < 2 || spec.max_domain < 2 || spec.max_arity < 2 {
        return Err(Error::InvalidArgument(
            "random graphs need at least two variables, domains and arities".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let domains: Vec<usize> = (0..n)
        .map(|_| rng.random_range(2..=spec.max_domain))
        .collect();
    let mut tables = Vec::new();
    for v in 1..n {
        let arity = rng.random_range(2..=spec.max_arity).min(v + 1);
        let mut scope = vec![VariableId(v)];
        let earlier: Vec<VariableId> = (v..n).map(VariableId).collect();
        scope.extend(pick_distinct(&mut rng, n, arity - 1, &earlier));
        tables.push(positive_table(&mut rng, scope, &domains, spec.strength)?);
    }
    for _ in 0..spec.extra_factors {
        let arity = rng.random_range(2..=spec.max_arity).min(n);
        let scope = pick_distinct(&mut rng, n, arity, &[]);
        tables.push(positive_table(&mut rng, scope, &domains, spec.strength)?);
    }
    for v in 0..n {
        if rng.random_bool(spec.unary_prob) {
            tables.push(positive_table(
                &mut rng,
                vec![VariableId(v)],
                &domains,
                spec.strength,
            )?);
        }
    }
    FactorGraph::from_tables(tables)
}

/// Random factor tree: every new factor joins one existing variable to
/// `arity - 1` fresh ones, plus optional unary factors.
pub fn gen_random_tree(spec: &RandomGraphSpec) -> Result<FactorGraph> {
    let n = spec.num_variables;
    if n < 2 || spec.max_domain < 2 || spec.max_arity < 2 {
        return Err(Error::InvalidArgument(
            "random trees need at least two variables, domains and arities".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let domains: Vec<usize> = (0..n)
        .map(|_| rng.random_range(2..=spec.max_domain))
        .collect();
    let mut tables = Vec::new();
    let mut placed = 1;
    while placed < n {
        let fresh = rng.random_range(1..spec.max_arity).min(n - placed);
        let anchor = VariableId(rng.random_range(0..placed));
        let mut scope: Vec<VariableId> = (placed..placed + fresh).map(VariableId).collect();
        let at = rng.random_range(0..=scope.len());
        scope.insert(at, anchor);
        placed += fresh;
        tables.push(positive_table(&mut rng, scope, &domains, spec.strength)?);
    }
    for v in 0..n {
        if rng.random_bool(spec.unary_prob) {
            tables.push(positive_table(
                &mut rng,
                vec![VariableId(v)],
                &domains,
                spec.strength,
            )?);
        }
    }
    FactorGraph::from_tables(tables)
}
