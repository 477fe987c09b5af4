use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::factorgraph::{FactorGraph, VariableId};
use crate::measure::{marginalize_out, multiply, normalize, Measure};

/// Largest joint state space the brute-force engine enumerates.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 26;

/// Largest intermediate table variable elimination may create.
pub const ELIMINATION_TABLE_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactEngine {
    Brute,
    VarElim,
}

impl fmt::Display for ExactEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExactEngine::Brute => "brute",
            ExactEngine::VarElim => "varelim",
        })
    }
}

impl FromStr for ExactEngine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brute" => Ok(ExactEngine::Brute),
            "varelim" | "ve" => Ok(ExactEngine::VarElim),
            _ => Err(Error::InvalidArgument(format!(
                "unknown exact engine `{s}`"
            ))),
        }
    }
}

/// Exact single-variable marginals of the normalized product of all factors.
pub fn exact_marginals(g: &FactorGraph, engine: ExactEngine) -> Result<Vec<Measure>> {
    match engine {
        ExactEngine::Brute => brute_force(g),
        ExactEngine::VarElim => g.variable_ids().map(|v| eliminate_all_but(g, v)).collect(),
    }
}

fn brute_force(g: &FactorGraph) -> Result<Vec<Measure>> {
    let needed = g.joint_states();
    if needed > BRUTE_FORCE_LIMIT {
        return Err(Error::CapacityExceeded {
            what: "brute-force joint enumeration",
            needed,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let n = g.num_variables();
    let cards: Vec<usize> = g.variables().iter().map(|v| v.domain_size).collect();
    // log tables and the stride of each variable inside each factor's table
    let logs: Vec<Vec<f64>> = g
        .factors()
        .iter()
        .map(|f| f.table().values().iter().map(|v| v.ln()).collect())
        .collect();
    let mut strides: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (fi, f) in g.factors().iter().enumerate() {
        let mut stride = 1;
        for (&v, &c) in f.scope().iter().zip(f.table().cards()) {
            strides[v.0].push((fi, stride));
            stride *= c;
        }
    }
    let mut index = vec![0usize; g.num_factors()];
    let mut states = vec![0usize; n];
    // accumulators are kept relative to exp(scale)
    let mut acc: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut scale = f64::NEG_INFINITY;
    for _ in 0..needed {
        let logp: f64 = index.iter().zip(&logs).map(|(&i, l)| l[i]).sum();
        if logp > f64::NEG_INFINITY {
            if logp > scale {
                let shrink = (scale - logp).exp();
                acc.iter_mut().flatten().for_each(|a| *a *= shrink);
                scale = logp;
            }
            let w = (logp - scale).exp();
            for (v, &s) in states.iter().enumerate() {
                acc[v][s] += w;
            }
        }
        for v in 0..n {
            states[v] += 1;
            if states[v] < cards[v] {
                for &(fi, st) in &strides[v] {
                    index[fi] += st;
                }
                break;
            }
            for &(fi, st) in &strides[v] {
                index[fi] -= st * (cards[v] - 1);
            }
            states[v] = 0;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(v, a)| normalize(&Measure::unary(VariableId(v), a)?))
        .collect()
}

fn rescale(m: Measure) -> Measure {
    let max = m.values().iter().copied().fold(0.0, f64::max);
    if max > 0.0 && max.is_finite() {
        m.scaled(1.0 / max)
    } else {
        m
    }
}

/// Sum-product variable elimination of every variable except `target`, using
/// a greedy min-degree order (ties broken by id). Intermediate tables are
/// rescaled to a maximum of one to keep products in range.
fn eliminate_all_but(g: &FactorGraph, target: VariableId) -> Result<Measure> {
    let mut pool: Vec<Measure> = g
        .factors()
        .iter()
        .map(|f| rescale(f.table().clone()))
        .collect();
    let mut remaining: BTreeSet<VariableId> = g.variable_ids().filter(|&v| v != target).collect();
    while !remaining.is_empty() {
        let next = *remaining
            .iter()
            .min_by_key(|&&v| {
                let nb: BTreeSet<VariableId> = pool
                    .iter()
                    .filter(|m| m.position(v).is_some())
                    .flat_map(|m| m.scope().iter().copied())
                    .collect();
                (nb.len(), v)
            })
            .expect("nonempty");
        remaining.remove(&next);
        let (touching, rest): (Vec<Measure>, Vec<Measure>) =
            pool.into_iter().partition(|m| m.position(next).is_some());
        pool = rest;
        let scope: BTreeSet<VariableId> = touching
            .iter()
            .flat_map(|m| m.scope().iter().copied())
            .collect();
        let needed = scope
            .iter()
            .try_fold(1u128, |acc, &v| acc.checked_mul(g.card(v) as u128))
            .unwrap_or(u128::MAX);
        if needed > ELIMINATION_TABLE_LIMIT {
            return Err(Error::CapacityExceeded {
                what: "variable elimination table",
                needed,
                limit: ELIMINATION_TABLE_LIMIT,
            });
        }
        let mut prod = Measure::scalar(1.0);
        for m in &touching {
            prod = multiply(&prod, m)?;
        }
        pool.push(rescale(marginalize_out(&prod, &[next].into())?));
    }
    let mut result = Measure::constant(vec![target], vec![g.card(target)], 1.0)?;
    for m in &pool {
        result = rescale(multiply(&result, m)?);
    }
    let all_but: BTreeSet<VariableId> = result
        .scope()
        .iter()
        .copied()
        .filter(|&v| v != target)
        .collect();
    normalize(&marginalize_out(&result, &all_but)?)
}
