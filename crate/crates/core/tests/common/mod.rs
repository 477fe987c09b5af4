#![allow(dead_code)]

use boxprop_core::bench::{gen_random_graph, gen_random_tree, RandomGraphSpec};
use boxprop_core::{parse_fg, FactorGraph, Measure, MeasureBox, Node, VariableId};

/// Three binary variables in a triangle, every factor `(1 2; 2 1)`.
/// Variable 0 is i, 1 is j, 2 is k; factor 0 is J (i,j), 1 is K (i,k),
/// 2 is L (j,k).
pub fn triangle() -> FactorGraph {
    let block = |a: usize, b: usize| format!("2\n{a} {b}\n2 2\n4\n0 1\n1 2\n2 2\n3 1\n");
    parse_fg(&format!(
        "3\n\n{}\n{}\n{}",
        block(0, 1),
        block(0, 2),
        block(1, 2)
    ))
    .unwrap()
}

pub const I: VariableId = VariableId(0);
pub const J_VAR: VariableId = VariableId(1);
pub const K_VAR: VariableId = VariableId(2);

pub fn var(i: usize) -> Node {
    Node::Var(VariableId(i))
}

pub fn fac(i: usize) -> Node {
    Node::Factor(boxprop_core::FactorId(i))
}

/// Naive exact marginals: enumerate every joint assignment, multiply table
/// lookups, accumulate. Independent of the library's inference engines.
pub fn naive_marginals(g: &FactorGraph) -> Vec<Vec<f64>> {
    let cards: Vec<usize> = g.variables().iter().map(|v| v.domain_size).collect();
    let total: usize = cards.iter().product();
    let mut acc: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut x = vec![0usize; cards.len()];
    for _ in 0..total {
        let mut p = 1.0;
        for f in g.factors() {
            let t = f.table();
            let mut idx = 0;
            let mut stride = 1;
            for (v, c) in t.scope().iter().zip(t.cards()) {
                idx += x[v.0] * stride;
                stride *= c;
            }
            p *= t.values()[idx];
        }
        for (v, &s) in x.iter().enumerate() {
            acc[v][s] += p;
        }
        for v in 0..x.len() {
            x[v] += 1;
            if x[v] < cards[v] {
                break;
            }
            x[v] = 0;
        }
    }
    for a in &mut acc {
        let z: f64 = a.iter().sum();
        a.iter_mut().for_each(|v| *v /= z);
    }
    acc
}

pub fn as_measure(v: VariableId, values: &[f64]) -> Measure {
    Measure::unary(v, values.to_vec()).unwrap()
}

pub fn assert_box(b: &MeasureBox, lower: &[f64], upper: &[f64], tol: f64) {
    for (k, (&got, &want)) in b.lower().values().iter().zip(lower).enumerate() {
        assert!((got - want).abs() <= tol, "lower[{k}] = {got}, want {want}");
    }
    for (k, (&got, &want)) in b.upper().values().iter().zip(upper).enumerate() {
        assert!((got - want).abs() <= tol, "upper[{k}] = {got}, want {want}");
    }
}

/// The random connected graphs used by the soundness sweeps: at most 10
/// variables, domains at most 4, factor arity at most 3.
pub fn sweep_graph(seed: u64) -> FactorGraph {
    let n = 2 + (seed % 9) as usize;
    gen_random_graph(&RandomGraphSpec {
        num_variables: n,
        max_domain: 4,
        max_arity: 3,
        extra_factors: (seed % 4) as usize,
        unary_prob: 0.3,
        strength: 1.0,
        seed,
    })
    .unwrap()
}

pub fn pairwise_graph(seed: u64) -> FactorGraph {
    gen_random_graph(&RandomGraphSpec {
        num_variables: 3 + (seed % 6) as usize,
        max_domain: 3,
        max_arity: 2,
        extra_factors: 1 + (seed % 4) as usize,
        unary_prob: 0.5,
        strength: 1.0,
        seed,
    })
    .unwrap()
}

pub fn random_tree(seed: u64, n: usize) -> FactorGraph {
    gen_random_tree(&RandomGraphSpec {
        num_variables: n,
        max_domain: 3,
        max_arity: 3,
        extra_factors: 0,
        unary_prob: 0.3,
        strength: 1.0,
        seed,
    })
    .unwrap()
}
