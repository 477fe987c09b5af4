use crate::factorgraph::{FactorGraph, VariableId};
use crate::measure::Measure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight kept from the previous factor-to-variable message, in `[0, 1)`.
    pub damping: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            tol: 1e-9,
            max_iter: 10_000,
            damping: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub beliefs: Vec<Measure>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest message change in the last sweep (sup norm).
    pub max_change: f64,
}

fn normalize_in_place(xs: &mut [f64]) {
    let z: f64 = xs.iter().sum();
    if z > 0.0 {
        xs.iter_mut().for_each(|x| *x /= z);
    } else {
        let u = 1.0 / xs.len() as f64;
        xs.iter_mut().for_each(|x| *x = u);
    }
}

/// Loopy belief propagation with a flooding schedule: each sweep recomputes
/// every factor-to-variable message from the current variable-to-factor
/// messages, then every variable-to-factor message. Messages are normalized;
/// convergence means the largest change of a factor-to-variable message
/// dropped below `tol`.
pub fn bp_marginals(g: &FactorGraph, opts: BpOptions) -> BpResult {
    let factors = g.factors();
    // messages indexed [factor][scope position][state]
    let uniform = |f: usize| -> Vec<Vec<f64>> {
        factors[f]
            .table()
            .cards()
            .iter()
            .map(|&c| vec![1.0 / c as f64; c])
            .collect()
    };
    let mut to_var: Vec<Vec<Vec<f64>>> = (0..factors.len()).map(uniform).collect();
    let mut to_fac = to_var.clone();
    // incidence of each variable: (factor, position in scope)
    let incidence: Vec<Vec<(usize, usize)>> = g
        .variable_ids()
        .map(|v| {
            g.factors_of(v)
                .iter()
                .map(|&f| (f.0, factors[f.0].table().position(v).expect("adjacent")))
                .collect()
        })
        .collect();

    let mut converged = false;
    let mut iterations = 0;
    let mut max_change = f64::INFINITY;
    let mut states = Vec::new();
    while iterations < opts.max_iter {
        iterations += 1;
        max_change = 0.0f64;
        for (f, factor) in factors.iter().enumerate() {
            let t = factor.table();
            let cards = t.cards();
            let arity = cards.len();
            let mut out: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
            states.clear();
            states.resize(arity, 0usize);
            for &psi in t.values() {
                for p in 0..arity {
                    let mut w = psi;
                    for q in 0..arity {
                        if q != p {
                            w *= to_fac[f][q][states[q]];
                        }
                    }
                    out[p][states[p]] += w;
                }
                for (p, s) in states.iter_mut().enumerate() {
                    *s += 1;
                    if *s < cards[p] {
                        break;
                    }
                    *s = 0;
                }
            }
            for (p, new) in out.iter_mut().enumerate() {
                normalize_in_place(new);
                let old = &mut to_var[f][p];
                for (o, n) in old.iter_mut().zip(new.iter()) {
                    let damped = opts.damping * *o + (1.0 - opts.damping) * n;
                    max_change = max_change.max((damped - *o).abs());
                    *o = damped;
                }
            }
        }
        for inc in &incidence {
            for &(f, p) in inc {
                let mut m = vec![1.0; to_var[f][p].len()];
                for &(f2, p2) in inc {
                    if f2 != f {
                        for (x, y) in m.iter_mut().zip(&to_var[f2][p2]) {
                            *x *= y;
                        }
                    }
                }
                normalize_in_place(&mut m);
                to_fac[f][p] = m;
            }
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    let beliefs = incidence
        .iter()
        .enumerate()
        .map(|(v, inc)| {
            let mut b = vec![1.0; g.card(VariableId(v))];
            for &(f, p) in inc {
                for (x, y) in b.iter_mut().zip(&to_var[f][p]) {
                    *x *= y;
                }
            }
            normalize_in_place(&mut b);
            Measure::unary(VariableId(v), b).expect("beliefs are valid measures")
        })
        .collect();
    BpResult {
        beliefs,
        converged,
        iterations,
        max_change,
    }
}
