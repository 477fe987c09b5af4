//! Factor graphs over discrete variables and the `.fg` text format.
//!
//! The `.fg` layout is line oriented. Lines starting with `#` are comments and
//! blank lines only separate blocks. The first line holds the number of factor
//! blocks; each block lists the scope size, the variable ids, their domain
//! sizes, the number of table entries that follow, and then one
//! `index value` line per entry. Unlisted entries are zero. Tables use the
//! little-endian convention of [`Measure`]: the first scope variable cycles
//! fastest.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{joint_size, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariableId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactorId(pub usize);

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

/// A node of the bipartite factor graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Var(VariableId),
    Factor(FactorId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variable {
    pub id: VariableId,
    pub domain_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub id: FactorId,
    table: Measure,
}

impl Factor {
    pub fn scope(&self) -> &[VariableId] {
        self.table.scope()
    }

    pub fn table(&self) -> &Measure {
        &self.table
    }
}

/// Immutable factor graph. Variables are `0..N`, factors `0..F`; adjacency is
/// kept in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
    var_factors: Vec<Vec<FactorId>>,
    // factor scopes sorted by id, the exploration order for tree builders
    sorted_scopes: Vec<Vec<VariableId>>,
}

impl FactorGraph {
    /// Builds a graph from factor tables. Variable ids must be dense and agree
    /// on domain sizes wherever they appear.
    pub fn from_tables(tables: Vec<Measure>) -> Result<Self> {
        let mut domain: Vec<Option<usize>> = Vec::new();
        for (f, t) in tables.iter().enumerate() {
            if t.scope().is_empty() {
                return Err(Error::ScopeMismatch(format!(
                    "factor {f} has an empty scope"
                )));
            }
            for (&v, &c) in t.scope().iter().zip(t.cards()) {
                if c < 2 {
                    return Err(Error::DomainTooSmall {
                        variable: v.0,
                        size: c,
                    });
                }
                if v.0 >= domain.len() {
                    domain.resize(v.0 + 1, None);
                }
                match domain[v.0] {
                    Some(prev) if prev != c => {
                        return Err(Error::InconsistentDomain {
                            variable: v.0,
                            first: prev,
                            second: c,
                        })
                    }
                    _ => domain[v.0] = Some(c),
                }
            }
        }
        if let Some(missing) = domain.iter().position(Option::is_none) {
            return Err(Error::NonDenseIds {
                count: domain.len(),
                missing,
            });
        }
        let variables: Vec<Variable> = domain
            .iter()
            .enumerate()
            .map(|(i, d)| Variable {
                id: VariableId(i),
                domain_size: d.expect("checked dense"),
            })
            .collect();
        let mut var_factors = vec![Vec::new(); variables.len()];
        let mut sorted_scopes = Vec::with_capacity(tables.len());
        let factors: Vec<Factor> = tables
            .into_iter()
            .enumerate()
            .map(|(f, table)| {
                for v in table.scope() {
                    var_factors[v.0].push(FactorId(f));
                }
                let mut s = table.scope().to_vec();
                s.sort();
                sorted_scopes.push(s);
                Factor {
                    id: FactorId(f),
                    table,
                }
            })
            .collect();
        let g = FactorGraph {
            variables,
            factors,
            var_factors,
            sorted_scopes,
        };
        debug_assert!(g.is_bipartite_consistent());
        Ok(g)
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_ids(&self) -> impl Iterator<Item = VariableId> + '_ {
        self.variables.iter().map(|v| v.id)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, id: FactorId) -> &Factor {
        &self.factors[id.0]
    }

    pub fn card(&self, v: VariableId) -> usize {
        self.variables[v.0].domain_size
    }

    /// Factors containing `v`, ascending.
    pub fn factors_of(&self, v: VariableId) -> &[FactorId] {
        &self.var_factors[v.0]
    }

    /// Scope of `f` in ascending id order.
    pub fn sorted_scope(&self, f: FactorId) -> &[VariableId] {
        &self.sorted_scopes[f.0]
    }

    /// Neighbors of a node in ascending id order.
    pub fn neighbors(&self, n: Node) -> Vec<Node> {
        match n {
            Node::Var(v) => self
                .factors_of(v)
                .iter()
                .map(|&f| Node::Factor(f))
                .collect(),
            Node::Factor(f) => self.sorted_scope(f).iter().map(|&v| Node::Var(v)).collect(),
        }
    }

    /// Total number of joint states, saturating.
    pub fn joint_states(&self) -> u128 {
        self.variables
            .iter()
            .try_fold(1u128, |acc, v| acc.checked_mul(v.domain_size as u128))
            .unwrap_or(u128::MAX)
    }

    /// Whether every variable-factor edge is recorded on both sides.
    pub fn is_bipartite_consistent(&self) -> bool {
        let forward = self.factors.iter().all(|f| {
            f.scope()
                .iter()
                .all(|v| self.var_factors[v.0].contains(&f.id))
        });
        let backward = self.var_factors.iter().enumerate().all(|(v, fs)| {
            fs.iter()
                .all(|f| self.factors[f.0].scope().contains(&VariableId(v)))
        });
        forward && backward
    }

    /// Copy with factor `f`'s table multiplied by `c`.
    pub fn with_scaled_factor(&self, f: FactorId, c: f64) -> FactorGraph {
        let mut g = self.clone();
        g.factors[f.0].table = g.factors[f.0].table.scaled(c);
        g
    }
}

pub fn markov_blanket(g: &FactorGraph, i: VariableId) -> BTreeSet<VariableId> {
    g.factors_of(i)
        .iter()
        .flat_map(|&f| g.factor(f).scope().iter().copied())
        .filter(|&v| v != i)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Disconnected {
        components: usize,
    },
    /// `sum_{x_var} psi_factor` vanishes for this assignment of the other
    /// scope variables.
    Positivity {
        factor: FactorId,
        variable: VariableId,
        assignment: Vec<(VariableId, usize)>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Disconnected { components } => {
                write!(f, "graph is not connected ({components} components)")
            }
            Violation::Positivity {
                factor,
                variable,
                assignment,
            } => {
                write!(
                    f,
                    "factor {factor} sums to zero over variable {variable} at"
                )?;
                if assignment.is_empty() {
                    write!(f, " the empty assignment")?;
                }
                for (v, s) in assignment {
                    write!(f, " x{v}={s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Checks connectedness and the positivity condition: for every factor,
/// every scope variable, and every assignment of the remaining scope, the
/// factor summed over that variable is strictly positive.
pub fn validate(g: &FactorGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let components = count_components(g);
    if components > 1 {
        out.push(Violation::Disconnected { components });
    }
    for f in g.factors() {
        let t = f.table();
        for &var in t.scope() {
            let marg =
                crate::measure::marginalize_out(t, &[var].into()).expect("variable is in scope");
            let mut states = vec![0usize; marg.scope().len()];
            for &value in marg.values() {
                if value <= 0.0 {
                    out.push(Violation::Positivity {
                        factor: f.id,
                        variable: var,
                        assignment: marg.scope().iter().copied().zip(states.clone()).collect(),
                    });
                }
                for (p, s) in states.iter_mut().enumerate() {
                    *s += 1;
                    if *s < marg.cards()[p] {
                        break;
                    }
                    *s = 0;
                }
            }
        }
    }
    out
}

fn count_components(g: &FactorGraph) -> usize {
    let n = g.num_variables();
    let mut seen_var = vec![false; n];
    let mut seen_fac = vec![false; g.num_factors()];
    let mut components = 0;
    for start in 0..n {
        if seen_var[start] {
            continue;
        }
        components += 1;
        seen_var[start] = true;
        let mut queue = VecDeque::from([VariableId(start)]);
        while let Some(v) = queue.pop_front() {
            for &f in g.factors_of(v) {
                if std::mem::replace(&mut seen_fac[f.0], true) {
                    continue;
                }
                for &w in g.factor(f).scope() {
                    if !std::mem::replace(&mut seen_var[w.0], true) {
                        queue.push_back(w);
                    }
                }
            }
        }
    }
    components
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_content(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (n, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((n + 1, t));
        }
        Err(Error::Parse {
            line: 0,
            message: format!("unexpected end of input, expected {what}"),
        })
    }

    fn next_usize(&mut self, what: &str) -> Result<(usize, usize)> {
        let (n, t) = self.next_content(what)?;
        let v = t.parse().map_err(|_| Error::Parse {
            line: n,
            message: format!("expected {what}, found `{t}`"),
        })?;
        Ok((n, v))
    }

    fn next_usizes(&mut self, what: &str, count: usize) -> Result<Vec<usize>> {
        let (n, t) = self.next_content(what)?;
        let vals: Vec<usize> = t
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: n,
                message: format!("expected {what}, found `{t}`"),
            })?;
        if vals.len() != count {
            return Err(Error::Parse {
                line: n,
                message: format!("expected {count} {what}, found {}", vals.len()),
            });
        }
        Ok(vals)
    }
}

/// Parses the `.fg` text format: the number of factors, then one block per
/// factor giving its arity, variable ids, domain sizes, the count of listed
/// entries, and `index value` lines (unlisted entries are zero). Lines
/// starting with `#` are ignored.
pub fn parse_fg(text: &str) -> Result<FactorGraph> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, nfactors) = lines.next_usize("number of factors")?;
    let mut tables = Vec::with_capacity(nfactors);
    for f in 0..nfactors {
        let (_, k) = lines.next_usize("scope size")?;
        let ids = lines.next_usizes("variable ids", k)?;
        let cards = lines.next_usizes("domain sizes", k)?;
        let scope: Vec<VariableId> = ids.iter().map(|&i| VariableId(i)).collect();
        let mut seen = BTreeSet::new();
        for &v in &scope {
            if !seen.insert(v) {
                return Err(Error::DuplicateScopeVariable {
                    factor: f,
                    variable: v.0,
                });
            }
        }
        if let Some(p) = cards.iter().position(|&c| c < 2) {
            return Err(Error::DomainTooSmall {
                variable: ids[p],
                size: cards[p],
            });
        }
        let len = joint_size(&cards);
        let (_, m) = lines.next_usize("number of table entries")?;
        let mut values = vec![0.0; len];
        for _ in 0..m {
            let (n, t) = lines.next_content("table entry")?;
            let mut parts = t.split_whitespace();
            let (Some(idx), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: n,
                    message: format!("expected `index value`, found `{t}`"),
                });
            };
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: n,
                message: format!("bad table index `{idx}`"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: n,
                message: format!("bad table value `{val}`"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: n,
                    message: format!("non-finite table value `{val}`"),
                });
            }
            if val < 0.0 {
                return Err(Error::NegativeValue {
                    factor: f,
                    value: val,
                });
            }
            if idx >= len {
                return Err(Error::IndexOutOfRange {
                    factor: f,
                    index: idx,
                    len,
                });
            }
            values[idx] = val;
        }
        tables.push(Measure::new(scope, cards, values)?);
    }
    if let Ok((n, t)) = lines.next_content("end of input") {
        return Err(Error::Parse {
            line: n,
            message: format!("trailing content `{t}`"),
        });
    }
    FactorGraph::from_tables(tables)
}

/// Serializes every table entry, zeros included, in linear-index order.
/// Values use the shortest decimal form that parses back to the same `f64`.
pub fn write_fg(g: &FactorGraph) -> String {
    let mut s = String::new();
    // writing to a String cannot fail
    let _ = writeln!(s, "# factor graph: {} variables", g.num_variables());
    let _ = writeln!(
        s,
        "# tables are indexed with the first scope variable fastest"
    );
    let _ = writeln!(s, "{}", g.num_factors());
    for f in g.factors() {
        let t = f.table();
        let join = |xs: Vec<String>| xs.join(" ");
        let _ = writeln!(s);
        let _ = writeln!(s, "{}", t.scope().len());
        let _ = writeln!(
            s,
            "{}",
            join(t.scope().iter().map(|v| v.0.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "{}",
            join(t.cards().iter().map(|c| c.to_string()).collect())
        );
        let _ = writeln!(s, "{}", t.len());
        for (i, v) in t.values().iter().enumerate() {
            let _ = writeln!(s, "{i} {v}");
        }
    }
    s
}
