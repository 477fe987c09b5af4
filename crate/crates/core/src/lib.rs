//! Rigorous bounds on single-variable marginals of discrete factor graphs.
//!
//! Boxes of measures are propagated from the leaves of a tree towards a root
//! variable; the box arriving at the root encloses both the exact marginal
//! and any loopy belief propagation fixed point. Two tree families are
//! supported: breadth-first subtrees of the factor graph
//! ([`propagation::boxprop_subtree`]) and self-avoiding-walk trees
//! ([`propagation::boxprop_sawtree`]).

pub mod bench;
pub mod error;
pub mod factorgraph;
pub mod measure;
pub mod propagation;

pub use error::{Error, Result};
pub use factorgraph::{
    markov_blanket, parse_fg, validate, write_fg, Factor, FactorGraph, FactorId, Node, Variable,
    VariableId, Violation,
};
pub use measure::{Measure, MeasureBox, MessageSet};
pub use propagation::{BoundResult, Method};
