//! Bound propagation over subtrees and self-avoiding-walk trees, plus the
//! loopy BP and exact-inference oracles the bounds are checked against.

mod bp;
mod exact;
mod saw;
mod subtree;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorgraph::VariableId;
use crate::measure::{
    box_product_same_scope, normalized_bounding_box, Measure, MeasureBox, MessageSet,
};

pub use bp::{bp_marginals, BpOptions, BpResult};
pub use exact::{exact_marginals, ExactEngine, BRUTE_FORCE_LIMIT, ELIMINATION_TABLE_LIMIT};
pub use saw::{boxprop_sawtree, build_saw_tree, SawKind, SawNode, SawTree};
pub use subtree::{boxprop_subtree, build_subtree, Subtree, SubtreeNode};

/// Default truncation budget for both tree builders.
pub const DEFAULT_MAX_NODES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SubT")]
    SubT,
    #[serde(rename = "SAWT")]
    SawT,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::SubT => "SubT",
            Method::SawT => "SAWT",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "subt" | "subtree" => Ok(Method::SubT),
            "sawt" | "sawtree" => Ok(Method::SawT),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

/// Bound on one variable's marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub variable: VariableId,
    pub bounds: MeasureBox,
    pub method: Method,
    pub nodes_used: usize,
    pub elapsed: Duration,
}

impl BoundResult {
    pub fn gap(&self) -> f64 {
        self.bounds.width()
    }
}

/// Combines the messages arriving at a variable node: the product of the
/// boxes, or the simplex if any message is a simplex. No messages at all
/// gives the constant-one measure.
fn combine_at_variable<'a>(
    var: VariableId,
    card: usize,
    msgs: impl IntoIterator<Item = &'a MessageSet>,
) -> Result<MessageSet> {
    let mut boxes = Vec::new();
    for m in msgs {
        match m {
            MessageSet::Simplex { .. } => return Ok(MessageSet::simplex(var, card)),
            MessageSet::Box(b) => boxes.push(b.clone()),
        }
    }
    if boxes.is_empty() {
        let ones = Measure::constant(vec![var], vec![card], 1.0)?;
        return Ok(MessageSet::Box(MeasureBox::degenerate(ones)));
    }
    Ok(MessageSet::Box(box_product_same_scope(&boxes)?))
}

/// Final belief at the root: the bounding box of the normalized product of
/// the incoming boxes, or the whole simplex if any message is a simplex.
fn root_belief<'a>(
    var: VariableId,
    card: usize,
    msgs: impl IntoIterator<Item = &'a MessageSet>,
) -> Result<MeasureBox> {
    match combine_at_variable(var, card, msgs)? {
        MessageSet::Simplex { .. } => Ok(MeasureBox::unit(var, card)),
        MessageSet::Box(b) => normalized_bounding_box(&b),
    }
}
