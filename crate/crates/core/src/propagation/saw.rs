use std::collections::VecDeque;
use std::time::Instant;

use super::{combine_at_variable, root_belief, BoundResult, Method, Subtree};
use crate::error::Result;
use crate::factorgraph::{FactorGraph, Node, VariableId};
use crate::measure::{
    bound_sum_product_joint, box_product_disjoint_sbb, Measure, MeasureBox, MessageSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SawKind {
    Root,
    Inner,
    /// The walk cannot be extended without backtracking.
    DeadEndLeaf,
    /// The walk's endpoint already occurs earlier on the same walk.
    CycleInducedLeaf,
    /// Extensions exist but were cut off by the node budget.
    TruncationLeaf,
}

/// One self-avoiding walk from the root; `endpoint` is its last node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SawNode {
    pub endpoint: Node,
    pub parent: Option<usize>,
    pub kind: SawKind,
    pub children: Vec<usize>,
}

/// Tree of self-avoiding walks, stored breadth-first (children after parents).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SawTree {
    root: VariableId,
    nodes: Vec<SawNode>,
}

impl SawTree {
    pub fn root(&self) -> VariableId {
        self.root
    }

    pub fn nodes(&self) -> &[SawNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn count(&self, kind: SawKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Endpoints along the walk of node `idx`, root first.
    pub fn walk(&self, idx: usize) -> Vec<Node> {
        let mut out = Vec::new();
        let mut cur = Some(idx);
        while let Some(i) = cur {
            out.push(self.nodes[i].endpoint);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }

    fn on_walk(&self, idx: usize, n: Node) -> bool {
        let mut cur = Some(idx);
        while let Some(i) = cur {
            if self.nodes[i].endpoint == n {
                return true;
            }
            cur = self.nodes[i].parent;
        }
        false
    }

    /// Non-backtracking extensions of the walk ending at `idx`.
    fn extensions(&self, g: &FactorGraph, idx: usize) -> Vec<Node> {
        let back = self.nodes[idx].parent.map(|p| self.nodes[p].endpoint);
        g.neighbors(self.nodes[idx].endpoint)
            .into_iter()
            .filter(|&n| Some(n) != back)
            .collect()
    }

    fn push_child(&mut self, g: &FactorGraph, parent: usize, endpoint: Node) -> usize {
        let kind = if self.on_walk(parent, endpoint) {
            SawKind::CycleInducedLeaf
        } else if g.neighbors(endpoint).len() <= 1 {
            // the only neighbor is the node we came from
            SawKind::DeadEndLeaf
        } else {
            SawKind::Inner
        };
        let idx = self.nodes.len();
        self.nodes.push(SawNode {
            endpoint,
            parent: Some(parent),
            kind,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(idx);
        idx
    }

    /// The SAW tree restricted to the walks of a subtree: walks along subtree
    /// edges are kept, every other extension becomes a leaf that sends the
    /// simplex.
    pub fn from_subtree(g: &FactorGraph, t: &Subtree) -> SawTree {
        let mut saw = SawTree {
            root: t.root(),
            nodes: vec![SawNode {
                endpoint: Node::Var(t.root()),
                parent: None,
                kind: SawKind::Root,
                children: Vec::new(),
            }],
        };
        // (saw index, subtree index) pairs still to expand
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        while let Some((si, ti)) = queue.pop_front() {
            for n in saw.extensions(g, si) {
                let child = saw.push_child(g, si, n);
                match t.child_on(ti, n) {
                    Some(tc) if saw.nodes[child].kind == SawKind::Inner => {
                        queue.push_back((child, tc))
                    }
                    Some(_) => {}
                    None => {
                        if saw.nodes[child].kind != SawKind::CycleInducedLeaf {
                            saw.nodes[child].kind = SawKind::TruncationLeaf;
                        }
                    }
                }
            }
        }
        saw
    }
}

/// Breadth-first construction of the self-avoiding-walk tree of `root`, with
/// children in ascending neighbor order.
///
/// A node is expanded only if all of its children fit in `max_nodes`; at the
/// first node that does not fit, it and every node still waiting for expansion
/// become truncation leaves. The root is always expanded, so its children are
/// present even when `max_nodes` is smaller than that.
pub fn build_saw_tree(g: &FactorGraph, root: VariableId, max_nodes: usize) -> SawTree {
    let mut t = SawTree {
        root,
        nodes: vec![SawNode {
            endpoint: Node::Var(root),
            parent: None,
            kind: SawKind::Root,
            children: Vec::new(),
        }],
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let ext = t.extensions(g, idx);
        if idx != 0 && t.nodes.len() + ext.len() > max_nodes {
            t.nodes[idx].kind = SawKind::TruncationLeaf;
            for rest in queue.drain(..) {
                t.nodes[rest].kind = SawKind::TruncationLeaf;
            }
            break;
        }
        for n in ext {
            let child = t.push_child(g, idx, n);
            if t.nodes[child].kind == SawKind::Inner {
                queue.push_back(child);
            }
        }
    }
    t
}

/// Propagates boxes from the leaves of the SAW tree to its root.
pub fn boxprop_sawtree(g: &FactorGraph, t: &SawTree) -> Result<BoundResult> {
    let start = Instant::now();
    let mut msgs: Vec<Option<MessageSet>> = vec![None; t.nodes.len()];
    for idx in (1..t.nodes.len()).rev() {
        let node = &t.nodes[idx];
        let parent = t.nodes[node.parent.expect("non-root")].endpoint;
        let children = || {
            node.children
                .iter()
                .map(|&c| msgs[c].as_ref().expect("children are processed first"))
        };
        let msg = match (node.kind, node.endpoint, parent) {
            (SawKind::CycleInducedLeaf | SawKind::TruncationLeaf, Node::Var(v), _)
            | (
                SawKind::CycleInducedLeaf | SawKind::TruncationLeaf,
                Node::Factor(_),
                Node::Var(v),
            ) => MessageSet::simplex(v, g.card(v)),
            (_, Node::Var(v), _) => combine_at_variable(v, g.card(v), children())?,
            (_, Node::Factor(f), Node::Var(pv)) => {
                let boxes: Vec<MeasureBox> = children().map(MessageSet::to_box).collect();
                let joint = if boxes.is_empty() {
                    MeasureBox::degenerate(Measure::scalar(1.0))
                } else {
                    box_product_disjoint_sbb(&boxes)?
                };
                MessageSet::Box(bound_sum_product_joint(g.factor(f).table(), pv, &joint)?)
            }
            _ => unreachable!("factor graphs are bipartite"),
        };
        msgs[idx] = Some(msg);
    }
    let incoming: Vec<&MessageSet> = t.nodes[0]
        .children
        .iter()
        .map(|&c| msgs[c].as_ref().expect("children are processed first"))
        .collect();
    let bounds = root_belief(t.root, g.card(t.root), incoming)?;
    Ok(BoundResult {
        variable: t.root,
        bounds,
        method: Method::SawT,
        nodes_used: t.nodes.len(),
        elapsed: start.elapsed(),
    })
}
