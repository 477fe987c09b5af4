use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

use super::{combine_at_variable, root_belief, BoundResult, Method};
use crate::error::{Error, Result};
use crate::factorgraph::{FactorGraph, Node, VariableId};
use crate::measure::{bound_sum_product, MessageSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeNode {
    pub node: Node,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Tree of distinct factor-graph nodes rooted at a variable. Nodes are stored
/// in breadth-first order, so every child comes after its parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtree {
    root: VariableId,
    nodes: Vec<SubtreeNode>,
}

impl Subtree {
    pub fn root(&self) -> VariableId {
        self.root
    }

    pub fn nodes(&self) -> &[SubtreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, n: Node) -> bool {
        self.nodes.iter().any(|s| s.node == n)
    }

    /// Child of `idx` sitting on graph node `n`, if that edge is in the tree.
    pub fn child_on(&self, idx: usize, n: Node) -> Option<usize> {
        self.nodes[idx]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].node == n)
    }

    /// Breadth-first tree over the given node set only. Every node of `keep`
    /// must be reachable from `root` inside `keep`.
    pub fn from_node_set(g: &FactorGraph, root: VariableId, keep: &BTreeSet<Node>) -> Result<Self> {
        if !keep.contains(&Node::Var(root)) {
            return Err(Error::InvalidArgument(
                "node set must contain the root".into(),
            ));
        }
        let t = bfs(g, root, usize::MAX, |n| keep.contains(&n));
        if t.len() != keep.len() {
            return Err(Error::InvalidArgument(
                "node set is not connected through the root".into(),
            ));
        }
        Ok(t)
    }
}

fn bfs(
    g: &FactorGraph,
    root: VariableId,
    max_nodes: usize,
    admit: impl Fn(Node) -> bool,
) -> Subtree {
    let max_nodes = max_nodes.max(1);
    let mut nodes = vec![SubtreeNode {
        node: Node::Var(root),
        parent: None,
        children: Vec::new(),
    }];
    let mut visited = BTreeSet::from([Node::Var(root)]);
    let mut queue = VecDeque::from([0usize]);
    'outer: while let Some(idx) = queue.pop_front() {
        for n in g.neighbors(nodes[idx].node) {
            if nodes.len() >= max_nodes {
                break 'outer;
            }
            if !admit(n) || !visited.insert(n) {
                continue;
            }
            let child = nodes.len();
            nodes.push(SubtreeNode {
                node: n,
                parent: Some(idx),
                children: Vec::new(),
            });
            nodes[idx].children.push(child);
            queue.push_back(child);
        }
    }
    Subtree { root, nodes }
}

/// Breadth-first subtree from `root`: neighbors are explored in ascending id
/// order and a graph node joins the tree at its first visit only. Growth stops
/// once `max_nodes` nodes are present.
pub fn build_subtree(g: &FactorGraph, root: VariableId, max_nodes: usize) -> Subtree {
    bfs(g, root, max_nodes, |_| true)
}

/// Propagates boxes from the leaves of `t` to its root. Graph edges missing
/// from the subtree carry the simplex.
pub fn boxprop_subtree(g: &FactorGraph, t: &Subtree) -> Result<BoundResult> {
    let start = Instant::now();
    let mut msgs: Vec<Option<MessageSet>> = vec![None; t.len()];
    let message = |msgs: &[Option<MessageSet>], idx: usize, n: Node, var: VariableId| match t
        .child_on(idx, n)
    {
        Some(c) => msgs[c].clone().expect("children are processed first"),
        None => MessageSet::simplex(var, g.card(var)),
    };
    for idx in (1..t.len()).rev() {
        let node = &t.nodes[idx];
        let parent = t.nodes[node.parent.expect("non-root")].node;
        let msg = match (node.node, parent) {
            (Node::Var(v), Node::Factor(pf)) => {
                let incoming: Vec<MessageSet> = g
                    .factors_of(v)
                    .iter()
                    .filter(|&&f| f != pf)
                    .map(|&f| message(&msgs, idx, Node::Factor(f), v))
                    .collect();
                combine_at_variable(v, g.card(v), &incoming)?
            }
            (Node::Factor(f), Node::Var(pv)) => {
                let incoming: BTreeMap<VariableId, MessageSet> = g
                    .factor(f)
                    .scope()
                    .iter()
                    .filter(|&&l| l != pv)
                    .map(|&l| (l, message(&msgs, idx, Node::Var(l), l)))
                    .collect();
                MessageSet::Box(bound_sum_product(g.factor(f).table(), pv, &incoming)?)
            }
            _ => unreachable!("factor graphs are bipartite"),
        };
        msgs[idx] = Some(msg);
    }
    let root = t.root;
    let incoming: Vec<MessageSet> = g
        .factors_of(root)
        .iter()
        .map(|&f| message(&msgs, 0, Node::Factor(f), root))
        .collect();
    let bounds = root_belief(root, g.card(root), &incoming)?;
    Ok(BoundResult {
        variable: root,
        bounds,
        method: Method::SubT,
        nodes_used: t.len(),
        elapsed: start.elapsed(),
    })
}
