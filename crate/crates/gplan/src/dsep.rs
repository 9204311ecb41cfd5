//! d-separation via reachability over (node, arrival-direction) states, plus
//! ancestral sets. A path is active when every chain/fork node on it is
//! unconditioned and every collider has a conditioned descendant; X and Y are
//! d-separated by Z when no active path joins them.

use crate::error::{Error, Result};
use crate::graph::{CausalDiagram, NodeId, NodeSet};

/// Is X d-separated from Y given Z? The three sets must be pairwise disjoint.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SeparationQuery {
    pub x: NodeSet,
    pub y: NodeSet,
    pub z: NodeSet,
}

impl SeparationQuery {
    pub fn new(x: NodeSet, y: NodeSet, z: NodeSet) -> SeparationQuery {
        SeparationQuery { x, y, z }
    }

    /// Render as `(a, b _||_ c | d, e)`; the `| ...` part is omitted when the
    /// conditioning set is empty.
    pub fn render(&self, g: &CausalDiagram) -> String {
        let lhs = g.render_list(&self.x);
        let rhs = g.render_list(&self.y);
        if self.z.is_empty() {
            format!("({lhs} _||_ {rhs})")
        } else {
            format!("({lhs} _||_ {rhs} | {})", g.render_list(&self.z))
        }
    }
}

/// Decide the query in `g`. Empty X or Y is trivially separated. Overlapping
/// sets are rejected: callers that want the "conditioned outcome drops out"
/// convention must apply it before querying.
pub fn d_separated(g: &CausalDiagram, q: &SeparationQuery) -> Result<bool> {
    for (a, b, what) in [
        (&q.x, &q.y, "x/y"),
        (&q.x, &q.z, "x/z"),
        (&q.y, &q.z, "y/z"),
    ] {
        if !a.is_disjoint(b) {
            return Err(Error::OverlappingQuery(format!(
                "{what} share {}",
                g.render_set(&a.intersection(b))
            )));
        }
    }
    if q.x.is_empty() || q.y.is_empty() {
        return Ok(true);
    }

    // Colliders pass the trail exactly when they have a conditioned
    // descendant, i.e. when they are (inclusive) ancestors of Z.
    let z_closure = g.ancestors(&q.z);

    // State (node, arrived-from-parent?). From a node reached via an incoming
    // edge (from a parent) the trail continues to children, or to parents if
    // the node is a passing collider. Reached via an outgoing edge (from a
    // child) and unconditioned, it continues in both directions.
    let n = g.node_count();
    let mut seen_from_parent = vec![false; n];
    let mut seen_from_child = vec![false; n];
    let mut stack: Vec<(NodeId, bool)> = q.x.iter().map(|id| (id, false)).collect();
    while let Some((v, from_parent)) = stack.pop() {
        let seen = if from_parent {
            &mut seen_from_parent
        } else {
            &mut seen_from_child
        };
        if seen[v.index()] {
            continue;
        }
        seen[v.index()] = true;
        if q.y.contains(v) {
            return Ok(false);
        }
        if from_parent {
            if z_closure.contains(v) {
                for &p in g.parents(v) {
                    stack.push((p, false));
                }
            }
            if !q.z.contains(v) {
                for &c in g.children(v) {
                    stack.push((c, true));
                }
            }
        } else if !q.z.contains(v) {
            for &p in g.parents(v) {
                stack.push((p, false));
            }
            for &c in g.children(v) {
                stack.push((c, true));
            }
        }
    }
    Ok(true)
}

/// Nodes having a descendant in X or Y (every node being its own descendant),
/// i.e. the inclusive ancestor set of X ∪ Y. X and Y must be disjoint.
pub fn ancestral_set(g: &CausalDiagram, x: &NodeSet, y: &NodeSet) -> Result<NodeSet> {
    if !x.is_disjoint(y) {
        return Err(Error::OverlappingQuery(format!(
            "x/y share {}",
            g.render_set(&x.intersection(y))
        )));
    }
    Ok(g.ancestors(&x.union(y)))
}
