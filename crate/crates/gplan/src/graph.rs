//! Causal diagrams: DAGs whose nodes are controls (interventions), covariates
//! (observed, optionally outcome-flagged), or latents. Everything downstream —
//! separation queries, plan identification, numeric oracles — works on the
//! immutable [`CausalDiagram`] built here.
//!
//! Determinism contract: nodes are numbered in declaration order and every set
//! iterates in that order, so identical inputs always produce identical output.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Index of a node within its diagram (declaration order).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(u32);

impl NodeId {
    pub(crate) fn new(i: usize) -> NodeId {
        NodeId(i as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeKind {
    /// A variable the plan sets by intervention.
    Control,
    /// An observed non-control variable.
    Covariate,
    /// An unobserved variable.
    Latent,
}

#[derive(Clone, Debug)]
struct Node {
    name: String,
    kind: NodeKind,
    outcome: bool,
}

/// A set of nodes from one diagram. Iteration is always in declaration order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Debug)]
pub struct NodeSet(BTreeSet<NodeId>);

impl NodeSet {
    pub fn new() -> NodeSet {
        NodeSet::default()
    }

    pub fn single(id: NodeId) -> NodeSet {
        NodeSet(BTreeSet::from([id]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.contains(&id)
    }

    pub fn insert(&mut self, id: NodeId) -> bool {
        self.0.insert(id)
    }

    pub fn remove(&mut self, id: NodeId) -> bool {
        self.0.remove(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.difference(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.0.is_disjoint(&other.0)
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> NodeSet {
        NodeSet(iter.into_iter().collect())
    }
}

impl IntoIterator for &NodeSet {
    type Item = NodeId;
    type IntoIter = std::vec::IntoIter<NodeId>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied().collect::<Vec<_>>().into_iter()
    }
}

/// Which surgery produced a mutilated diagram: `bar` cuts incoming edges,
/// `underline` cuts outgoing edges. Kept alongside results so reports can say
/// which graph a separation statement was tested in.
#[derive(Clone, PartialEq, Eq, Hash, Default, Debug)]
pub struct Mutilation {
    pub bar: NodeSet,
    pub underline: NodeSet,
}

impl Mutilation {
    pub fn new(bar: NodeSet, underline: NodeSet) -> Mutilation {
        Mutilation { bar, underline }
    }

    /// Render as e.g. `G[bar={x2}, underline={x1}]`; plain `G` when untouched.
    pub fn render(&self, g: &CausalDiagram) -> String {
        if self.bar.is_empty() && self.underline.is_empty() {
            return "G".into();
        }
        let mut parts = Vec::new();
        if !self.bar.is_empty() {
            parts.push(format!("bar={}", g.render_set(&self.bar)));
        }
        if !self.underline.is_empty() {
            parts.push(format!("underline={}", g.render_set(&self.underline)));
        }
        format!("G[{}]", parts.join(", "))
    }
}

/// An immutable DAG over typed nodes. Build one with [`DiagramBuilder`].
#[derive(Clone, Debug)]
pub struct CausalDiagram {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

#[derive(Default)]
pub struct DiagramBuilder {
    nodes: Vec<Node>,
    edges: Vec<(String, String)>,
}

impl DiagramBuilder {
    pub fn new() -> DiagramBuilder {
        DiagramBuilder::default()
    }

    pub fn node(mut self, name: &str, kind: NodeKind) -> DiagramBuilder {
        self.nodes.push(Node {
            name: name.into(),
            kind,
            outcome: false,
        });
        self
    }

    /// Declare an outcome: a covariate carrying the outcome flag.
    pub fn outcome(mut self, name: &str) -> DiagramBuilder {
        self.nodes.push(Node {
            name: name.into(),
            kind: NodeKind::Covariate,
            outcome: true,
        });
        self
    }

    pub fn edge(mut self, from: &str, to: &str) -> DiagramBuilder {
        self.edges.push((from.into(), to.into()));
        self
    }

    pub fn build(self) -> Result<CausalDiagram> {
        let mut nodes = Vec::new();
        for node in self.nodes {
            if !valid_name(&node.name) {
                return Err(Error::InvalidName(node.name));
            }
            if nodes.iter().any(|n: &Node| n.name == node.name) {
                return Err(Error::DuplicateNode(node.name));
            }
            if node.outcome && node.kind != NodeKind::Covariate {
                return Err(match node.kind {
                    NodeKind::Latent => Error::LatentOutcome(node.name),
                    _ => Error::NonCovariateOutcome(node.name),
                });
            }
            nodes.push(node);
        }
        let id_of = |name: &str| -> Result<NodeId> {
            nodes
                .iter()
                .position(|n| n.name == name)
                .map(NodeId::new)
                .ok_or_else(|| Error::UnknownNode(name.into()))
        };
        let mut edges = Vec::new();
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for (from, to) in &self.edges {
            let (u, v) = (id_of(from)?, id_of(to)?);
            if u == v {
                return Err(Error::SelfLoop(from.clone()));
            }
            if edges.contains(&(u, v)) {
                return Err(Error::DuplicateEdge(from.clone(), to.clone()));
            }
            edges.push((u, v));
            parents[v.index()].push(u);
            children[u.index()].push(v);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort();
        }
        let g = CausalDiagram {
            nodes,
            edges,
            parents,
            children,
        };
        if let Some(id) = g.find_cycle_node() {
            return Err(Error::Cycle(g.name(id).into()));
        }
        Ok(g)
    }
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

impl CausalDiagram {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId::new)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .map(NodeId::new)
    }

    /// Resolve a name, erroring on unknowns (for input handling).
    pub fn resolve(&self, name: &str) -> Result<NodeId> {
        self.node_id(name)
            .ok_or_else(|| Error::UnknownNode(name.into()))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn is_outcome(&self, id: NodeId) -> bool {
        self.nodes[id.index()].outcome
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id.index()]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.index()]
    }

    /// Edges in declaration order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn kind_set(&self, kind: NodeKind) -> NodeSet {
        self.node_ids()
            .filter(|&id| self.kind(id) == kind)
            .collect()
    }

    pub fn controls(&self) -> NodeSet {
        self.kind_set(NodeKind::Control)
    }

    pub fn covariates(&self) -> NodeSet {
        self.kind_set(NodeKind::Covariate)
    }

    pub fn latents(&self) -> NodeSet {
        self.kind_set(NodeKind::Latent)
    }

    /// Nodes carrying the outcome flag.
    pub fn outcomes(&self) -> NodeSet {
        self.node_ids().filter(|&id| self.is_outcome(id)).collect()
    }

    /// All nodes reachable from `from` along directed edges, *including* the
    /// starting nodes themselves.
    pub fn descendants(&self, from: &NodeSet) -> NodeSet {
        self.reach(from, |id| self.children(id))
    }

    /// All nodes with a directed path *to* `to`, including `to` itself.
    pub fn ancestors(&self, to: &NodeSet) -> NodeSet {
        self.reach(to, |id| self.parents(id))
    }

    fn reach<'a, F>(&'a self, start: &NodeSet, step: F) -> NodeSet
    where
        F: Fn(NodeId) -> &'a [NodeId],
    {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = start.iter().collect();
        for id in start.iter() {
            seen[id.index()] = true;
        }
        while let Some(id) = stack.pop() {
            for &next in step(id) {
                if !seen[next.index()] {
                    seen[next.index()] = true;
                    stack.push(next);
                }
            }
        }
        (0..self.nodes.len())
            .map(NodeId::new)
            .filter(|id| seen[id.index()])
            .collect()
    }

    /// A fresh diagram with incoming edges of `bar` nodes and outgoing edges of
    /// `underline` nodes removed. Node identities are preserved, so `NodeId`s
    /// and `NodeSet`s remain valid across mutilation.
    pub fn mutilate(&self, bar: &NodeSet, underline: &NodeSet) -> CausalDiagram {
        let edges: Vec<(NodeId, NodeId)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(u, v)| !bar.contains(v) && !underline.contains(u))
            .collect();
        let mut parents = vec![Vec::new(); self.nodes.len()];
        let mut children = vec![Vec::new(); self.nodes.len()];
        for &(u, v) in &edges {
            parents[v.index()].push(u);
            children[u.index()].push(v);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort();
        }
        CausalDiagram {
            nodes: self.nodes.clone(),
            edges,
            parents,
            children,
        }
    }

    pub fn apply(&self, m: &Mutilation) -> CausalDiagram {
        self.mutilate(&m.bar, &m.underline)
    }

    /// First node found on a directed cycle, if any.
    fn find_cycle_node(&self) -> Option<NodeId> {
        // Kahn peeling: whatever is left after repeatedly removing in-degree-0
        // nodes sits on a cycle.
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents[i].len()).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut removed = 0;
        while let Some(i) = queue.pop() {
            removed += 1;
            for &c in &self.children[i] {
                indeg[c.index()] -= 1;
                if indeg[c.index()] == 0 {
                    queue.push(c.index());
                }
            }
        }
        if removed == n {
            None
        } else {
            (0..n).find(|&i| indeg[i] > 0).map(NodeId::new)
        }
    }

    pub fn set_from_names(&self, names: &[&str]) -> Result<NodeSet> {
        names.iter().map(|n| self.resolve(n)).collect()
    }

    /// Render a set as `{a, b}` in declaration order.
    pub fn render_set(&self, set: &NodeSet) -> String {
        let names: Vec<&str> = set.iter().map(|id| self.name(id)).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Render node names without braces, e.g. for query text: `a, b`.
    pub fn render_list(&self, set: &NodeSet) -> String {
        set.iter()
            .map(|id| self.name(id))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for CausalDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for id in self.node_ids() {
            let kind = match self.kind(id) {
                NodeKind::Control => "control",
                NodeKind::Covariate => "covariate",
                NodeKind::Latent => "latent",
            };
            let flag = if self.is_outcome(id) { " outcome" } else { "" };
            writeln!(f, "node {} {}{}", self.name(id), kind, flag)?;
        }
        let mut edges = self.edges.clone();
        edges.sort();
        for (u, v) in edges {
            writeln!(f, "edge {} -> {}", self.name(u), self.name(v))?;
        }
        Ok(())
    }
}

/// The order in which a plan sets its controls. Must cover every control of
/// the diagram exactly once, and no control may be listed before one of its
/// ancestors' — formally, each entry is a non-descendant of all later entries.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PlanOrder {
    controls: Vec<NodeId>,
}

impl PlanOrder {
    pub fn new(g: &CausalDiagram, names: &[&str]) -> Result<PlanOrder> {
        let ids = names
            .iter()
            .map(|n| g.resolve(n))
            .collect::<Result<Vec<_>>>()?;
        PlanOrder::from_ids(g, ids)
    }

    pub fn from_ids(g: &CausalDiagram, controls: Vec<NodeId>) -> Result<PlanOrder> {
        let mut seen = NodeSet::new();
        for &id in &controls {
            if g.kind(id) != NodeKind::Control {
                return Err(Error::NotAControl(g.name(id).into()));
            }
            if !seen.insert(id) {
                return Err(Error::DuplicateControl(g.name(id).into()));
            }
        }
        for id in g.controls().iter() {
            if !seen.contains(id) {
                return Err(Error::PlanIncomplete(g.name(id).into()));
            }
        }
        // Consistency: no entry descends from a later entry.
        for (i, &x) in controls.iter().enumerate() {
            let later: NodeSet = controls[i + 1..].iter().copied().collect();
            if !later.is_empty() && g.descendants(&later).contains(x) {
                let culprit = controls[i + 1..]
                    .iter()
                    .copied()
                    .find(|&l| g.descendants(&NodeSet::single(l)).contains(x))
                    .unwrap();
                return Err(Error::InconsistentOrder(
                    g.name(x).into(),
                    g.name(culprit).into(),
                ));
            }
        }
        Ok(PlanOrder { controls })
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn controls(&self) -> &[NodeId] {
        &self.controls
    }

    /// The k-th control, 1-based to match stage numbering in reports.
    pub fn control(&self, k: usize) -> NodeId {
        assert!((1..=self.len()).contains(&k), "stage {k} out of range");
        self.controls[k - 1]
    }

    /// Controls from stage `k` on (1-based); `tail(n + 1)` is empty.
    pub fn tail(&self, k: usize) -> NodeSet {
        assert!((1..=self.len() + 1).contains(&k), "stage {k} out of range");
        self.controls[k - 1..].iter().copied().collect()
    }

    /// Controls strictly before stage `k`.
    pub fn head(&self, k: usize) -> NodeSet {
        assert!((1..=self.len() + 1).contains(&k), "stage {k} out of range");
        self.controls[..k - 1].iter().copied().collect()
    }

    pub fn render(&self, g: &CausalDiagram) -> String {
        self.controls
            .iter()
            .map(|&id| g.name(id))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Covariates that are non-descendants of every control from stage `k` on.
/// These are the only nodes eligible for the stage-`k` adjustment set.
pub fn nondescendant_covariates(g: &CausalDiagram, order: &PlanOrder, k: usize) -> NodeSet {
    assert!((1..=order.len()).contains(&k), "stage {k} out of range");
    let below = g.descendants(&order.tail(k));
    g.covariates().difference(&below)
}

/// Every ordering of the diagram's controls in which each control is a
/// non-descendant of all later ones. Deterministic: candidates are tried in
/// declaration order at each position. A DAG always admits at least one.
pub fn consistent_orderings(g: &CausalDiagram) -> Vec<PlanOrder> {
    let controls: Vec<NodeId> = g.controls().iter().collect();
    // desc_controls[i] = controls strictly below controls[i].
    let desc: Vec<NodeSet> = controls
        .iter()
        .map(|&x| {
            let mut d = g.descendants(&NodeSet::single(x));
            d.remove(x);
            d.intersection(&g.controls())
        })
        .collect();
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    let mut used = vec![false; controls.len()];
    // Placing controls[i] next puts every still-unplaced control after it, so
    // i is placeable only if it descends from none of them.
    fn rec(
        controls: &[NodeId],
        desc: &[NodeSet],
        used: &mut Vec<bool>,
        prefix: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if prefix.len() == controls.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..controls.len() {
            if used[i] {
                continue;
            }
            let below_unplaced =
                (0..controls.len()).any(|j| !used[j] && j != i && desc[j].contains(controls[i]));
            if below_unplaced {
                continue;
            }
            used[i] = true;
            prefix.push(controls[i]);
            rec(controls, desc, used, prefix, out);
            prefix.pop();
            used[i] = false;
        }
    }
    let mut raw = Vec::new();
    rec(&controls, &desc, &mut used, &mut prefix, &mut raw);
    for ids in raw {
        out.push(PlanOrder { controls: ids });
    }
    out
}

/// The derived diagram used by the ordering-invariance check: add, for each
/// stage k, edges from the stage control to every later control and to every
/// descendant of a later control, plus edges from each stage-1..k adjustment
/// node into the stage-k control. Duplicate edges coalesce.
pub fn build_g_star(
    g: &CausalDiagram,
    order: &PlanOrder,
    zseq: &[NodeSet],
) -> Result<CausalDiagram> {
    if zseq.len() != order.len() {
        return Err(Error::SequenceLength {
            expected: order.len(),
            got: zseq.len(),
        });
    }
    let mut edges: Vec<(NodeId, NodeId)> = g.edges().to_vec();
    let add = |u: NodeId, v: NodeId, edges: &mut Vec<(NodeId, NodeId)>| {
        if u != v && !edges.contains(&(u, v)) {
            edges.push((u, v));
        }
    };
    let mut conditioned = NodeSet::new();
    for k in 1..=order.len() {
        let xk = order.control(k);
        let later = order.tail(k + 1);
        if !later.is_empty() {
            for v in g.descendants(&later).iter() {
                add(xk, v, &mut edges);
            }
        }
        conditioned = conditioned.union(&zseq[k - 1]);
        for z in conditioned.iter() {
            add(z, xk, &mut edges);
        }
    }
    let mut parents = vec![Vec::new(); g.node_count()];
    let mut children = vec![Vec::new(); g.node_count()];
    for &(u, v) in &edges {
        parents[v.index()].push(u);
        children[u.index()].push(v);
    }
    for list in parents.iter_mut().chain(children.iter_mut()) {
        list.sort();
    }
    let star = CausalDiagram {
        nodes: g.nodes.clone(),
        edges,
        parents,
        children,
    };
    if let Some(id) = star.find_cycle_node() {
        // Reachable only through an inconsistent order/sequence combination.
        return Err(Error::Cycle(star.name(id).into()));
    }
    Ok(star)
}
