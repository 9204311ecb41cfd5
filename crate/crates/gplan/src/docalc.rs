//! The three intervention-calculus rewrite rules and a bounded search that
//! reduces a plan's interventional expression to observational (hat-free)
//! form. Every accepted rewrite carries its justification — the separation
//! query and the mutilated graph it was tested in — so traces can be
//! re-verified independently.
//!
//! The expression language is deliberately small: a sum over covariates of
//! products of terms `P(target | do(...), observations)`. The only move
//! besides the three rules is the conditioning/summation expansion
//! `P(t | c) = sum_w P(t | c, w) * P(w | c)` over a fresh covariate, which is
//! all the reduction of an identifiable plan ever needs. Exhaustion of the
//! search is *not* a non-identifiability verdict.

use std::collections::{HashSet, VecDeque};

use crate::dsep::{d_separated, SeparationQuery};
use crate::error::{Error, Result};
use crate::estimand::{Conditional, Estimand};
use crate::graph::{CausalDiagram, Mutilation, NodeId, NodeKind, NodeSet};
use crate::identify::PlanQuery;

/// The rewrite rules, named by what they do to an expression. Their customary
/// numbering is exposed through [`Rule::number`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rule {
    /// Insert or delete an observation (rule 1): tested with the moved set's
    /// incoming edges intact, in the graph with all action edges cut.
    ObservationChange,
    /// Exchange actions for observations or back (rule 2): tested with the
    /// moved set's outgoing edges cut.
    ActionExchange,
    /// Insert or delete an action (rule 3): tested with the incoming edges of
    /// the moved set's non-ancestors-of-observations cut.
    ActionRemoval,
}

impl Rule {
    pub fn number(self) -> u8 {
        match self {
            Rule::ObservationChange => 1,
            Rule::ActionExchange => 2,
            Rule::ActionRemoval => 3,
        }
    }
}

/// Which way a rewrite moved its node set.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    Insert,
    Delete,
    Exchange,
}

impl Direction {
    fn label(self) -> &'static str {
        match self {
            Direction::Insert => "insert",
            Direction::Delete => "delete",
            Direction::Exchange => "exchange",
        }
    }
}

/// One term `P(target | do(interventions), observations)`. The three sets are
/// pairwise disjoint and never contain latent nodes.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct InterventionalExpr {
    pub target: NodeSet,
    pub interventions: NodeSet,
    pub observations: NodeSet,
}

impl InterventionalExpr {
    pub fn hat_free(&self) -> bool {
        self.interventions.is_empty()
    }

    /// Render as e.g. `P(y|do(x1),do(x2),z)`: actions first, each wrapped in
    /// `do()`, then plain observations, all in declaration order.
    pub fn render(&self, g: &CausalDiagram) -> String {
        let target = self
            .target
            .iter()
            .map(|v| g.name(v).to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut given: Vec<String> = self
            .interventions
            .iter()
            .map(|v| format!("do({})", g.name(v)))
            .collect();
        given.extend(self.observations.iter().map(|v| g.name(v).to_string()));
        if given.is_empty() {
            format!("P({target})")
        } else {
            format!("P({target}|{})", given.join(","))
        }
    }
}

fn validate_expr(g: &CausalDiagram, expr: &InterventionalExpr) -> Result<()> {
    if expr.target.is_empty() {
        return Err(Error::EmptyOutcome);
    }
    let overlap = expr
        .target
        .intersection(&expr.interventions)
        .union(&expr.target.intersection(&expr.observations))
        .union(&expr.interventions.intersection(&expr.observations));
    if !overlap.is_empty() {
        return Err(Error::OverlappingQuery(format!(
            "expression sets share {}",
            g.render_set(&overlap)
        )));
    }
    no_latents(
        g,
        &expr
            .target
            .union(&expr.interventions)
            .union(&expr.observations),
    )
}

fn no_latents(g: &CausalDiagram, set: &NodeSet) -> Result<()> {
    match set.iter().find(|&v| g.kind(v) == NodeKind::Latent) {
        Some(v) => Err(Error::LatentInExpression(g.name(v).into())),
        None => Ok(()),
    }
}

/// The verdict of a rule test together with the separation query and graph
/// that justify it.
#[derive(Clone, Debug)]
pub struct Applicability {
    pub holds: bool,
    pub query: SeparationQuery,
    pub graph: Mutilation,
}

/// Test whether `rule` may move `moved` in (or out of) `expr`. Deletion and
/// insertion of the same set share one separation condition, so the verdict
/// covers both directions; the caller picks one. The moved set must live
/// where the rule expects it: among the observations (or fresh) for rule 1,
/// among actions or observations for rule 2, among actions (or fresh) for
/// rule 3.
pub fn rule_applicable(
    g: &CausalDiagram,
    rule: Rule,
    expr: &InterventionalExpr,
    moved: &NodeSet,
) -> Result<Applicability> {
    validate_expr(g, expr)?;
    no_latents(g, moved)?;
    if !moved.is_disjoint(&expr.target) {
        return Err(Error::NotInExpression {
            moved: g.render_set(moved),
            expected: "disjoint from the target",
        });
    }
    let in_actions = moved.is_subset(&expr.interventions);
    let in_observations = moved.is_subset(&expr.observations);
    let fresh = moved.is_disjoint(&expr.interventions) && moved.is_disjoint(&expr.observations);
    let placed = match rule {
        Rule::ObservationChange => in_observations || fresh,
        Rule::ActionExchange => in_actions || in_observations,
        Rule::ActionRemoval => in_actions || fresh,
    };
    if !placed {
        let expected = match rule {
            Rule::ObservationChange => "a deletable or insertable observation set",
            Rule::ActionExchange => "an exchangeable action or observation set",
            Rule::ActionRemoval => "a deletable or insertable action set",
        };
        return Err(Error::NotInExpression {
            moved: g.render_set(moved),
            expected,
        });
    }
    let actions = expr.interventions.difference(moved);
    let (others, graph) = match rule {
        Rule::ObservationChange => (
            expr.observations.difference(moved),
            Mutilation::new(actions.clone(), NodeSet::new()),
        ),
        Rule::ActionExchange => (
            expr.observations.difference(moved),
            Mutilation::new(actions.clone(), moved.clone()),
        ),
        Rule::ActionRemoval => {
            let others = expr.observations.clone();
            // Moved nodes that are not ancestors of any observation, judged in
            // the graph with the remaining action edges cut.
            let bar_only = g.mutilate(&actions, &NodeSet::new());
            let unrelated = moved.difference(&bar_only.ancestors(&others));
            (
                others,
                Mutilation::new(actions.union(&unrelated), NodeSet::new()),
            )
        }
    };
    let query = SeparationQuery::new(expr.target.clone(), moved.clone(), actions.union(&others));
    let holds = d_separated(&g.apply(&graph), &query)?;
    Ok(Applicability {
        holds,
        query,
        graph,
    })
}

/// The expression a plan starts from: `P(outcome | do(x1), ..., do(xn))`.
pub fn plan_expression(g: &CausalDiagram, q: &PlanQuery) -> InterventionalExpr {
    let expr = InterventionalExpr {
        target: q.outcome.clone(),
        interventions: q.order.controls().iter().copied().collect(),
        observations: NodeSet::new(),
    };
    debug_assert!(validate_expr(g, &expr).is_ok());
    expr
}

/// A sum of products of interventional terms — the state the reduction search
/// walks through.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SumProduct {
    pub sums: NodeSet,
    pub factors: Vec<InterventionalExpr>,
}

impl SumProduct {
    pub fn hat_free(&self) -> bool {
        self.factors.iter().all(InterventionalExpr::hat_free)
    }

    pub fn render(&self, g: &CausalDiagram) -> String {
        let product = self
            .factors
            .iter()
            .map(|f| f.render(g))
            .collect::<Vec<_>>()
            .join(" * ");
        if self.sums.is_empty() {
            product
        } else {
            let sums = self
                .sums
                .iter()
                .map(|v| g.name(v).to_string())
                .collect::<Vec<_>>()
                .join(",");
            format!("sum_{{{sums}}} {product}")
        }
    }

    /// Convert to an estimand once hat-free; `None` while actions remain.
    pub fn to_estimand(&self) -> Option<Estimand> {
        if !self.hat_free() {
            return None;
        }
        Some(Estimand {
            sums: self.sums.iter().collect(),
            factors: self
                .factors
                .iter()
                .map(|f| Conditional {
                    target: f.target.iter().collect(),
                    given: f.observations.iter().collect(),
                })
                .collect(),
        })
    }

    fn key(&self) -> (NodeSet, Vec<InterventionalExpr>) {
        let mut factors = self.factors.clone();
        factors.sort_by(|a, b| {
            (&a.target, &a.interventions, &a.observations).cmp(&(
                &b.target,
                &b.interventions,
                &b.observations,
            ))
        });
        (self.sums.clone(), factors)
    }
}

/// One accepted rewrite: which rule moved what, on which factor (0-based),
/// justified by a separation query that held in `graph`.
#[derive(Clone, Debug)]
pub struct RewriteStep {
    pub rule: Rule,
    pub moved: NodeSet,
    pub direction: Direction,
    pub query: SeparationQuery,
    pub graph: Mutilation,
}

/// One search move: a rule application or a summation expansion.
#[derive(Clone, Debug)]
pub enum TraceStep {
    Rewrite { factor: usize, step: RewriteStep },
    Expand { factor: usize, over: NodeId },
}

impl TraceStep {
    fn render(&self, g: &CausalDiagram) -> String {
        match self {
            TraceStep::Rewrite { factor, step } => format!(
                "R{} {} {} on factor {}: {} in {}",
                step.rule.number(),
                step.direction.label(),
                g.render_set(&step.moved),
                factor + 1,
                step.query.render(g),
                step.graph.render(g),
            ),
            TraceStep::Expand { factor, over } => {
                format!(
                    "expand {} on factor {}",
                    g.render_set(&NodeSet::single(*over)),
                    factor + 1
                )
            }
        }
    }
}

/// A successful reduction: the moves taken (each paired with the state it
/// produced) and the final hat-free state.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub steps: Vec<(TraceStep, SumProduct)>,
    pub result: SumProduct,
}

impl Reduction {
    /// One numbered line per step (`3. R3 delete {x2} on factor 2: ... => ...`)
    /// and a closing `result:` line.
    pub fn render(&self, g: &CausalDiagram) -> String {
        let mut out = String::new();
        for (i, (step, state)) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{}. {} => {}\n",
                i + 1,
                step.render(g),
                state.render(g)
            ));
        }
        out.push_str(&format!("result: {}", self.result.render(g)));
        out
    }
}

/// Default search bound: two moves per control or covariate, which covers the
/// expand-then-rewrite pattern an identifiable stage needs.
pub fn default_depth(g: &CausalDiagram) -> usize {
    2 * (g.controls().len() + g.covariates().len())
}

/// States the reduction search may visit before giving up.
pub const REDUCE_STATE_LIMIT: usize = 200_000;

/// Moves out of `state`, in the fixed exploration order: action deletions,
/// observation deletions, action-to-observation exchanges (all single-node,
/// factors in position order, nodes in declaration order), then expansions
/// over covariates fresh to the whole state. Insertions and the reverse
/// exchange never help reach hat-free form, so the search skips them.
fn neighbors(g: &CausalDiagram, state: &SumProduct) -> Result<Vec<(TraceStep, SumProduct)>> {
    let mut out = Vec::new();
    for (rule, direction) in [
        (Rule::ActionRemoval, Direction::Delete),
        (Rule::ObservationChange, Direction::Delete),
        (Rule::ActionExchange, Direction::Exchange),
    ] {
        for (i, factor) in state.factors.iter().enumerate() {
            let pool = match rule {
                Rule::ObservationChange => factor.observations.clone(),
                _ => factor.interventions.clone(),
            };
            for v in pool.iter() {
                let moved = NodeSet::single(v);
                let check = rule_applicable(g, rule, factor, &moved)?;
                if !check.holds {
                    continue;
                }
                let mut rewritten = factor.clone();
                rewritten.interventions.remove(v);
                if rule == Rule::ObservationChange {
                    rewritten.observations.remove(v);
                } else if rule == Rule::ActionExchange {
                    rewritten.observations.insert(v);
                }
                let mut next = state.clone();
                next.factors[i] = rewritten;
                let step = RewriteStep {
                    rule,
                    moved,
                    direction,
                    query: check.query,
                    graph: check.graph,
                };
                out.push((TraceStep::Rewrite { factor: i, step }, next));
            }
        }
    }
    let mut used = state.sums.clone();
    for factor in &state.factors {
        used = used
            .union(&factor.target)
            .union(&factor.interventions)
            .union(&factor.observations);
    }
    let fresh = g.covariates().difference(&used);
    for (i, factor) in state.factors.iter().enumerate() {
        for w in fresh.iter() {
            let mut conditioned = factor.clone();
            conditioned.observations.insert(w);
            let introduced = InterventionalExpr {
                target: NodeSet::single(w),
                interventions: factor.interventions.clone(),
                observations: factor.observations.clone(),
            };
            let mut next = state.clone();
            next.factors[i] = conditioned;
            next.factors.insert(i + 1, introduced);
            next.sums.insert(w);
            out.push((TraceStep::Expand { factor: i, over: w }, next));
        }
    }
    Ok(out)
}

/// Breadth-first search for a hat-free form of `expr`, taking at most `depth`
/// moves. `None` means the bounded search is exhausted — nothing more. States
/// are memoized up to factor order, and ties are broken by the fixed move
/// order of the search, so the returned trace is deterministic.
pub fn reduce(
    g: &CausalDiagram,
    expr: &InterventionalExpr,
    depth: usize,
) -> Result<Option<Reduction>> {
    validate_expr(g, expr)?;
    let start = SumProduct {
        sums: NodeSet::new(),
        factors: vec![expr.clone()],
    };
    if start.hat_free() {
        return Ok(Some(Reduction {
            steps: Vec::new(),
            result: start,
        }));
    }
    let mut seen = HashSet::new();
    seen.insert(start.key());
    let mut queue = VecDeque::new();
    queue.push_back((start, Vec::new()));
    let mut visited = 1usize;
    while let Some((state, path)) = queue.pop_front() {
        if path.len() == depth {
            continue;
        }
        for (step, next) in neighbors(g, &state)? {
            if !seen.insert(next.key()) {
                continue;
            }
            visited += 1;
            if visited > REDUCE_STATE_LIMIT {
                return Err(Error::SearchSpaceExceeded(format!(
                    "reduction search visited more than {REDUCE_STATE_LIMIT} expressions"
                )));
            }
            let mut extended = path.clone();
            extended.push((step, next.clone()));
            if next.hat_free() {
                return Ok(Some(Reduction {
                    steps: extended,
                    result: next,
                }));
            }
            queue.push_back((next, extended));
        }
    }
    Ok(None)
}
