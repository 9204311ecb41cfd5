//! The closed-form estimand emitted for an identifiable plan: a sum over
//! adjustment variables of a product of conditional factors, every one of
//! which is a functional of the observational joint. Expressions render to a
//! stable one-line text form (`sum_{z} P(y|z,x1,x2) * P(z|x1)`) that parses
//! back losslessly, and they can be evaluated against any joint distribution
//! covering their variables.

use crate::discrete::Distribution;
use crate::error::{Error, Result};
use crate::graph::{CausalDiagram, NodeId, NodeSet};
use crate::identify::{CovariateSequence, PlanQuery};

/// One factor `P(target | given)`. Orders are meaningful only for rendering;
/// the value does not depend on them.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Conditional {
    pub target: Vec<NodeId>,
    pub given: Vec<NodeId>,
}

/// `sum over sums of the product of factors`. `sums` never contains outcome
/// or control variables: outcomes stay free, controls are fixed by the plan.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Estimand {
    pub sums: Vec<NodeId>,
    pub factors: Vec<Conditional>,
}

/// Assemble the estimand for an admissible covariate sequence: one factor
/// `P(Zk | earlier Z's, earlier controls)` per stage with new variables, and a
/// leading outcome factor conditioned on everything. Variables already bound
/// by an earlier stage are skipped, and outcome components inside stage sets
/// are bound (pinned during evaluation) rather than summed.
pub fn build(g: &CausalDiagram, q: &PlanQuery, seq: &CovariateSequence) -> Estimand {
    debug_assert!(seq
        .stages()
        .iter()
        .flat_map(|s| s.iter())
        .all(|v| v.index() < g.node_count()));
    let mut factors = Vec::new();
    let mut bound: Vec<NodeId> = Vec::new();
    let mut bound_set = NodeSet::new();
    for (i, stage) in seq.stages().iter().enumerate() {
        let fresh: Vec<NodeId> = stage.iter().filter(|v| !bound_set.contains(*v)).collect();
        if fresh.is_empty() {
            continue;
        }
        let mut given = bound.clone();
        given.extend(q.order.controls()[..i].iter().copied());
        factors.push(Conditional {
            target: fresh.clone(),
            given,
        });
        bound.extend(fresh.iter().copied());
        for v in fresh {
            bound_set.insert(v);
        }
    }
    let remaining: Vec<NodeId> = q
        .outcome
        .iter()
        .filter(|y| !bound_set.contains(*y))
        .collect();
    if !remaining.is_empty() {
        let mut given = bound.clone();
        given.extend(q.order.controls().iter().copied());
        factors.insert(
            0,
            Conditional {
                target: remaining,
                given,
            },
        );
    }
    let sums: Vec<NodeId> = bound
        .iter()
        .copied()
        .filter(|v| !q.outcome.contains(*v))
        .collect();
    Estimand { sums, factors }
}

fn names(g: &CausalDiagram, vars: &[NodeId]) -> String {
    vars.iter()
        .map(|&v| g.name(v))
        .collect::<Vec<_>>()
        .join(",")
}

pub(crate) fn render_factor(g: &CausalDiagram, f: &Conditional) -> String {
    if f.given.is_empty() {
        format!("P({})", names(g, &f.target))
    } else {
        format!("P({}|{})", names(g, &f.target), names(g, &f.given))
    }
}

/// One line, no trailing newline: `sum_{a,b} P(...) * P(...)`, or just the
/// product when nothing is summed.
pub fn render(g: &CausalDiagram, e: &Estimand) -> String {
    let product = e
        .factors
        .iter()
        .map(|f| render_factor(g, f))
        .collect::<Vec<_>>()
        .join(" * ");
    if e.sums.is_empty() {
        product
    } else {
        format!("sum_{{{}}} {}", names(g, &e.sums), product)
    }
}

/// Order-insensitive equality: same summation variables and the same factors,
/// with each factor compared as a (target set, given set) pair. Useful for
/// comparing expressions that agree up to list order, such as the reduction
/// search's output against [`build`]'s.
pub fn equivalent(a: &Estimand, b: &Estimand) -> bool {
    fn key(e: &Estimand) -> (NodeSet, Vec<(NodeSet, NodeSet)>) {
        let mut factors: Vec<(NodeSet, NodeSet)> = e
            .factors
            .iter()
            .map(|f| {
                (
                    f.target.iter().copied().collect(),
                    f.given.iter().copied().collect(),
                )
            })
            .collect();
        factors.sort();
        (e.sums.iter().copied().collect(), factors)
    }
    key(a) == key(b)
}

struct Scanner<'a> {
    g: &'a CausalDiagram,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(1, self.pos + 1, msg)
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.bytes[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{token}`")))
        }
    }

    fn name(&mut self) -> Result<NodeId> {
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a node name"));
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        self.g
            .node_id(name)
            .ok_or_else(|| Error::parse(1, start + 1, format!("unknown node `{name}`")))
    }

    fn var_list(&mut self) -> Result<Vec<NodeId>> {
        let mut out = Vec::new();
        loop {
            let start = self.pos;
            let id = self.name()?;
            if out.contains(&id) {
                return Err(Error::parse(
                    1,
                    start + 1,
                    format!("`{}` listed twice", self.g.name(id)),
                ));
            }
            out.push(id);
            if !self.eat(",") {
                return Ok(out);
            }
        }
    }

    fn factor(&mut self) -> Result<Conditional> {
        self.expect("P(")?;
        let target = self.var_list()?;
        let given = if self.eat("|") {
            self.var_list()?
        } else {
            Vec::new()
        };
        self.expect(")")?;
        Ok(Conditional { target, given })
    }
}

/// Parse the exact output grammar of [`render`]. Whitespace is significant:
/// one space after the sum braces, factors joined by ` * `.
pub fn parse(g: &CausalDiagram, text: &str) -> Result<Estimand> {
    let mut s = Scanner {
        g,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut sums = Vec::new();
    if s.eat("sum_{") {
        sums = s.var_list()?;
        s.expect("}")?;
        s.expect(" ")?;
    }
    let mut factors = vec![s.factor()?];
    while s.eat(" * ") {
        factors.push(s.factor()?);
    }
    if s.pos != s.bytes.len() {
        return Err(s.err("unexpected trailing input"));
    }
    Ok(Estimand { sums, factors })
}

fn event(g: &CausalDiagram, vars: &[NodeId], current: &[u32]) -> String {
    if vars.is_empty() {
        return "the empty event".into();
    }
    vars.iter()
        .map(|&v| format!("{}={}", g.name(v), current[v.index()]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Evaluate against a joint distribution, producing the distribution of the
/// plan's outcome variables (declaration order). Sum variables range over
/// their cardinalities, outcome variables stay free, and controls take the
/// plan's values; any other variable in a factor is an error. Each factor is
/// the exact conditional `P(target | given)` of `joint`, so a zero-probability
/// conditioning event is reported rather than divided by.
pub fn evaluate(
    g: &CausalDiagram,
    e: &Estimand,
    joint: &Distribution,
    q: &PlanQuery,
) -> Result<Distribution> {
    let assignment = q.assignment(g)?;
    let card_of = |v: NodeId| -> Result<u32> {
        joint
            .card_of(v)
            .ok_or_else(|| Error::ScopeMissing(g.name(v).into()))
    };

    // Classify every variable the expression can mention.
    let mut summed = NodeSet::new();
    for &v in &e.sums {
        if q.outcome.contains(v) {
            return Err(Error::OverlappingQuery(format!(
                "sum variable `{}` is an outcome",
                g.name(v)
            )));
        }
        summed.insert(v);
    }
    let mut fixed: Vec<Option<u32>> = vec![None; g.node_count()];
    for &(x, val) in &assignment {
        if summed.contains(x) {
            return Err(Error::OverlappingQuery(format!(
                "sum variable `{}` is a plan control",
                g.name(x)
            )));
        }
        let card = card_of(x)?;
        if val >= card {
            return Err(Error::ValueOutOfRange {
                node: g.name(x).into(),
                value: val,
                card,
            });
        }
        fixed[x.index()] = Some(val);
    }
    for f in &e.factors {
        for &v in f.target.iter().chain(&f.given) {
            if !(summed.contains(v) || q.outcome.contains(v) || fixed[v.index()].is_some()) {
                return Err(Error::UnboundVariable(g.name(v).into()));
            }
            card_of(v)?;
        }
    }

    // Factor tables: numerator and denominator marginals of the joint.
    struct Table<'f> {
        factor: &'f Conditional,
        num: Distribution,
        den: Distribution,
    }
    let tables: Vec<Table> = e
        .factors
        .iter()
        .map(|f| {
            let num_keep: NodeSet = f.target.iter().chain(&f.given).copied().collect();
            let den_keep: NodeSet = f.given.iter().copied().collect();
            Table {
                factor: f,
                num: joint.marginal(&num_keep),
                den: joint.marginal(&den_keep),
            }
        })
        .collect();

    let yvars: Vec<NodeId> = q.outcome.iter().collect();
    let ycards: Vec<u32> = yvars.iter().map(|&v| card_of(v)).collect::<Result<_>>()?;
    let ycells: usize = ycards.iter().map(|&c| c as usize).product();
    let scards: Vec<u32> = e.sums.iter().map(|&v| card_of(v)).collect::<Result<_>>()?;
    let scells: usize = scards.iter().map(|&c| c as usize).product();

    let mut current = vec![0u32; g.node_count()];
    for (i, slot) in fixed.iter().enumerate() {
        if let Some(val) = slot {
            current[i] = *val;
        }
    }
    let decode = |cells_idx: usize, vars: &[NodeId], cards: &[u32], current: &mut [u32]| {
        let mut rest = cells_idx;
        for i in (0..vars.len()).rev() {
            let c = cards[i] as usize;
            current[vars[i].index()] = (rest % c) as u32;
            rest /= c;
        }
    };

    let mut probs = vec![0.0; ycells];
    for (yi, slot) in probs.iter_mut().enumerate() {
        decode(yi, &yvars, &ycards, &mut current);
        let mut acc = 0.0;
        for si in 0..scells {
            decode(si, &e.sums, &scards, &mut current);
            let mut term = 1.0;
            for t in &tables {
                let den_config: Vec<u32> =
                    t.den.scope().iter().map(|v| current[v.index()]).collect();
                let den = t.den.prob(&den_config);
                if den <= 0.0 {
                    return Err(Error::PositivityViolation {
                        factor: render_factor(g, t.factor),
                        event: event(g, &t.factor.given, &current),
                    });
                }
                let num_config: Vec<u32> =
                    t.num.scope().iter().map(|v| current[v.index()]).collect();
                term *= t.num.prob(&num_config) / den;
            }
            acc += term;
        }
        *slot = acc;
    }
    Distribution::from_parts(yvars, ycards, probs)
}
