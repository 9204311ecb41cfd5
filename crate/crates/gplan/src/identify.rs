//! Deciding whether a sequential plan is identifiable from observational data.
//!
//! A plan do(x1), ..., do(xn) with outcome Y is identifiable when there is a
//! covariate sequence Z1, ..., Zn such that, for every stage k:
//!   (a) Zk contains only covariates that are non-descendants of Xk, ..., Xn;
//!   (b) Y is separated from Xk by X1..X(k-1), Z1..Zk in the stage-k graph,
//!       which cuts the incoming edges of later controls and the outgoing
//!       edges of Xk.
//! Such a sequence is called *admissible*. Three procedures decide existence:
//! the closed-form candidate sequence ([`w_sequence`] — admissible iff any
//! sequence is), a greedy minimizer, and exhaustive search. All agree; the
//! test suites check that they do.

use crate::dsep::{ancestral_set, d_separated, SeparationQuery};
use crate::error::{Error, Result};
use crate::estimand::{self, Estimand};
use crate::graph::{
    consistent_orderings, nondescendant_covariates, CausalDiagram, Mutilation, NodeId, NodeKind,
    NodeSet, PlanOrder,
};

/// A plan: the order in which controls are set, the outcome set, and
/// (optionally, for numeric work) the value assigned to each control.
#[derive(Clone, Debug)]
pub struct PlanQuery {
    pub order: PlanOrder,
    pub outcome: NodeSet,
    pub values: Option<Vec<u32>>,
}

impl PlanQuery {
    pub fn new(
        g: &CausalDiagram,
        order: PlanOrder,
        outcome: NodeSet,
        values: Option<Vec<u32>>,
    ) -> Result<PlanQuery> {
        if outcome.is_empty() {
            return Err(Error::EmptyOutcome);
        }
        for y in outcome.iter() {
            if g.kind(y) != NodeKind::Covariate {
                return Err(Error::NotACovariate(g.name(y).into()));
            }
        }
        if let Some(v) = &values {
            if v.len() != order.len() {
                return Err(Error::SequenceLength {
                    expected: order.len(),
                    got: v.len(),
                });
            }
        }
        Ok(PlanQuery {
            order,
            outcome,
            values,
        })
    }

    /// Use the diagram's outcome-flagged nodes as Y.
    pub fn from_flags(
        g: &CausalDiagram,
        order: PlanOrder,
        values: Option<Vec<u32>>,
    ) -> Result<PlanQuery> {
        PlanQuery::new(g, order, g.outcomes(), values)
    }

    /// Control/value pairs, erroring when the query carries no values.
    pub fn assignment(&self, _g: &CausalDiagram) -> Result<Vec<(NodeId, u32)>> {
        let values = self.values.as_ref().ok_or(Error::MissingPlanValues)?;
        Ok(self
            .order
            .controls()
            .iter()
            .copied()
            .zip(values.iter().copied())
            .collect())
    }
}

/// One candidate adjustment set per stage.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CovariateSequence {
    stages: Vec<NodeSet>,
}

impl CovariateSequence {
    pub fn new(
        g: &CausalDiagram,
        order: &PlanOrder,
        stages: Vec<NodeSet>,
    ) -> Result<CovariateSequence> {
        if stages.len() != order.len() {
            return Err(Error::SequenceLength {
                expected: order.len(),
                got: stages.len(),
            });
        }
        for set in &stages {
            for v in set.iter() {
                if g.kind(v) != NodeKind::Covariate {
                    return Err(Error::NotACovariate(g.name(v).into()));
                }
            }
        }
        Ok(CovariateSequence { stages })
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stages(&self) -> &[NodeSet] {
        &self.stages
    }

    /// Stage set Zk, 1-based.
    pub fn stage(&self, k: usize) -> &NodeSet {
        &self.stages[k - 1]
    }

    /// Render as `Z1={} Z2={z}`.
    pub fn render(&self, g: &CausalDiagram) -> String {
        self.stages
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Z{}={}", i + 1, g.render_set(s)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// The stage-k graph: incoming edges of later controls cut, outgoing edges of
/// the stage control cut.
pub fn stage_mutilation(order: &PlanOrder, k: usize) -> Mutilation {
    Mutilation::new(order.tail(k + 1), NodeSet::single(order.control(k)))
}

/// Outcome components split by stage-k eligibility: `within` is Y restricted
/// to the eligible (non-descendant) covariates, `beyond` is the rest.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OutcomeSplit {
    pub within: NodeSet,
    pub beyond: NodeSet,
}

pub fn outcome_split(g: &CausalDiagram, q: &PlanQuery, k: usize) -> OutcomeSplit {
    let nk = nondescendant_covariates(g, &q.order, k);
    OutcomeSplit {
        within: q.outcome.intersection(&nk),
        beyond: q.outcome.difference(&nk),
    }
}

/// The stage-k separation instance for a cumulative conditioning set: outcome
/// components already conditioned drop off the outcome side.
fn stage_query(q: &PlanQuery, cumulative: &NodeSet, k: usize) -> (SeparationQuery, Mutilation) {
    let cond = q.order.head(k).union(cumulative);
    let yside = q.outcome.difference(&cond);
    let query = SeparationQuery::new(yside, NodeSet::single(q.order.control(k)), cond);
    (query, stage_mutilation(&q.order, k))
}

fn stage_separated(g: &CausalDiagram, query: &SeparationQuery, m: &Mutilation) -> Result<bool> {
    d_separated(&g.apply(m), query)
}

/// Everything checked at one stage of an admissibility test.
#[derive(Clone, Debug)]
pub struct StageCheck {
    pub k: usize,
    /// Covariates eligible at this stage (non-descendants of Xk..Xn).
    pub eligible: NodeSet,
    /// Members of Zk that are not eligible; nonempty means the stage fails
    /// regardless of the separation outcome.
    pub ineligible: NodeSet,
    pub query: SeparationQuery,
    pub graph: Mutilation,
    pub separated: bool,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    pub stages: Vec<StageCheck>,
}

impl AdmissibilityReport {
    pub fn ok(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }

    pub fn first_failure(&self) -> Option<&StageCheck> {
        self.stages.iter().find(|s| !s.passed)
    }
}

/// Check a full sequence, reporting every stage (not just the first failure).
pub fn admissible(
    g: &CausalDiagram,
    q: &PlanQuery,
    seq: &CovariateSequence,
) -> Result<AdmissibilityReport> {
    if seq.len() != q.order.len() {
        return Err(Error::SequenceLength {
            expected: q.order.len(),
            got: seq.len(),
        });
    }
    let mut cumulative = NodeSet::new();
    let mut stages = Vec::new();
    for k in 1..=q.order.len() {
        let eligible = nondescendant_covariates(g, &q.order, k);
        let ineligible = seq.stage(k).difference(&eligible);
        cumulative = cumulative.union(seq.stage(k));
        let (query, graph) = stage_query(q, &cumulative, k);
        let separated = stage_separated(g, &query, &graph)?;
        stages.push(StageCheck {
            k,
            eligible,
            ineligible: ineligible.clone(),
            query,
            graph,
            separated,
            passed: ineligible.is_empty() && separated,
        });
    }
    Ok(AdmissibilityReport { stages })
}

/// The stage-k member of the canonical candidate sequence: ancestors of the
/// stage control and of the still-unconditioned outcome part, restricted to
/// eligible covariates, plus the eligible outcome components themselves.
fn w_stage(g: &CausalDiagram, q: &PlanQuery, k: usize) -> Result<NodeSet> {
    let gk = g.apply(&stage_mutilation(&q.order, k));
    let split = outcome_split(g, q, k);
    let xk = NodeSet::single(q.order.control(k));
    let anc = ancestral_set(&gk, &xk, &split.beyond)?;
    let eligible = nondescendant_covariates(g, &q.order, k);
    Ok(anc.intersection(&eligible).union(&split.within))
}

/// The canonical candidate sequence. It is admissible exactly when *some*
/// admissible sequence exists, which makes it a complete decision procedure.
pub fn w_sequence(g: &CausalDiagram, q: &PlanQuery) -> Result<CovariateSequence> {
    let stages = (1..=q.order.len())
        .map(|k| w_stage(g, q, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(CovariateSequence { stages })
}

#[derive(Clone, Debug)]
pub enum IdentificationResult {
    Identified {
        sequence: CovariateSequence,
        estimand: Estimand,
    },
    NotGIdentifiable {
        failing_stage: usize,
        witness: SeparationQuery,
        graph: Mutilation,
    },
}

impl IdentificationResult {
    pub fn identified(&self) -> bool {
        matches!(self, IdentificationResult::Identified { .. })
    }
}

fn identified(g: &CausalDiagram, q: &PlanQuery, seq: CovariateSequence) -> IdentificationResult {
    IdentificationResult::Identified {
        estimand: estimand::build(g, q, &seq),
        sequence: seq,
    }
}

/// Decide identifiability via the canonical candidate sequence.
pub fn g_identify(g: &CausalDiagram, q: &PlanQuery) -> Result<IdentificationResult> {
    let seq = w_sequence(g, q)?;
    let report = admissible(g, q, &seq)?;
    match report.first_failure() {
        None => Ok(identified(g, q, seq)),
        Some(stage) => Ok(IdentificationResult::NotGIdentifiable {
            failing_stage: stage.k,
            witness: stage.query.clone(),
            graph: stage.graph.clone(),
        }),
    }
}

/// Run [`g_identify`] once per consistent ordering of the controls. A plan
/// can be identifiable under one ordering and not another, so callers that
/// only care *whether* the effect is estimable should scan the verdicts.
pub fn identify_all_orderings(
    g: &CausalDiagram,
    q: &PlanQuery,
) -> Result<Vec<(PlanOrder, IdentificationResult)>> {
    let mut out = Vec::new();
    for order in consistent_orderings(g) {
        let sub = PlanQuery::new(g, order.clone(), q.outcome.clone(), None)?;
        out.push((order, g_identify(g, &sub)?));
    }
    Ok(out)
}

/// Like [`g_identify`], but each stage set is shrunk to a minimal admissible
/// subset before moving on (members tried for removal in reverse declaration
/// order). Any minimal choice stays extendable, so failure at a stage is
/// still a global verdict.
pub fn greedy_minimal_sequence(g: &CausalDiagram, q: &PlanQuery) -> Result<IdentificationResult> {
    let mut cumulative = NodeSet::new();
    let mut stages = Vec::new();
    for k in 1..=q.order.len() {
        let candidate = w_stage(g, q, k)?;
        let (query, graph) = stage_query(q, &cumulative.union(&candidate), k);
        if !stage_separated(g, &query, &graph)? {
            return Ok(IdentificationResult::NotGIdentifiable {
                failing_stage: k,
                witness: query,
                graph,
            });
        }
        let mut zk = candidate.clone();
        let members: Vec<NodeId> = candidate.iter().collect();
        for &v in members.iter().rev() {
            let mut attempt = zk.clone();
            attempt.remove(v);
            let (query, graph) = stage_query(q, &cumulative.union(&attempt), k);
            if stage_separated(g, &query, &graph)? {
                zk = attempt;
            }
        }
        cumulative = cumulative.union(&zk);
        stages.push(zk);
    }
    Ok(identified(g, q, CovariateSequence { stages }))
}

/// How many eligible covariates a stage may have before exhaustive search
/// refuses to enumerate its subsets.
pub const EXHAUSTIVE_STAGE_LIMIT: usize = 20;

/// Depth-first search over all covariate sequences (stage subsets enumerated
/// smallest-first, ties broken by declaration order), pruning every prefix
/// whose newest stage already fails. Returns the first admissible sequence
/// found; if none exists the canonical sequence's failure is reported.
pub fn exhaustive_identify(g: &CausalDiagram, q: &PlanQuery) -> Result<IdentificationResult> {
    let n = q.order.len();
    let mut eligibles = Vec::new();
    for k in 1..=n {
        let nk = nondescendant_covariates(g, &q.order, k);
        if nk.len() > EXHAUSTIVE_STAGE_LIMIT {
            return Err(Error::SearchSpaceExceeded(format!(
                "stage {k} has {} eligible covariates (limit {EXHAUSTIVE_STAGE_LIMIT})",
                nk.len()
            )));
        }
        eligibles.push(subsets_ordered(&nk));
    }

    fn dfs(
        g: &CausalDiagram,
        q: &PlanQuery,
        eligibles: &[Vec<NodeSet>],
        k: usize,
        cumulative: &NodeSet,
        stages: &mut Vec<NodeSet>,
    ) -> Result<bool> {
        if k > q.order.len() {
            return Ok(true);
        }
        for zk in &eligibles[k - 1] {
            let trial = cumulative.union(zk);
            let (query, graph) = stage_query(q, &trial, k);
            if stage_separated(g, &query, &graph)? {
                stages.push(zk.clone());
                if dfs(g, q, eligibles, k + 1, &trial, stages)? {
                    return Ok(true);
                }
                stages.pop();
            }
        }
        Ok(false)
    }

    let mut stages = Vec::new();
    if dfs(g, q, &eligibles, 1, &NodeSet::new(), &mut stages)? {
        return Ok(identified(g, q, CovariateSequence { stages }));
    }
    // No sequence anywhere; the canonical one fails too, and its failing stage
    // is the canonical witness.
    match g_identify(g, q)? {
        r @ IdentificationResult::NotGIdentifiable { .. } => Ok(r),
        IdentificationResult::Identified { .. } => Err(Error::CrossCheck(
            "exhaustive search found nothing but the canonical sequence is admissible".into(),
        )),
    }
}

/// All subsets, smallest first, ties in declaration order.
pub(crate) fn subsets_ordered(set: &NodeSet) -> Vec<NodeSet> {
    let items: Vec<NodeId> = set.iter().collect();
    let mut all: Vec<NodeSet> = (0..(1usize << items.len()))
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    all.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.iter().collect::<Vec<_>>().cmp(&b.iter().collect()))
    });
    all
}

/// Certificate that one stage of a sequence is admissible: a split of the
/// unconditioned non-control non-descendants U into a part independent of the
/// stage control given the past (`control_independent`) and a part separated
/// from the still-unconditioned outcome given everything else
/// (`outcome_screened`). Such a split exists at every stage exactly when the
/// sequence (with eligible outcome components folded into each stage, which
/// never hurts admissibility) is admissible.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BackgroundPartition {
    pub outcome_screened: NodeSet,
    pub control_independent: NodeSet,
}

/// Largest U for which the partition search will run.
pub const PARTITION_LIMIT: usize = 15;

/// Search stage `k` for a certificate. Splits are tried in a fixed order (each
/// U member assigned to `control_independent` first), so the result is
/// deterministic. Stage sets containing ineligible covariates yield `None`
/// immediately, matching the admissibility verdict.
pub fn background_partition(
    g: &CausalDiagram,
    q: &PlanQuery,
    seq: &CovariateSequence,
    k: usize,
) -> Result<Option<BackgroundPartition>> {
    let n = q.order.len();
    if !(1..=n).contains(&k) {
        return Err(Error::StageOutOfRange { k, n });
    }
    if seq.len() != n {
        return Err(Error::SequenceLength {
            expected: n,
            got: seq.len(),
        });
    }
    // Fold eligible outcome components into each stage set.
    let mut cumulative = NodeSet::new();
    for j in 1..=k {
        let nj = nondescendant_covariates(g, &q.order, j);
        let zj = seq.stage(j).union(&q.outcome.intersection(&nj));
        if !zj.is_subset(&nj) {
            return Ok(None);
        }
        cumulative = cumulative.union(&zj);
    }
    let beyond = outcome_split(g, q, k).beyond;
    let all: NodeSet = g.node_ids().collect();
    let u = all
        .difference(&g.descendants(&q.order.tail(k)))
        .difference(&g.controls())
        .difference(&cumulative);
    if u.len() > PARTITION_LIMIT {
        return Err(Error::SearchSpaceExceeded(format!(
            "stage {k} has {} unconditioned background nodes (limit {PARTITION_LIMIT})",
            u.len()
        )));
    }
    let gk = g.mutilate(&q.order.tail(k + 1), &NodeSet::new());
    let xk = NodeSet::single(q.order.control(k));
    let head = q.order.head(k);
    let past = head.union(&cumulative);
    let items: Vec<NodeId> = u.iter().collect();
    for mask in 0..(1usize << items.len()) {
        let screened: NodeSet = items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect();
        let independent = u.difference(&screened);
        let qi = SeparationQuery::new(independent.clone(), xk.clone(), past.clone());
        if !d_separated(&gk, &qi)? {
            continue;
        }
        let cond = past.union(&xk).union(&independent);
        let qii = SeparationQuery::new(screened.clone(), beyond.clone(), cond);
        if d_separated(&gk, &qii)? {
            return Ok(Some(BackgroundPartition {
                outcome_screened: screened,
                control_independent: independent,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimand;
    use crate::fixtures;

    fn fig1_query() -> (CausalDiagram, PlanQuery) {
        let g = fixtures::two_stage_treatment();
        let order = PlanOrder::new(&g, &["x1", "x2"]).unwrap();
        let q = PlanQuery::from_flags(&g, order, None).unwrap();
        (g, q)
    }

    fn seq(g: &CausalDiagram, q: &PlanQuery, stages: &[&[&str]]) -> CovariateSequence {
        let sets = stages
            .iter()
            .map(|s| g.set_from_names(s).unwrap())
            .collect();
        CovariateSequence::new(g, &q.order, sets).unwrap()
    }

    #[test]
    fn canonical_sequence_on_the_two_stage_fixture() {
        let (g, q) = fig1_query();
        let w = w_sequence(&g, &q).unwrap();
        assert_eq!(w.render(&g), "Z1={} Z2={z}");
    }

    #[test]
    fn admissibility_golden_cases() {
        let (g, q) = fig1_query();
        assert!(admissible(&g, &q, &seq(&g, &q, &[&[], &["z"]]))
            .unwrap()
            .ok());

        // Without z the stage-2 separation fails.
        let report = admissible(&g, &q, &seq(&g, &q, &[&[], &[]])).unwrap();
        let failure = report.first_failure().unwrap();
        assert_eq!(failure.k, 2);
        assert!(failure.ineligible.is_empty());
        assert_eq!(failure.query.render(&g), "(y _||_ x2 | x1)");
        assert_eq!(failure.graph.render(&g), "G[underline={x2}]");

        // z is a descendant of x1, so it is ineligible at stage 1.
        let report = admissible(&g, &q, &seq(&g, &q, &[&["z"], &["z"]])).unwrap();
        let failure = report.first_failure().unwrap();
        assert_eq!(failure.k, 1);
        assert_eq!(failure.ineligible, g.set_from_names(&["z"]).unwrap());
    }

    #[test]
    fn identify_golden_on_the_two_stage_fixture() {
        let (g, q) = fig1_query();
        match g_identify(&g, &q).unwrap() {
            IdentificationResult::Identified {
                sequence,
                estimand: e,
            } => {
                assert_eq!(sequence.render(&g), "Z1={} Z2={z}");
                assert_eq!(estimand::render(&g, &e), "sum_{z} P(y|z,x1,x2) * P(z|x1)");
            }
            other => panic!("expected identification, got {other:?}"),
        }
    }

    #[test]
    fn all_orderings_reports_one_verdict_per_ordering() {
        // The two-stage fixture admits exactly one consistent ordering, so the
        // scan degenerates to a single identified entry.
        let (g, q) = fig1_query();
        let verdicts = identify_all_orderings(&g, &q).unwrap();
        assert_eq!(verdicts.len(), 1);
        assert_eq!(verdicts[0].0.render(&g), "x1,x2");
        assert!(matches!(
            verdicts[0].1,
            IdentificationResult::Identified { .. }
        ));
    }

    #[test]
    fn ordering_choice_can_decide_identifiability() {
        let g = fixtures::order_sensitive();
        let good =
            PlanQuery::from_flags(&g, PlanOrder::new(&g, &["x1", "x2"]).unwrap(), None).unwrap();
        let verdicts = identify_all_orderings(&g, &good).unwrap();
        let got: Vec<(String, bool)> = verdicts
            .iter()
            .map(|(o, r)| {
                (
                    o.render(&g),
                    matches!(r, IdentificationResult::Identified { .. }),
                )
            })
            .collect();
        assert_eq!(got, vec![("x1,x2".into(), true), ("x2,x1".into(), false)]);

        match exhaustive_identify(&g, &good).unwrap() {
            IdentificationResult::Identified {
                sequence,
                estimand: e,
            } => {
                assert_eq!(sequence.render(&g), "Z1={} Z2={z}");
                assert_eq!(estimand::render(&g, &e), "sum_{z} P(y|z,x1,x2) * P(z|x1)");
            }
            other => panic!("expected identification, got {other:?}"),
        }

        let bad =
            PlanQuery::from_flags(&g, PlanOrder::new(&g, &["x2", "x1"]).unwrap(), None).unwrap();
        for result in [
            g_identify(&g, &bad).unwrap(),
            greedy_minimal_sequence(&g, &bad).unwrap(),
            exhaustive_identify(&g, &bad).unwrap(),
        ] {
            match result {
                IdentificationResult::NotGIdentifiable { failing_stage, .. } => {
                    assert_eq!(failing_stage, 1);
                }
                other => panic!("expected failure, got {other:?}"),
            }
        }
    }

    #[test]
    fn bow_is_not_identifiable_by_all_three_procedures() {
        let g = fixtures::bow();
        let q = PlanQuery::from_flags(&g, PlanOrder::new(&g, &["x"]).unwrap(), None).unwrap();
        for result in [
            g_identify(&g, &q).unwrap(),
            greedy_minimal_sequence(&g, &q).unwrap(),
            exhaustive_identify(&g, &q).unwrap(),
        ] {
            match result {
                IdentificationResult::NotGIdentifiable {
                    failing_stage,
                    witness,
                    graph,
                } => {
                    assert_eq!(failing_stage, 1);
                    assert_eq!(witness.render(&g), "(y _||_ x)");
                    assert_eq!(graph.render(&g), "G[underline={x}]");
                }
                other => panic!("expected failure, got {other:?}"),
            }
        }
    }

    #[test]
    fn greedy_shrinks_to_a_minimal_set() {
        let g = fixtures::two_minimal_adjustments();
        let q = PlanQuery::from_flags(&g, PlanOrder::new(&g, &["x"]).unwrap(), None).unwrap();
        match greedy_minimal_sequence(&g, &q).unwrap() {
            IdentificationResult::Identified { sequence, .. } => {
                assert_eq!(sequence.render(&g), "Z1={a}");
            }
            other => panic!("expected identification, got {other:?}"),
        }
        // {b} is the other minimal choice; both must be admissible.
        for stage in [&["a"][..], &["b"][..]] {
            assert!(admissible(&g, &q, &seq(&g, &q, &[stage])).unwrap().ok());
        }
        // ...and the empty set is not.
        assert!(!admissible(&g, &q, &seq(&g, &q, &[&[]])).unwrap().ok());
    }

    #[test]
    fn exhaustive_finds_the_smallest_first_sequence() {
        let g = fixtures::two_minimal_adjustments();
        let q = PlanQuery::from_flags(&g, PlanOrder::new(&g, &["x"]).unwrap(), None).unwrap();
        match exhaustive_identify(&g, &q).unwrap() {
            IdentificationResult::Identified { sequence, .. } => {
                assert_eq!(sequence.render(&g), "Z1={a}");
            }
            other => panic!("expected identification, got {other:?}"),
        }
    }

    #[test]
    fn conditioning_early_can_destroy_later_stages() {
        let g = fixtures::premature_conditioning();
        let order = PlanOrder::new(&g, &["x1", "x2"]).unwrap();
        let q = PlanQuery::from_flags(&g, order, None).unwrap();
        // The empty sequence is admissible...
        assert!(admissible(&g, &q, &seq(&g, &q, &[&[], &[]])).unwrap().ok());
        // ...and {w} alone passes stage 1...
        let with_w = admissible(&g, &q, &seq(&g, &q, &[&["w"], &[]])).unwrap();
        assert!(with_w.stages[0].passed);
        // ...but once w is conditioned, no stage-2 choice recovers.
        for z2 in [&[][..], &["w"][..]] {
            let report = admissible(&g, &q, &seq(&g, &q, &[&["w"], z2])).unwrap();
            assert!(!report.stages[1].passed, "z2 = {z2:?} should fail");
        }
        // All three procedures still identify the plan.
        assert!(g_identify(&g, &q).unwrap().identified());
        assert!(greedy_minimal_sequence(&g, &q).unwrap().identified());
        assert!(exhaustive_identify(&g, &q).unwrap().identified());
    }

    #[test]
    fn outcome_split_tracks_stage_eligibility() {
        let (g, q) = fig1_query();
        let split = outcome_split(&g, &q, 2);
        assert!(split.within.is_empty());
        assert_eq!(split.beyond, g.set_from_names(&["y"]).unwrap());
    }

    #[test]
    fn background_partition_certifies_each_stage() {
        let (g, q) = fig1_query();
        let good = seq(&g, &q, &[&[], &["z"]]);
        let p1 = background_partition(&g, &q, &good, 1).unwrap().unwrap();
        assert_eq!(p1.outcome_screened, g.set_from_names(&["u1"]).unwrap());
        assert_eq!(p1.control_independent, g.set_from_names(&["u2"]).unwrap());
        let p2 = background_partition(&g, &q, &good, 2).unwrap().unwrap();
        assert!(p2.outcome_screened.is_empty());
        assert_eq!(
            p2.control_independent,
            g.set_from_names(&["u1", "u2"]).unwrap()
        );

        // The inadmissible empty sequence has no certificate at stage 2.
        let bad = seq(&g, &q, &[&[], &[]]);
        assert!(background_partition(&g, &q, &bad, 2).unwrap().is_none());
    }

    #[test]
    fn background_partition_guards_and_validation() {
        let (g, q) = fig1_query();
        let good = seq(&g, &q, &[&[], &["z"]]);
        assert!(matches!(
            background_partition(&g, &q, &good, 3),
            Err(Error::StageOutOfRange { k: 3, n: 2 })
        ));
        // An ineligible stage set is simply not admissible: no certificate.
        let bad = seq(&g, &q, &[&["z"], &["z"]]);
        assert!(background_partition(&g, &q, &bad, 1).unwrap().is_none());
    }

    #[test]
    fn sequence_validation_rejects_non_covariates() {
        let (g, q) = fig1_query();
        let latent = CovariateSequence::new(
            &g,
            &q.order,
            vec![g.set_from_names(&["u1"]).unwrap(), NodeSet::new()],
        );
        assert_eq!(latent.unwrap_err(), Error::NotACovariate("u1".into()));
        let short = CovariateSequence::new(&g, &q.order, vec![NodeSet::new()]);
        assert!(matches!(short.unwrap_err(), Error::SequenceLength { .. }));
    }

    #[test]
    fn empty_plan_is_identified_with_the_plain_marginal() {
        use crate::graph::DiagramBuilder;
        let g = DiagramBuilder::new().outcome("y").build().unwrap();
        let order = PlanOrder::new(&g, &[]).unwrap();
        let q = PlanQuery::from_flags(&g, order, Some(vec![])).unwrap();
        match g_identify(&g, &q).unwrap() {
            IdentificationResult::Identified { estimand: e, .. } => {
                assert_eq!(estimand::render(&g, &e), "P(y)");
            }
            other => panic!("expected identification, got {other:?}"),
        }
    }

    #[test]
    fn subset_enumeration_is_smallest_first() {
        let (g, _) = fig1_query();
        let sets = subsets_ordered(&g.set_from_names(&["z", "y"]).unwrap());
        let rendered: Vec<String> = sets.iter().map(|s| g.render_set(s)).collect();
        assert_eq!(rendered, vec!["{}", "{z}", "{y}", "{z, y}"]);
    }
}
