//! Exact inference on small discrete models: dense joint tables, interventions
//! by truncated factorization, and the latent-inclusive sum-product route. The
//! two interventional routes are computed independently and cross-checked, so
//! a result from [`DiscreteModel::causal_effect`] is self-validating.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimand::{self, Conditional, Estimand};
use crate::graph::{CausalDiagram, NodeId, NodeSet, PlanOrder};
use crate::identify::PlanQuery;

/// Refuse to materialize tables bigger than this many cells.
pub const MAX_TABLE_CELLS: u128 = 1 << 24;
/// Every generated probability is kept inside [EPS, 1-EPS].
pub const POSITIVITY_EPS: f64 = 1e-3;
/// The two interventional routes must agree to this tolerance.
pub const CROSS_CHECK_TOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-9;

/// A dense probability table over an ordered scope. Configurations are indexed
/// odometer-style with the last scope variable varying fastest.
#[derive(Clone, Debug)]
pub struct Distribution {
    scope: Vec<NodeId>,
    cards: Vec<u32>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn from_parts(
        scope: Vec<NodeId>,
        cards: Vec<u32>,
        probs: Vec<f64>,
    ) -> Result<Distribution> {
        let cells: u128 = cards.iter().map(|&c| c as u128).product();
        if cells != probs.len() as u128 {
            return Err(Error::TableShape {
                node: "<distribution>".into(),
                expected: cells as usize,
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NegativeProbability("<distribution>".into()));
        }
        Ok(Distribution {
            scope,
            cards,
            probs,
        })
    }

    pub fn scope(&self) -> &[NodeId] {
        &self.scope
    }

    pub fn cards(&self) -> &[u32] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn card_of(&self, id: NodeId) -> Option<u32> {
        self.scope
            .iter()
            .position(|&v| v == id)
            .map(|i| self.cards[i])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn index_of(&self, config: &[u32]) -> usize {
        debug_assert_eq!(config.len(), self.scope.len());
        let mut idx = 0usize;
        for (i, &v) in config.iter().enumerate() {
            idx = idx * self.cards[i] as usize + v as usize;
        }
        idx
    }

    pub fn config_at(&self, mut idx: usize) -> Vec<u32> {
        let mut config = vec![0u32; self.scope.len()];
        for i in (0..self.scope.len()).rev() {
            let c = self.cards[i] as usize;
            config[i] = (idx % c) as u32;
            idx /= c;
        }
        config
    }

    pub fn prob(&self, config: &[u32]) -> f64 {
        self.probs[self.index_of(config)]
    }

    /// Sum out everything not in `keep`. Scope order of the result follows the
    /// current scope order.
    pub fn marginal(&self, keep: &NodeSet) -> Distribution {
        let positions: Vec<usize> = (0..self.scope.len())
            .filter(|&i| keep.contains(self.scope[i]))
            .collect();
        let scope: Vec<NodeId> = positions.iter().map(|&i| self.scope[i]).collect();
        let cards: Vec<u32> = positions.iter().map(|&i| self.cards[i]).collect();
        let cells: usize = cards.iter().map(|&c| c as usize).product();
        let mut probs = vec![0.0; cells];
        for (idx, &p) in self.probs.iter().enumerate() {
            let config = self.config_at(idx);
            let mut out = 0usize;
            for (j, &i) in positions.iter().enumerate() {
                out = out * cards[j] as usize + config[i] as usize;
            }
            probs[out] += p;
        }
        Distribution {
            scope,
            cards,
            probs,
        }
    }

    /// Largest absolute cell difference. Scopes must match exactly.
    pub fn max_abs_diff(&self, other: &Distribution, g: &CausalDiagram) -> Result<f64> {
        if self.scope != other.scope || self.cards != other.cards {
            let name = self
                .scope
                .iter()
                .chain(other.scope.iter())
                .find(|&&v| !self.scope.contains(&v) || !other.scope.contains(&v))
                .map(|&v| g.name(v).to_string())
                .unwrap_or_else(|| "<cardinality>".into());
            return Err(Error::ScopeMissing(name));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// One `P(name=v, ...) = p` line per configuration.
    pub fn render(&self, g: &CausalDiagram) -> String {
        let mut out = String::new();
        for idx in 0..self.probs.len() {
            let config = self.config_at(idx);
            let event: Vec<String> = self
                .scope
                .iter()
                .zip(&config)
                .map(|(&v, &val)| format!("{}={}", g.name(v), val))
                .collect();
            out.push_str(&format!(
                "P({}) = {:.15}\n",
                event.join(", "),
                self.probs[idx]
            ));
        }
        out
    }
}

/// One conditional probability table: rows indexed by the parent configuration
/// (parents in declaration order, last varying fastest), `card` entries per row.
#[derive(Clone, Debug)]
pub struct Cpt {
    parents: Vec<NodeId>,
    card: u32,
    values: Vec<f64>,
}

impl Cpt {
    pub fn parents(&self) -> &[NodeId] {
        &self.parents
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.card as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A causal diagram together with node cardinalities and one CPT per node.
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    diagram: CausalDiagram,
    cards: Vec<u32>,
    cpts: Vec<Cpt>,
}

impl DiscreteModel {
    /// `tables[i]` is the flat CPT for node `i` in declaration order; rows
    /// follow the layout documented on [`Cpt`]. Rows must sum to 1.
    pub fn new(
        diagram: CausalDiagram,
        cards: Vec<u32>,
        tables: Vec<Vec<f64>>,
    ) -> Result<DiscreteModel> {
        assert_eq!(cards.len(), diagram.node_count());
        assert_eq!(tables.len(), diagram.node_count());
        for id in diagram.node_ids() {
            let card = cards[id.index()];
            if card < 2 {
                return Err(Error::BadCardinality {
                    node: diagram.name(id).into(),
                    card,
                });
            }
        }
        let mut cpts = Vec::new();
        for id in diagram.node_ids() {
            let name = diagram.name(id).to_string();
            let card = cards[id.index()];
            let parents: Vec<NodeId> = diagram.parents(id).to_vec();
            let rows: usize = parents.iter().map(|p| cards[p.index()] as usize).product();
            let values = tables[id.index()].clone();
            if values.len() != rows * card as usize {
                return Err(Error::TableShape {
                    node: name,
                    expected: rows * card as usize,
                    got: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::NegativeProbability(name));
            }
            for row in 0..rows {
                let sum: f64 = values[row * card as usize..(row + 1) * card as usize]
                    .iter()
                    .sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::RowSum {
                        node: name,
                        row,
                        sum,
                    });
                }
            }
            cpts.push(Cpt {
                parents,
                card,
                values,
            });
        }
        Ok(DiscreteModel {
            diagram,
            cards,
            cpts,
        })
    }

    pub fn diagram(&self) -> &CausalDiagram {
        &self.diagram
    }

    pub fn cards(&self) -> &[u32] {
        &self.cards
    }

    pub fn card(&self, id: NodeId) -> u32 {
        self.cards[id.index()]
    }

    pub fn cpt(&self, id: NodeId) -> &Cpt {
        &self.cpts[id.index()]
    }

    /// P(v = value | parents as in `full`), where `full` assigns every node.
    fn local_prob(&self, v: NodeId, full: &[u32]) -> f64 {
        let cpt = &self.cpts[v.index()];
        let mut row = 0usize;
        for &p in &cpt.parents {
            row = row * self.cards[p.index()] as usize + full[p.index()] as usize;
        }
        cpt.values[row * cpt.card as usize + full[v.index()] as usize]
    }

    fn check_assignment(&self, assign: &[(NodeId, u32)]) -> Result<()> {
        let mut seen = NodeSet::new();
        for &(v, value) in assign {
            if !seen.insert(v) {
                return Err(Error::DuplicateNode(self.diagram.name(v).into()));
            }
            if value >= self.cards[v.index()] {
                return Err(Error::ValueOutOfRange {
                    node: self.diagram.name(v).into(),
                    value,
                    card: self.cards[v.index()],
                });
            }
        }
        Ok(())
    }

    /// The observational joint over all nodes (latents included).
    pub fn joint(&self) -> Result<Distribution> {
        self.intervene(&[])
    }

    /// The observational joint marginalized onto observed (non-latent) nodes.
    pub fn observed_joint(&self) -> Result<Distribution> {
        let observed = self.diagram.covariates().union(&self.diagram.controls());
        Ok(self.joint()?.marginal(&observed))
    }

    /// Truncated factorization: drop the factors of intervened nodes, clamp
    /// their values, and multiply the remaining CPTs. The result ranges over
    /// the non-intervened nodes and sums to 1.
    pub fn intervene(&self, assign: &[(NodeId, u32)]) -> Result<Distribution> {
        self.check_assignment(assign)?;
        let fixed: NodeSet = assign.iter().map(|&(v, _)| v).collect();
        let scope: Vec<NodeId> = self
            .diagram
            .node_ids()
            .filter(|id| !fixed.contains(*id))
            .collect();
        let cards: Vec<u32> = scope.iter().map(|v| self.cards[v.index()]).collect();
        let cells: u128 = cards.iter().map(|&c| c as u128).product();
        if cells > MAX_TABLE_CELLS {
            return Err(Error::SearchSpaceExceeded(format!(
                "joint table would hold {cells} cells (limit {MAX_TABLE_CELLS})"
            )));
        }
        let mut full = vec![0u32; self.diagram.node_count()];
        for &(v, value) in assign {
            full[v.index()] = value;
        }
        let mut probs = vec![0.0; cells as usize];
        for (idx, slot) in probs.iter_mut().enumerate() {
            let mut rest = idx;
            for i in (0..scope.len()).rev() {
                let c = cards[i] as usize;
                full[scope[i].index()] = (rest % c) as u32;
                rest /= c;
            }
            let mut p = 1.0;
            for &v in &scope {
                p *= self.local_prob(v, &full);
            }
            *slot = p;
        }
        Ok(Distribution {
            scope,
            cards,
            probs,
        })
    }

    /// Exact interventional distribution of the plan's outcome. Computed two
    /// independent ways — truncated factorization, and the latent-inclusive
    /// sum-product over the stage blocks of [`stage_blocks`] — which must agree
    /// to [`CROSS_CHECK_TOL`].
    pub fn causal_effect(&self, q: &PlanQuery) -> Result<Distribution> {
        let direct = self
            .intervene(&q.assignment(&self.diagram)?)?
            .marginal(&q.outcome);
        let blocks = stage_blocks(&self.diagram, &q.order);
        let formula = self.g_formula(q, &blocks)?;
        let diff = direct.max_abs_diff(&formula, &self.diagram)?;
        if diff > CROSS_CHECK_TOL {
            return Err(Error::CrossCheck(format!(
                "interventional routes disagree by {diff:e}"
            )));
        }
        Ok(direct)
    }

    /// Evaluate the latent-inclusive sum-product for the plan using the given
    /// per-stage blocks: sum over block variables of P(y | blocks, controls) ·
    /// prod_k P(block_k | earlier blocks, earlier controls), all factors taken
    /// from the observational joint. Outcome nodes inside blocks are pinned to
    /// the queried outcome configuration, never summed.
    pub fn g_formula(&self, q: &PlanQuery, blocks: &[NodeSet]) -> Result<Distribution> {
        let g = &self.diagram;
        if blocks.len() != q.order.len() {
            return Err(Error::SequenceLength {
                expected: q.order.len(),
                got: blocks.len(),
            });
        }
        let mut joined = NodeSet::new();
        for block in blocks {
            if !joined.is_disjoint(block) {
                return Err(Error::OverlappingQuery(format!(
                    "stage blocks overlap at {}",
                    g.render_set(&joined.intersection(block))
                )));
            }
            if !block.intersection(&g.controls()).is_empty() {
                return Err(Error::NotACovariate(
                    g.render_list(&block.intersection(&g.controls())),
                ));
            }
            joined = joined.union(block);
        }
        let mut factors = Vec::new();
        let mut bound: Vec<NodeId> = Vec::new();
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                continue;
            }
            let mut given: Vec<NodeId> = bound.clone();
            given.extend(q.order.controls()[..i].iter().copied());
            factors.push(Conditional {
                target: block.iter().collect(),
                given,
            });
            bound.extend(block.iter());
        }
        let remaining: Vec<NodeId> = q.outcome.iter().filter(|&y| !joined.contains(y)).collect();
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
            .filter(|&v| !q.outcome.contains(v))
            .collect();
        let e = Estimand { sums, factors };
        estimand::evaluate(g, &e, &self.joint()?, q)
    }
}

/// Per-stage latent-inclusive blocks for the sum-product route: block k holds
/// the ancestors of the stage-k control (controls themselves and nodes already
/// claimed by earlier blocks excluded). Blocks are pairwise disjoint and every
/// parent of a block-k node lies in earlier blocks, the block itself, or
/// earlier controls — which is exactly what makes the factors collapse to
/// products of CPTs.
pub fn stage_blocks(g: &CausalDiagram, order: &PlanOrder) -> Vec<NodeSet> {
    let controls = g.controls();
    let mut claimed = NodeSet::new();
    let mut blocks = Vec::new();
    for k in 1..=order.len() {
        let anc = g.ancestors(&NodeSet::single(order.control(k)));
        let block = anc.difference(&controls).difference(&claimed);
        claimed = claimed.union(&block);
        blocks.push(block);
    }
    blocks
}

/// A reproducible random model on `g`: cardinalities uniform in `2..=max_card`,
/// CPT rows sampled then bounded away from 0 and 1 (entries always land in
/// `[POSITIVITY_EPS, 1 - POSITIVITY_EPS]`).
pub fn random_model(g: &CausalDiagram, seed: u64, max_card: u32) -> DiscreteModel {
    let max_card = max_card.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards: Vec<u32> = g.node_ids().map(|_| rng.gen_range(2..=max_card)).collect();
    let mut tables = Vec::new();
    for id in g.node_ids() {
        let card = cards[id.index()] as usize;
        let rows: usize = g
            .parents(id)
            .iter()
            .map(|p| cards[p.index()] as usize)
            .product();
        let mut values = Vec::with_capacity(rows * card);
        for _ in 0..rows {
            let raw: Vec<f64> = (0..card)
                .map(|_| -f64::ln(1.0 - rng.gen::<f64>()))
                .collect();
            let sum: f64 = raw.iter().sum();
            // Mix with the uniform row so every entry clears the positivity
            // floor: p >= lambda/card = EPS and p <= 1 - lambda(1 - 1/card).
            let lambda = card as f64 * POSITIVITY_EPS;
            values.extend(
                raw.iter()
                    .map(|r| (1.0 - lambda) * r / sum + POSITIVITY_EPS),
            );
        }
        tables.push(values);
    }
    DiscreteModel::new(g.clone(), cards, tables).expect("generated tables are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{DiagramBuilder, NodeKind, NodeSet};
    use crate::identify::PlanQuery;

    fn bow_model() -> DiscreteModel {
        // u ~ Bernoulli(0.4); x strongly follows u; y depends on x and u.
        let g = fixtures::bow();
        let tables = vec![
            vec![0.9, 0.1, 0.2, 0.8],                     // x | u
            vec![0.8, 0.2, 0.5, 0.5, 0.6, 0.4, 0.1, 0.9], // y | x, u
            vec![0.6, 0.4],                               // u
        ];
        DiscreteModel::new(g, vec![2, 2, 2], tables).unwrap()
    }

    #[test]
    fn joint_sums_to_one() {
        let m = bow_model();
        assert!((m.joint().unwrap().total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_matches_hand_product() {
        let m = bow_model();
        let g = m.diagram().clone();
        let j = m.joint().unwrap();
        let x = g.node_id("x").unwrap();
        let y = g.node_id("y").unwrap();
        let u = g.node_id("u").unwrap();
        // Scope order is declaration order: x, y, u.
        assert_eq!(j.scope(), &[x, y, u]);
        // P(x=1, y=0, u=1) = P(u=1) P(x=1|u=1) P(y=0|x=1,u=1).
        assert!((j.prob(&[1, 0, 1]) - 0.4 * 0.8 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn intervention_differs_from_conditioning_under_confounding() {
        let m = bow_model();
        let g = m.diagram().clone();
        let x = g.node_id("x").unwrap();
        let y = g.node_id("y").unwrap();
        // P(y | do(x=1)) = sum_u P(u) P(y | x=1, u).
        let post = m.intervene(&[(x, 1)]).unwrap();
        assert_eq!(post.scope(), &[y, g.node_id("u").unwrap()]);
        let p_do = post.marginal(&NodeSet::single(y));
        let want1 = 0.6 * 0.4 + 0.4 * 0.9;
        assert!((p_do.prob(&[1]) - want1).abs() < 1e-12);
        assert!((p_do.total() - 1.0).abs() < 1e-12);
        // Conditioning weights u by P(u | x=1) instead; the two disagree here.
        let j = m.joint().unwrap();
        let obs = j.marginal(&g.set_from_names(&["x", "y"]).unwrap());
        let p_cond = obs.prob(&[1, 1]) / (obs.prob(&[1, 0]) + obs.prob(&[1, 1]));
        assert!((p_cond - p_do.prob(&[1])).abs() > 1e-3);
    }

    #[test]
    fn stage_blocks_for_the_two_stage_fixture() {
        let g = fixtures::two_stage_treatment();
        let order = crate::graph::PlanOrder::new(&g, &["x1", "x2"]).unwrap();
        let blocks = stage_blocks(&g, &order);
        assert_eq!(blocks[0], g.set_from_names(&["u1"]).unwrap());
        assert_eq!(blocks[1], g.set_from_names(&["z", "u2"]).unwrap());
    }

    #[test]
    fn causal_effect_cross_check_passes_on_random_models() {
        let g = fixtures::two_stage_treatment();
        let q = PlanQuery::from_flags(
            &g,
            crate::graph::PlanOrder::new(&g, &["x1", "x2"]).unwrap(),
            Some(vec![1, 0]),
        )
        .unwrap();
        for seed in 1..=5 {
            let m = random_model(&g, seed, 3);
            let eff = m.causal_effect(&q).unwrap();
            assert!((eff.total() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn alternative_valid_blocks_give_the_same_answer() {
        // Moving u2 from block 2 into block 1 keeps the parent-closure
        // property, so the formula value must not change.
        let g = fixtures::two_stage_treatment();
        let order = crate::graph::PlanOrder::new(&g, &["x1", "x2"]).unwrap();
        let q = PlanQuery::from_flags(&g, order, Some(vec![0, 1])).unwrap();
        let m = random_model(&g, 7, 2);
        let standard = m.g_formula(&q, &stage_blocks(&g, &q.order)).unwrap();
        let alt = m
            .g_formula(
                &q,
                &[
                    g.set_from_names(&["u1", "u2"]).unwrap(),
                    g.set_from_names(&["z"]).unwrap(),
                ],
            )
            .unwrap();
        assert!(standard.max_abs_diff(&alt, &g).unwrap() < 1e-12);
    }

    #[test]
    fn random_models_are_reproducible_and_positive() {
        let g = fixtures::two_stage_treatment();
        let a = random_model(&g, 42, 4);
        let b = random_model(&g, 42, 4);
        assert_eq!(a.cards(), b.cards());
        for id in g.node_ids() {
            assert_eq!(a.cpt(id).values(), b.cpt(id).values());
            for &v in a.cpt(id).values() {
                assert!((POSITIVITY_EPS - 1e-15..=1.0 - POSITIVITY_EPS + 1e-15).contains(&v));
            }
        }
        let c = random_model(&g, 43, 4);
        assert!(
            a.cards() != c.cards() || {
                let x = g.node_id("x1").unwrap();
                a.cpt(x).values() != c.cpt(x).values()
            }
        );
    }

    #[test]
    fn oversized_joint_is_refused() {
        let mut b = DiagramBuilder::new();
        for i in 0..25 {
            b = b.node(&format!("n{i}"), NodeKind::Covariate);
        }
        let g = b.build().unwrap();
        let tables = vec![vec![0.5, 0.5]; 25];
        let m = DiscreteModel::new(g, vec![2; 25], tables).unwrap();
        assert!(matches!(m.joint(), Err(Error::SearchSpaceExceeded(_))));
    }

    #[test]
    fn table_validation_catches_shape_and_sum_errors() {
        let g = fixtures::chain();
        let bad_shape =
            DiscreteModel::new(g.clone(), vec![2, 2], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(matches!(bad_shape, Err(Error::TableShape { .. })));
        let bad_sum = DiscreteModel::new(
            g.clone(),
            vec![2, 2],
            vec![vec![0.5, 0.5], vec![0.6, 0.6, 0.5, 0.5]],
        );
        assert!(matches!(bad_sum, Err(Error::RowSum { .. })));
        let bad_card = DiscreteModel::new(g, vec![2, 1], vec![vec![0.5, 0.5], vec![1.0, 1.0]]);
        assert!(matches!(bad_card, Err(Error::BadCardinality { .. })));
    }
}
