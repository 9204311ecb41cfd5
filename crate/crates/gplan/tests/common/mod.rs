//! Shared helpers for the integration suites: seeded random diagrams, random
//! set sampling, and a numeric checker for do-calculus rewrites.

#![allow(dead_code)] // each integration target compiles its own copy

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use gplan::discrete::{DiscreteModel, Distribution};
use gplan::docalc::{InterventionalExpr, Rule};
use gplan::graph::{
    consistent_orderings, CausalDiagram, DiagramBuilder, NodeId, NodeKind, NodeSet, PlanOrder,
};
use gplan::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random diagram with 1..=3 controls, 1..=3 plain covariates plus the
/// outcome y, and 0..=3 latents (at most 9 nodes). Edges are sampled over a
/// random topological order in which latents come first (so they stay root
/// causes, never effects) and y comes last (the outcome is a sink).
pub fn random_diagram(seed: u64) -> CausalDiagram {
    random_diagram_with(seed, false)
}

/// Same sampler, but the controls are additionally wired into a directed
/// chain x1 -> x2 -> ..., so every later control descends from every earlier
/// one and the declaration order is the single consistent ordering.
pub fn chained_controls_diagram(seed: u64) -> CausalDiagram {
    random_diagram_with(seed, true)
}

fn random_diagram_with(seed: u64, chain: bool) -> CausalDiagram {
    let mut rng = rng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    let nc = rng.gen_range(1..=3usize);
    let nz = rng.gen_range(1..=3usize);
    let nl = rng.gen_range(0..=3usize);
    let y = nc + nz; // index of the outcome in declaration order
    let total = nc + nz + 1 + nl;

    let mut kinds = Vec::new();
    let mut names = Vec::new();
    for i in 0..nc {
        names.push(format!("x{}", i + 1));
        kinds.push(NodeKind::Control);
    }
    for i in 0..nz {
        names.push(format!("z{}", i + 1));
        kinds.push(NodeKind::Covariate);
    }
    names.push("y".into());
    kinds.push(NodeKind::Covariate);
    for i in 0..nl {
        names.push(format!("u{}", i + 1));
        kinds.push(NodeKind::Latent);
    }

    // Topological ranks: latents 0..nl, controls and covariates shuffled in
    // the middle, y on top.
    let mut middle: Vec<usize> = (0..nc + nz).collect();
    middle.shuffle(&mut rng);
    let mut rank = vec![0usize; total];
    for (pos, &node) in middle.iter().enumerate() {
        rank[node] = nl + pos;
    }
    rank[y] = nl + nc + nz;
    for l in 0..nl {
        rank[y + 1 + l] = l;
    }
    if chain {
        // Reassign the controls' ranks in declaration order so the forced
        // chain edges respect the topological order.
        let mut slots: Vec<usize> = (0..nc).map(|i| rank[i]).collect();
        slots.sort_unstable();
        for (i, slot) in slots.into_iter().enumerate() {
            rank[i] = slot;
        }
    }

    let mut edges: Vec<(usize, usize)> = Vec::new();
    for from in 0..total {
        for to in 0..total {
            if rank[from] < rank[to] && kinds[to] != NodeKind::Latent && rng.gen_bool(0.4) {
                edges.push((from, to));
            }
        }
    }
    if chain {
        for i in 1..nc {
            if !edges.contains(&(i - 1, i)) {
                edges.push((i - 1, i));
            }
        }
    }

    let mut builder = DiagramBuilder::new();
    for i in 0..total {
        builder = if i == y {
            builder.outcome("y")
        } else {
            builder.node(&names[i], kinds[i])
        };
    }
    for (from, to) in edges {
        builder = builder.edge(&names[from], &names[to]);
    }
    builder
        .build()
        .expect("sampled edges follow a topological order")
}

/// A uniformly chosen consistent ordering of the diagram's controls.
pub fn random_order(g: &CausalDiagram, rng: &mut ChaCha8Rng) -> PlanOrder {
    let all = consistent_orderings(g);
    all[rng.gen_range(0..all.len())].clone()
}

/// Keep each member of `pool` with probability `p`.
pub fn random_subset(pool: &NodeSet, p: f64, rng: &mut ChaCha8Rng) -> NodeSet {
    pool.iter().filter(|_| rng.gen_bool(p)).collect()
}

/// Disjoint node groups of (at most) the requested sizes, drawn without
/// replacement from the whole node set. Small diagrams yield short groups.
pub fn disjoint_groups(g: &CausalDiagram, sizes: &[usize], rng: &mut ChaCha8Rng) -> Vec<NodeSet> {
    let mut pool: Vec<NodeId> = g.node_ids().collect();
    pool.shuffle(rng);
    let mut it = pool.into_iter();
    sizes
        .iter()
        .map(|&s| (0..s).filter_map(|_| it.next()).collect())
        .collect()
}

/// Every assignment of the given variables, odometer style (last moves
/// fastest), written into a full-length configuration vector (other slots 0).
pub fn configs_over(g: &CausalDiagram, vars: &[NodeId], model: &DiscreteModel) -> Vec<Vec<u32>> {
    let cards: Vec<u32> = vars.iter().map(|&v| model.card(v)).collect();
    let count: usize = cards.iter().map(|&c| c as usize).product();
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut full = vec![0u32; g.node_count()];
        let mut rest = idx;
        for i in (0..vars.len()).rev() {
            full[vars[i].index()] = (rest % cards[i] as usize) as u32;
            rest /= cards[i] as usize;
        }
        out.push(full);
    }
    out
}

fn prob_at(d: &Distribution, full: &[u32]) -> f64 {
    let local: Vec<u32> = d.scope().iter().map(|&v| full[v.index()]).collect();
    d.prob(&local)
}

/// The value of `P(target | do(interventions), observations)` with every
/// variable read from `full`, a configuration vector indexed by node id.
pub fn expr_value(model: &DiscreteModel, e: &InterventionalExpr, full: &[u32]) -> Result<f64> {
    let assign: Vec<(NodeId, u32)> = e
        .interventions
        .iter()
        .map(|v| (v, full[v.index()]))
        .collect();
    let post = model.intervene(&assign)?;
    let num = prob_at(&post.marginal(&e.target.union(&e.observations)), full);
    let den = prob_at(&post.marginal(&e.observations), full);
    debug_assert!(
        den > 0.0,
        "positive models cannot produce zero conditioning events"
    );
    Ok(num / den)
}

/// The expression an accepted rewrite claims equal to `e`: rule 1 drops the
/// moved observations, rule 2 turns moved actions into observations (or the
/// reverse), rule 3 drops the moved actions.
pub fn rewritten(e: &InterventionalExpr, rule: Rule, moved: &NodeSet) -> InterventionalExpr {
    let mut out = e.clone();
    match rule {
        Rule::ObservationChange => {
            assert!(moved.is_subset(&e.observations));
            out.observations = out.observations.difference(moved);
        }
        Rule::ActionExchange => {
            if moved.is_subset(&e.interventions) {
                out.interventions = out.interventions.difference(moved);
                out.observations = out.observations.union(moved);
            } else {
                assert!(moved.is_subset(&e.observations));
                out.observations = out.observations.difference(moved);
                out.interventions = out.interventions.union(moved);
            }
        }
        Rule::ActionRemoval => {
            assert!(moved.is_subset(&e.interventions));
            out.interventions = out.interventions.difference(moved);
        }
    }
    out
}

/// Worst deviation of `a` and `b` over all assignments of the variables
/// either expression mentions.
pub fn max_rewrite_gap(
    g: &CausalDiagram,
    model: &DiscreteModel,
    a: &InterventionalExpr,
    b: &InterventionalExpr,
) -> Result<f64> {
    let mentioned: NodeSet = a
        .target
        .union(&a.interventions)
        .union(&a.observations)
        .union(&b.interventions)
        .union(&b.observations);
    let vars: Vec<NodeId> = mentioned.iter().collect();
    let mut worst = 0.0f64;
    for full in configs_over(g, &vars, model) {
        let va = expr_value(model, a, &full)?;
        let vb = expr_value(model, b, &full)?;
        worst = worst.max((va - vb).abs());
    }
    Ok(worst)
}
