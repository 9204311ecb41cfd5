//! Built-in diagrams. These small graphs pin down the behaviors the test
//! suites check: a two-stage treatment plan with latent confounding, a
//! confounded single control with no usable covariate, a graph where eagerly
//! conditioning at stage 1 destroys stage 2, and a graph with two distinct
//! minimal adjustment sets.

use crate::graph::{CausalDiagram, DiagramBuilder, NodeKind};

/// Two controls x1, x2 with an intermediate covariate z, outcome y, and latent
/// confounders u1 (drives x1 and z) and u2 (drives z and y). The plan
/// (x1, x2) is identifiable with stage sets ({}, {z}).
pub fn two_stage_treatment() -> CausalDiagram {
    DiagramBuilder::new()
        .node("x1", NodeKind::Control)
        .node("z", NodeKind::Covariate)
        .node("x2", NodeKind::Control)
        .outcome("y")
        .node("u1", NodeKind::Latent)
        .node("u2", NodeKind::Latent)
        .edge("u1", "x1")
        .edge("u1", "z")
        .edge("x1", "z")
        .edge("u2", "z")
        .edge("u2", "y")
        .edge("x1", "x2")
        .edge("z", "x2")
        .edge("x2", "y")
        .edge("x1", "y")
        .build()
        .expect("fixture is valid")
}

/// One control confounded with the outcome by a latent: x <- u -> y, x -> y.
/// No covariate exists, so the effect of x on y is not identifiable.
pub fn bow() -> CausalDiagram {
    DiagramBuilder::new()
        .node("x", NodeKind::Control)
        .outcome("y")
        .node("u", NodeKind::Latent)
        .edge("u", "x")
        .edge("u", "y")
        .edge("x", "y")
        .build()
        .expect("fixture is valid")
}

/// Plain chain x -> y. Identifiable with the empty stage set.
pub fn chain() -> CausalDiagram {
    DiagramBuilder::new()
        .node("x", NodeKind::Control)
        .outcome("y")
        .edge("x", "y")
        .build()
        .expect("fixture is valid")
}

/// Conditioning too early backfires here: the empty sequence ({}, {}) is
/// admissible, and {w} alone is admissible at stage 1, yet once w enters the
/// conditioning set no stage-2 choice works — w is a collider between the
/// latent parents of x2 and y, so conditioning on it opens a path that only
/// latents could close.
pub fn premature_conditioning() -> CausalDiagram {
    DiagramBuilder::new()
        .node("x1", NodeKind::Control)
        .node("w", NodeKind::Covariate)
        .node("x2", NodeKind::Control)
        .outcome("y")
        .node("u1", NodeKind::Latent)
        .node("u2", NodeKind::Latent)
        .edge("x1", "x2")
        .edge("x2", "y")
        .edge("u1", "x2")
        .edge("u1", "w")
        .edge("u2", "w")
        .edge("u2", "y")
        .build()
        .expect("fixture is valid")
}

/// The order of setting the controls decides the verdict here. Neither
/// control descends from the other, so both orderings are consistent, but
/// the only covariate that screens x2's confounding with y — z, via
/// x2 <- u -> z -> y — is a descendant of x1. Setting x1 first leaves z
/// eligible at x2's stage; setting x2 first puts x1 in every stage's tail,
/// so z is eligible nowhere and the confounding cannot be blocked.
pub fn order_sensitive() -> CausalDiagram {
    DiagramBuilder::new()
        .node("x1", NodeKind::Control)
        .node("z", NodeKind::Covariate)
        .node("x2", NodeKind::Control)
        .outcome("y")
        .node("u", NodeKind::Latent)
        .edge("x1", "z")
        .edge("u", "z")
        .edge("u", "x2")
        .edge("z", "y")
        .edge("x2", "y")
        .build()
        .expect("fixture is valid")
}

/// Minimal adjustment sets need not be unique: the confounding path
/// x <- a -> b -> y can be blocked by {a} or by {b}, and both are minimal.
pub fn two_minimal_adjustments() -> CausalDiagram {
    DiagramBuilder::new()
        .node("x", NodeKind::Control)
        .node("a", NodeKind::Covariate)
        .node("b", NodeKind::Covariate)
        .outcome("y")
        .edge("a", "x")
        .edge("a", "b")
        .edge("b", "y")
        .edge("x", "y")
        .build()
        .expect("fixture is valid")
}
