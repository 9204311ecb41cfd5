//! Identification of sequential control plans on causal diagrams.
//!
//! Given a diagram with controls, covariates, and latent background nodes,
//! this crate decides whether the interventional distribution of an outcome
//! under a plan do(x1), ..., do(xn) is a functional of the observational
//! joint over the non-latent nodes — and when it is, emits that functional in
//! closed form. Everything numeric is double-checked: estimands evaluate
//! against brute-force interventional oracles on small discrete models, and
//! the oracle itself computes every effect two independent ways.
//!
//! Module map:
//! - [`graph`]: diagrams, node kinds, mutilation, plan orders;
//! - [`dsep`]: d-separation and ancestral sets;
//! - [`identify`]: admissible covariate sequences and the three decision
//!   procedures (canonical, greedy-minimal, exhaustive);
//! - [`estimand`]: the emitted sum-of-products expression — build, render,
//!   parse, evaluate;
//! - [`docalc`]: intervention-calculus rewrite rules and reduction of the
//!   plan expression to observational form;
//! - [`discrete`]: exact inference on small discrete models, random model
//!   generation, the self-checking oracle;
//! - [`model`]: the text format for diagrams, plans, and tables;
//! - [`fixtures`]: small diagrams the tests and docs share.

#![forbid(unsafe_code)]

pub mod discrete;
pub mod docalc;
pub mod dsep;
pub mod error;
pub mod estimand;
pub mod fixtures;
pub mod graph;
pub mod identify;
pub mod model;

pub use error::{Error, Result};
