//! Crate-wide error type. Exit-code mapping for the CLI lives here too, so the
//! library and binary cannot drift apart.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // -- diagram construction ------------------------------------------------
    #[error("node `{0}` declared twice")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid node name `{0}`: names must match [a-z][a-z0-9_]*")]
    InvalidName(String),
    #[error("edge {0} -> {1} declared twice")]
    DuplicateEdge(String, String),
    #[error("edge {0} -> {0} is a self-loop")]
    SelfLoop(String),
    #[error("diagram contains a directed cycle through `{0}`")]
    Cycle(String),
    #[error("latent node `{0}` cannot be an outcome")]
    LatentOutcome(String),
    #[error("node `{0}` is not a covariate and cannot be an outcome")]
    NonCovariateOutcome(String),

    // -- queries -------------------------------------------------------------
    #[error("separation query sides overlap: {0}")]
    OverlappingQuery(String),
    #[error("node `{0}` is not a control")]
    NotAControl(String),
    #[error("node `{0}` is not a covariate")]
    NotACovariate(String),
    #[error("control `{0}` appears twice in the plan order")]
    DuplicateControl(String),
    #[error("plan order omits control `{0}`")]
    PlanIncomplete(String),
    #[error("plan order lists `{0}` before `{1}`, but `{0}` is a descendant of `{1}`")]
    InconsistentOrder(String, String),
    #[error("stage index {k} out of range 1..={n}")]
    StageOutOfRange { k: usize, n: usize },
    #[error("covariate sequence has {got} stages, plan has {expected}")]
    SequenceLength { expected: usize, got: usize },
    #[error("plan values missing (query carries no control assignment)")]
    MissingPlanValues,
    #[error("value {value} out of range for `{node}` (cardinality {card})")]
    ValueOutOfRange { node: String, value: u32, card: u32 },
    #[error("expression mentions latent node `{0}`")]
    LatentInExpression(String),
    #[error("set {moved} is not {expected} of the expression")]
    NotInExpression {
        moved: String,
        expected: &'static str,
    },
    #[error("outcome set is empty")]
    EmptyOutcome,

    // -- feasibility guards --------------------------------------------------
    #[error("search space too large: {0}")]
    SearchSpaceExceeded(String),

    // -- numeric models ------------------------------------------------------
    #[error("table for `{node}` has {got} entries, expected {expected}")]
    TableShape {
        node: String,
        expected: usize,
        got: usize,
    },
    #[error("table row {row} of `{node}` sums to {sum}, not 1")]
    RowSum { node: String, row: usize, sum: f64 },
    #[error("negative probability in table for `{0}`")]
    NegativeProbability(String),
    #[error("cardinality {card} for `{node}` is invalid (need at least 2)")]
    BadCardinality { node: String, card: u32 },
    #[error("node `{0}` has no table (tables must cover every node or none)")]
    MissingTable(String),
    #[error("conditioning event has zero probability: factor {factor} at {event}")]
    PositivityViolation { factor: String, event: String },
    #[error("estimand variable `{0}` is neither summed, an outcome, nor a plan control")]
    UnboundVariable(String),
    #[error("distribution scope does not cover `{0}`")]
    ScopeMissing(String),
    #[error("internal cross-check failed: {0}")]
    CrossCheck(String),

    // -- text formats ----------------------------------------------------------
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Process exit code for the CLI: 1 for input/model errors, 3 when a
    /// feasibility guard refuses to search. (0 and 2 are verdicts, not errors.)
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SearchSpaceExceeded(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
