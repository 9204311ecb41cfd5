//! Text format for causal models: a diagram, an optional plan, and optional
//! probability tables, one directive per line.
//!
//! ```text
//! # A full-line comment. Blank lines are skipped too, even inside tables.
//! node x1 control
//! node z covariate card 3
//! node y covariate outcome
//! node u latent
//! edge x1 -> z
//! edge u -> z
//! plan x1=1
//! cpt x1 {
//! 0.4 0.6
//! }
//! cpt z | x1 u {
//! 0.2 0.3 0.5
//! 0.6 0.2 0.2
//! 0.5 0.1 0.4
//! 0.3 0.3 0.4
//! }
//! cpt u {
//! 0.7 0.3
//! }
//! ```
//!
//! Rules, beyond what the example shows:
//!
//! - `node <name> <control|covariate|latent>` takes optional `outcome` and
//!   `card <n>` suffixes in either order; cardinality defaults to 2.
//! - Nodes must be declared before anything references them, so every
//!   reference error can point at a line and column (1-based, byte offsets).
//! - `plan` lists every control once, either all with values (`x1=1 x2=0`)
//!   or all bare (`x1 x2`); at most one `plan` line per file.
//! - A `cpt` header names the node's parents in declaration order (omitting
//!   `| <parents>` entirely for a parentless node) and ends with `{`. Each
//!   row carries one probability per value of the node; rows are ordered by
//!   parent configuration with the last parent cycling fastest. The closing
//!   `}` stands alone. Tables must cover every node or be absent altogether.
//! - A diagram printed via [`CausalDiagram`]'s `Display` parses back here.

use crate::discrete::DiscreteModel;
use crate::error::{Error, Result};
use crate::graph::{CausalDiagram, DiagramBuilder, NodeKind, PlanOrder};

/// Everything a model file can carry.
#[derive(Debug)]
pub struct ModelFile {
    pub diagram: CausalDiagram,
    /// Present when the file has `cpt` blocks (which must cover every node).
    pub model: Option<DiscreteModel>,
    /// Present when the file has a `plan` line.
    pub plan: Option<ParsedPlan>,
}

/// A `plan` line: the control order plus, when given, one value per control.
#[derive(Debug)]
pub struct ParsedPlan {
    pub order: PlanOrder,
    pub values: Option<Vec<u32>>,
}

struct NodeLine {
    name: String,
    kind: NodeKind,
    outcome: bool,
    card: u32,
}

struct CptBlock {
    line: usize,
    node: String,
    parents: Vec<String>,
    /// One entry per row: the row's line number and its probabilities.
    rows: Vec<(usize, Vec<f64>)>,
}

/// Whitespace-separated tokens of one line with their 1-based byte columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        out.push((start + 1, &line[start..i]));
    }
    out
}

/// Column just past the last token, for "something is missing here" errors.
fn line_end(line: &str) -> usize {
    line.trim_end().len() + 1
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let mut nodes: Vec<NodeLine> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut plan: Option<Vec<(String, Option<u32>)>> = None;
    let mut cpts: Vec<CptBlock> = Vec::new();
    let mut open: Option<CptBlock> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let known = |name: &str| nodes.iter().any(|n| n.name == name);

        // Inside a table: rows of probabilities until the closing brace.
        if let Some(block) = open.as_mut() {
            if trimmed == "}" {
                cpts.push(open.take().unwrap());
                continue;
            }
            let mut row = Vec::new();
            for (col, t) in tokens(raw) {
                match t.parse::<f64>() {
                    Ok(v) => row.push(v),
                    Err(_) => {
                        return Err(Error::parse(
                            line,
                            col,
                            format!("expected a probability, found `{t}`"),
                        ))
                    }
                }
            }
            block.rows.push((line, row));
            continue;
        }

        let toks = tokens(raw);
        match toks[0].1 {
            "node" => {
                if toks.len() < 3 {
                    return Err(Error::parse(
                        line,
                        line_end(raw),
                        "expected `node <name> <kind>`",
                    ));
                }
                let (ncol, name) = toks[1];
                if known(name) {
                    return Err(Error::parse(
                        line,
                        ncol,
                        format!("node `{name}` declared twice"),
                    ));
                }
                let kind = match toks[2].1 {
                    "control" => NodeKind::Control,
                    "covariate" => NodeKind::Covariate,
                    "latent" => NodeKind::Latent,
                    other => {
                        return Err(Error::parse(
                            line,
                            toks[2].0,
                            format!(
                                "unknown node kind `{other}` (want control, covariate, or latent)"
                            ),
                        ))
                    }
                };
                let mut outcome = false;
                let mut card = 2u32;
                let mut rest = toks[3..].iter();
                while let Some(&(col, t)) = rest.next() {
                    match t {
                        "outcome" if !outcome => {
                            if kind == NodeKind::Latent {
                                return Err(Error::LatentOutcome(name.into()));
                            }
                            if kind != NodeKind::Covariate {
                                return Err(Error::NonCovariateOutcome(name.into()));
                            }
                            outcome = true;
                        }
                        "card" => {
                            let Some(&(vcol, v)) = rest.next() else {
                                return Err(Error::parse(line, col, "`card` needs a number"));
                            };
                            card = match v.parse::<u32>() {
                                Ok(c) if c >= 2 => c,
                                _ => {
                                    return Err(Error::parse(
                                        line,
                                        vcol,
                                        format!(
                                        "invalid cardinality `{v}` (need an integer of at least 2)"
                                    ),
                                    ))
                                }
                            };
                        }
                        other => {
                            return Err(Error::parse(
                                line,
                                col,
                                format!("unexpected token `{other}` in a node declaration"),
                            ))
                        }
                    }
                }
                nodes.push(NodeLine {
                    name: name.into(),
                    kind,
                    outcome,
                    card,
                });
            }
            "edge" => {
                if toks.len() != 4 || toks[2].1 != "->" {
                    return Err(Error::parse(
                        line,
                        line_end(raw),
                        "expected `edge <from> -> <to>`",
                    ));
                }
                for &(col, name) in [&toks[1], &toks[3]] {
                    if !known(name) {
                        return Err(Error::parse(line, col, format!("unknown node `{name}`")));
                    }
                }
                edges.push((toks[1].1.into(), toks[3].1.into()));
            }
            "plan" => {
                if plan.is_some() {
                    return Err(Error::parse(line, toks[0].0, "plan declared twice"));
                }
                let mut items = Vec::new();
                for &(col, t) in &toks[1..] {
                    let (name, value) = match t.split_once('=') {
                        None => (t, None),
                        Some((n, v)) => match v.parse::<u32>() {
                            Ok(v) => (n, Some(v)),
                            Err(_) => {
                                return Err(Error::parse(
                                    line,
                                    col + n.len() + 1,
                                    format!("invalid plan value `{v}`"),
                                ))
                            }
                        },
                    };
                    if !known(name) {
                        return Err(Error::parse(line, col, format!("unknown node `{name}`")));
                    }
                    items.push((name.to_string(), value));
                }
                if items.iter().any(|(_, v)| v.is_some()) {
                    if let Some(&(col, t)) = toks[1..].iter().find(|(_, t)| !t.contains('=')) {
                        return Err(Error::parse(
                            line,
                            col,
                            format!("plan mixes valued and bare controls at `{t}`"),
                        ));
                    }
                }
                plan = Some(items);
            }
            "cpt" => {
                if toks.len() < 3 || toks.last().unwrap().1 != "{" {
                    return Err(Error::parse(
                        line,
                        line_end(raw),
                        "expected `cpt <node> [| <parents>] {`",
                    ));
                }
                let (ncol, name) = toks[1];
                if !known(name) {
                    return Err(Error::parse(line, ncol, format!("unknown node `{name}`")));
                }
                if cpts.iter().any(|c| c.node == name) {
                    return Err(Error::parse(
                        line,
                        ncol,
                        format!("table for `{name}` declared twice"),
                    ));
                }
                let mut parents = Vec::new();
                let body = &toks[2..toks.len() - 1];
                if !body.is_empty() {
                    if body[0].1 != "|" {
                        return Err(Error::parse(
                            line,
                            body[0].0,
                            "expected `|` before the parent list",
                        ));
                    }
                    for &(col, p) in &body[1..] {
                        if !known(p) {
                            return Err(Error::parse(line, col, format!("unknown node `{p}`")));
                        }
                        parents.push(p.to_string());
                    }
                }
                open = Some(CptBlock {
                    line,
                    node: name.into(),
                    parents,
                    rows: Vec::new(),
                });
            }
            other => {
                return Err(Error::parse(
                    line,
                    toks[0].0,
                    format!("unknown directive `{other}`"),
                ));
            }
        }
    }
    if let Some(block) = open {
        return Err(Error::parse(
            block.line,
            1,
            format!("table for `{}` is never closed with `}}`", block.node),
        ));
    }

    let mut builder = DiagramBuilder::new();
    for n in &nodes {
        builder = if n.outcome {
            builder.outcome(&n.name)
        } else {
            builder.node(&n.name, n.kind)
        };
    }
    for (u, v) in &edges {
        builder = builder.edge(u, v);
    }
    let diagram = builder.build()?;
    let cards: Vec<u32> = nodes.iter().map(|n| n.card).collect();

    let plan = match plan {
        None => None,
        Some(items) => {
            let ids = items
                .iter()
                .map(|(n, _)| diagram.resolve(n))
                .collect::<Result<Vec<_>>>()?;
            let order = PlanOrder::from_ids(&diagram, ids)?;
            let values = if !items.is_empty() && items.iter().all(|(_, v)| v.is_some()) {
                Some(items.iter().map(|(_, v)| v.unwrap()).collect())
            } else {
                None
            };
            Some(ParsedPlan { order, values })
        }
    };

    let model = if cpts.is_empty() {
        None
    } else {
        let mut tables: Vec<Option<Vec<f64>>> = vec![None; diagram.node_count()];
        for block in &cpts {
            let id = diagram.resolve(&block.node)?;
            let expected: Vec<&str> = diagram
                .parents(id)
                .iter()
                .map(|&p| diagram.name(p))
                .collect();
            if expected != block.parents.iter().map(String::as_str).collect::<Vec<_>>() {
                let want = if expected.is_empty() {
                    "no parents".to_string()
                } else {
                    format!("parents `{}`", expected.join(" "))
                };
                return Err(Error::parse(
                    block.line,
                    1,
                    format!(
                        "table for `{}` must list {} (declaration order)",
                        block.node, want
                    ),
                ));
            }
            let card = cards[id.index()] as usize;
            let mut flat = Vec::new();
            for (row_line, row) in &block.rows {
                if row.len() != card {
                    return Err(Error::parse(
                        *row_line,
                        1,
                        format!("row has {} entries, expected {}", row.len(), card),
                    ));
                }
                flat.extend_from_slice(row);
            }
            tables[id.index()] = Some(flat);
        }
        for id in diagram.node_ids() {
            if tables[id.index()].is_none() {
                return Err(Error::MissingTable(diagram.name(id).into()));
            }
        }
        let tables = tables.into_iter().map(Option::unwrap).collect();
        Some(DiscreteModel::new(diagram.clone(), cards, tables)?)
    };

    Ok(ModelFile {
        diagram,
        model,
        plan,
    })
}
