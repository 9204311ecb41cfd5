//! Command-line front end. Every subcommand reads one model file, runs one
//! library operation, and prints one logical result per line, so output stays
//! easy to grep and to diff.
//!
//! Exit codes: 0 for success (including "separated: no" style verdicts),
//! 2 when a plan is not identifiable, 3 when a feasibility guard refuses to
//! search, and 1 for every input or model error.

use std::path::{Path, PathBuf};
use std::process::exit;

use clap::{Args, Parser, Subcommand};

use gplan::discrete::{random_model, DiscreteModel};
use gplan::docalc;
use gplan::dsep::{d_separated, SeparationQuery};
use gplan::estimand;
use gplan::graph::{
    build_g_star, consistent_orderings, CausalDiagram, Mutilation, NodeSet, PlanOrder,
};
use gplan::identify::{self, IdentificationResult, PlanQuery};
use gplan::model::{parse_model, ModelFile};
use gplan::{Error, Result};

/// Largest estimand-versus-oracle deviation `verify` accepts.
const VERIFY_TOL: f64 = 1e-9;

/// Decide whether a sequential plan is identifiable and estimate its effect.
#[derive(Parser)]
#[command(name = "gplan", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ModelArg {
    /// Model file (`node`/`edge`/`plan`/`cpt` lines).
    file: PathBuf,
    /// Override the file's plan: `x1=1,x2=0` fixes values, `x1,x2` leaves
    /// them open. With neither, the first consistent ordering is used.
    #[arg(long)]
    plan: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide identifiability; print the covariate sequence and estimand.
    Identify {
        #[command(flatten)]
        model: ModelArg,
        /// Report one verdict per consistent control ordering instead
        /// (exit 0 if any ordering is identifiable).
        #[arg(long)]
        all_orderings: bool,
    },
    /// Identify, then shrink each stage set to a minimal admissible one.
    Greedy {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Identify by searching every covariate sequence (small graphs only).
    Exhaustive {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Test one d-separation statement, e.g. `dsep m.model y / x2 / x1 z`.
    Dsep {
        /// Model file (`node`/`edge` lines; tables and plan are ignored).
        file: PathBuf,
        /// Node groups `<X..> / <Y..> [/ <Z..>]`, slashes as separators.
        #[arg(required = true, num_args = 1..)]
        query: Vec<String>,
        /// Comma-separated nodes whose incoming edges are cut first.
        #[arg(long)]
        bar: Option<String>,
        /// Comma-separated nodes whose outgoing edges are cut first.
        #[arg(long)]
        underline: Option<String>,
    },
    /// Evaluate the identified estimand on the file's own tables.
    Eval {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Print the plan's interventional outcome distribution by brute force.
    Oracle {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Check the estimand against the brute-force oracle numerically.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        /// Check this many random models (seeds 1..=N, random cardinalities)
        /// instead of the file's tables.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Rewrite the plan's interventional expression into observational form,
    /// printing each rule application.
    Reduce {
        #[command(flatten)]
        model: ModelArg,
        /// Move budget (default: twice the control-plus-covariate count).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Print the derived diagram that the ordering-invariance check runs on.
    Gstar {
        #[command(flatten)]
        model: ModelArg,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit code for usage errors is 2, which already means
            // "not identifiable" here; route all argument problems to 1.
            let _ = e.print();
            exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Identify {
            model,
            all_orderings: false,
        } => {
            let (file, q) = plan_query(&model)?;
            let g = &file.diagram;
            println!("plan: {}", q.order.render(g));
            Ok(report(g, &identify::g_identify(g, &q)?))
        }
        Cmd::Identify {
            model,
            all_orderings: true,
        } => {
            let (file, q) = plan_query(&model)?;
            let g = &file.diagram;
            let mut code = 2;
            for (order, result) in identify::identify_all_orderings(g, &q)? {
                println!("plan: {}", order.render(g));
                if report(g, &result) == 0 {
                    code = 0;
                }
            }
            Ok(code)
        }
        Cmd::Greedy { model } => {
            let (file, q) = plan_query(&model)?;
            let g = &file.diagram;
            println!("plan: {}", q.order.render(g));
            Ok(report(g, &identify::greedy_minimal_sequence(g, &q)?))
        }
        Cmd::Exhaustive { model } => {
            let (file, q) = plan_query(&model)?;
            let g = &file.diagram;
            println!("plan: {}", q.order.render(g));
            Ok(report(g, &identify::exhaustive_identify(g, &q)?))
        }
        Cmd::Dsep {
            file,
            query,
            bar,
            underline,
        } => {
            let g = load(&file)?.diagram;
            let mut groups: Vec<NodeSet> = vec![NodeSet::new()];
            for token in &query {
                if token == "/" {
                    groups.push(NodeSet::new());
                } else {
                    groups.last_mut().unwrap().insert(g.resolve(token)?);
                }
            }
            if groups.len() < 2 || groups.len() > 3 || groups[0].is_empty() || groups[1].is_empty()
            {
                return Err(Error::Usage(
                    "a d-separation query needs `<X..> / <Y..> [/ <Z..>]` with X and Y non-empty"
                        .into(),
                ));
            }
            let z = if groups.len() == 3 {
                groups.pop().unwrap()
            } else {
                NodeSet::new()
            };
            let y = groups.pop().unwrap();
            let x = groups.pop().unwrap();
            let m = Mutilation::new(
                node_list(&g, bar.as_deref())?,
                node_list(&g, underline.as_deref())?,
            );
            let q = SeparationQuery::new(x, y, z);
            let verdict = if d_separated(&g.apply(&m), &q)? {
                "separated"
            } else {
                "not separated"
            };
            println!("{} in {}: {}", q.render(&g), m.render(&g), verdict);
            Ok(0)
        }
        Cmd::Eval { model } => {
            let (file, q) = plan_query(&model)?;
            let g = file.diagram.clone();
            let tables = require_tables(file)?;
            match identify::g_identify(&g, &q)? {
                IdentificationResult::Identified { estimand: e, .. } => {
                    println!("estimand: {}", estimand::render(&g, &e));
                    let got = estimand::evaluate(&g, &e, &tables.observed_joint()?, &q)?;
                    print!("{}", got.render(&g));
                    Ok(0)
                }
                result => Ok(report(&g, &result)),
            }
        }
        Cmd::Oracle { model } => {
            let (file, q) = plan_query(&model)?;
            let g = file.diagram.clone();
            let tables = require_tables(file)?;
            print!("{}", tables.causal_effect(&q)?.render(&g));
            Ok(0)
        }
        Cmd::Verify { model, seeds } => {
            let (file, q) = plan_query(&model)?;
            let g = file.diagram.clone();
            let e = match identify::g_identify(&g, &q)? {
                IdentificationResult::Identified { estimand: e, .. } => e,
                result => return Ok(report(&g, &result)),
            };
            println!("estimand: {}", estimand::render(&g, &e));
            let mut worst = 0.0f64;
            match seeds {
                None => {
                    let tables = require_tables(file)?;
                    worst = check_once(&g, &tables, &e, &q)?;
                    println!("model: max diff {worst:.3e}");
                }
                Some(n) => {
                    for seed in 1..=n {
                        let tables = random_model(&g, seed, 3);
                        let diff = check_once(&g, &tables, &e, &q)?;
                        println!("seed {seed}: max diff {diff:.3e}");
                        worst = worst.max(diff);
                    }
                }
            }
            if worst > VERIFY_TOL {
                return Err(Error::CrossCheck(format!(
                    "estimand disagrees with the oracle by {worst:e}"
                )));
            }
            println!("ok: within {VERIFY_TOL:e}");
            Ok(0)
        }
        Cmd::Reduce { model, depth } => {
            let (file, q) = plan_query(&model)?;
            let g = &file.diagram;
            let expr = docalc::plan_expression(g, &q);
            println!("start: {}", expr.render(g));
            let depth = depth.unwrap_or_else(|| docalc::default_depth(g));
            match docalc::reduce(g, &expr, depth)? {
                Some(r) => println!("{}", r.render(g)),
                None => println!("exhausted: no observational form within {depth} moves"),
            }
            Ok(0)
        }
        Cmd::Gstar { model } => {
            let (file, q) = plan_query(&model)?;
            let seq = identify::w_sequence(&file.diagram, &q)?;
            print!("{}", build_g_star(&file.diagram, &q.order, seq.stages())?);
            Ok(0)
        }
    }
}

fn load(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read `{}`: {e}", path.display())))?;
    parse_model(&text)
}

/// Resolve the plan for a model argument: the `--plan` flag wins, then the
/// file's `plan` line, then the first consistent ordering with open values.
fn plan_query(arg: &ModelArg) -> Result<(ModelFile, PlanQuery)> {
    let file = load(&arg.file)?;
    let g = &file.diagram;
    let (order, values) = match &arg.plan {
        Some(text) => parse_plan_flag(g, text)?,
        None => match &file.plan {
            Some(p) => (p.order.clone(), p.values.clone()),
            None => {
                let order = consistent_orderings(g)
                    .into_iter()
                    .next()
                    .expect("an acyclic diagram always has a consistent ordering");
                (order, None)
            }
        },
    };
    let q = PlanQuery::from_flags(g, order, values)?;
    Ok((file, q))
}

fn parse_plan_flag(g: &CausalDiagram, text: &str) -> Result<(PlanOrder, Option<Vec<u32>>)> {
    let mut names = Vec::new();
    let mut values = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('=') {
            None => names.push(item),
            Some((name, v)) => {
                names.push(name);
                values.push(v.parse::<u32>().map_err(|_| {
                    Error::Usage(format!(
                        "invalid plan value in `{item}` (want `name=number`)"
                    ))
                })?);
            }
        }
    }
    if !values.is_empty() && values.len() != names.len() {
        return Err(Error::Usage(
            "a plan must value all of its controls or none".into(),
        ));
    }
    let ids = names
        .iter()
        .map(|n| g.resolve(n))
        .collect::<Result<Vec<_>>>()?;
    let order = PlanOrder::from_ids(g, ids)?;
    let values = if values.is_empty() {
        None
    } else {
        Some(values)
    };
    Ok((order, values))
}

fn node_list(g: &CausalDiagram, flag: Option<&str>) -> Result<NodeSet> {
    match flag {
        None => Ok(NodeSet::new()),
        Some(text) => text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|n| g.resolve(n))
            .collect(),
    }
}

fn require_tables(file: ModelFile) -> Result<DiscreteModel> {
    file.model
        .ok_or_else(|| Error::Usage("the model file has no `cpt` tables".into()))
}

fn check_once(
    g: &CausalDiagram,
    tables: &DiscreteModel,
    e: &estimand::Estimand,
    q: &PlanQuery,
) -> Result<f64> {
    let got = estimand::evaluate(g, e, &tables.observed_joint()?, q)?;
    got.max_abs_diff(&tables.causal_effect(q)?, g)
}

/// Shared tail of the identify-family subcommands; returns the exit code.
fn report(g: &CausalDiagram, result: &IdentificationResult) -> i32 {
    match result {
        IdentificationResult::Identified {
            sequence,
            estimand: e,
        } => {
            println!("sequence: {}", sequence.render(g));
            println!("estimand: {}", estimand::render(g, e));
            0
        }
        IdentificationResult::NotGIdentifiable {
            failing_stage,
            witness,
            graph,
        } => {
            println!(
                "not identifiable: stage {failing_stage}: {} fails in {}",
                witness.render(g),
                graph.render(g)
            );
            2
        }
    }
}
