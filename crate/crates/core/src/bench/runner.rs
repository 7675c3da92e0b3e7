//! Agent comparison over the fixture suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::datagen::gen_data;
use super::fixtures::{fixtures, Fixture};
use crate::agents::{egg_loop_all, run_episode, EggConfig, Policy};
use crate::env::{Env, EnvConfig};
use crate::extract::{ilp_extract, ExtractResult, DEFAULT_ILP_CAP};
use crate::ra::{interpret, parse_sql, Catalog, Database, RaExpr, Relation};

/// Bumped whenever the CSV columns change.
pub const CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Agent {
    Egg,
    Heuristic,
    Random,
}

impl Agent {
    pub const ALL: [Agent; 3] = [Agent::Egg, Agent::Heuristic, Agent::Random];

    pub fn name(self) -> &'static str {
        match self {
            Agent::Egg => "egg",
            Agent::Heuristic => "heuristic",
            Agent::Random => "random",
        }
    }

    pub fn from_name(s: &str) -> Option<Agent> {
        Agent::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub suite: String,
    pub queries: Vec<Fixture>,
    pub seeds: usize,
    pub rollouts: usize,
    pub node_limit: usize,
    pub horizon: usize,
    pub max_sweeps: usize,
    pub agents: Vec<Agent>,
    /// Orders rows of the generated database.
    pub scale: usize,
    pub data_seed: u64,
    /// Time budget of each exact extraction.
    pub ilp_budget: Duration,
    /// Exploration rate of the last heuristic rollout; rollout `r` of `R`
    /// explores with probability `explore · r / (R − 1)`.
    pub explore: f64,
}

impl BenchSpec {
    pub fn mini() -> BenchSpec {
        BenchSpec {
            suite: "mini".into(),
            queries: fixtures().to_vec(),
            seeds: 5,
            rollouts: 100,
            node_limit: 1000,
            horizon: 200,
            max_sweeps: 30,
            agents: Agent::ALL.to_vec(),
            scale: 1000,
            data_seed: 0,
            ilp_budget: Duration::from_secs(2),
            explore: 1.0,
        }
    }

    fn env_config(&self, seed: u64) -> EnvConfig {
        EnvConfig {
            node_limit: self.node_limit,
            horizon: self.horizon,
            seed,
            ..EnvConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equivalence {
    Pass,
    Fail,
    /// The query is outside the supported SQL subset.
    Unsupported,
    Error,
}

impl Equivalence {
    pub fn name(self) -> &'static str {
        match self {
            Equivalence::Pass => "pass",
            Equivalence::Fail => "fail",
            Equivalence::Unsupported => "unsupported",
            Equivalence::Error => "error",
        }
    }
}

/// One (query, agent, seed) cell. Costs are NaN when the cell failed.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub query: String,
    pub agent: Agent,
    pub seed: u64,
    pub input_cost: f64,
    pub best_cost: f64,
    pub median_cost: f64,
    pub max_cost: f64,
    /// Cost of rollout 0, which for the heuristic agent explores nothing.
    pub first_cost: f64,
    /// Node count of the graph the best plan came from.
    pub nodes: usize,
    pub max_nodes: usize,
    /// True if every exact extraction of the cell finished in budget.
    pub ilp_optimal: bool,
    pub plan_ms: f64,
    pub exec_ms: f64,
    pub result_rows: usize,
    pub equivalence: Equivalence,
    pub plan: Option<RaExpr>,
    pub error: String,
}

impl BenchRow {
    fn failed(query: &str, agent: Agent, seed: u64, equivalence: Equivalence, error: String) -> BenchRow {
        BenchRow {
            query: query.into(),
            agent,
            seed,
            input_cost: f64::NAN,
            best_cost: f64::NAN,
            median_cost: f64::NAN,
            max_cost: f64::NAN,
            first_cost: f64::NAN,
            nodes: 0,
            max_nodes: 0,
            ilp_optimal: false,
            plan_ms: 0.0,
            exec_ms: 0.0,
            result_rows: 0,
            equivalence,
            plan: None,
            error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub suite: String,
    pub rows: Vec<BenchRow>,
}

/// Upper median for even counts, so the value is always an observed cost.
fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn rollout_seed(seed: u64, rollout: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ rollout as u64
}

struct Outcome {
    extraction: ExtractResult,
    nodes: usize,
}

fn run_rollout(
    query: &RaExpr,
    cat: &Arc<Catalog>,
    spec: &BenchSpec,
    agent: Agent,
    seed: u64,
    rollout: usize,
) -> Result<Outcome, String> {
    let mut env = Env::new(query, cat.clone(), spec.env_config(seed)).map_err(|e| e.to_string())?;
    let policy = match (agent, rollout) {
        (Agent::Random, _) => Policy::Random,
        (_, 0) => Policy::Heuristic,
        _ => Policy::Explore(spec.explore * rollout as f64 / (spec.rollouts.max(2) - 1) as f64),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(seed, rollout));
    run_episode(&mut env, policy, &mut rng).map_err(|e| e.to_string())?;
    let extraction =
        ilp_extract(env.graph(), env.root(), spec.ilp_budget, DEFAULT_ILP_CAP).map_err(|e| e.to_string())?;
    Ok(Outcome {
        extraction,
        nodes: env.graph().node_count(),
    })
}

fn run_egg(query: &RaExpr, cat: &Arc<Catalog>, spec: &BenchSpec) -> Result<Outcome, String> {
    let cfg = EggConfig {
        node_limit: spec.node_limit,
        max_sweeps: spec.max_sweeps,
    };
    let r = egg_loop_all(query, cat.clone(), &cfg).map_err(|e| e.to_string())?;
    let root = r.graph.find(r.extraction.root);
    let extraction = ilp_extract(&r.graph, root, spec.ilp_budget, DEFAULT_ILP_CAP).map_err(|e| e.to_string())?;
    Ok(Outcome {
        extraction,
        nodes: r.graph.node_count(),
    })
}

/// Runs every rollout of one cell and fills in the cost statistics.
fn run_cell(query: &RaExpr, cat: &Arc<Catalog>, spec: &BenchSpec, agent: Agent, seed: u64, row: &mut BenchRow) {
    let start = Instant::now();
    let outcomes: Vec<Result<Outcome, String>> = match agent {
        Agent::Egg => vec![run_egg(query, cat, spec)],
        _ => (0..spec.rollouts.max(1))
            .into_par_iter()
            .map(|r| run_rollout(query, cat, spec, agent, seed, r))
            .collect(),
    };
    row.plan_ms = start.elapsed().as_secs_f64() * 1e3 / outcomes.len() as f64;
    let mut ok = Vec::new();
    for o in outcomes {
        match o {
            Ok(o) => ok.push(o),
            Err(e) => {
                row.equivalence = Equivalence::Error;
                row.error = e;
                return;
            }
        }
    }
    let mut costs: Vec<f64> = ok.iter().map(|o| o.extraction.total_cost).collect();
    row.first_cost = costs[0];
    let best = ok
        .iter()
        .min_by(|a, b| a.extraction.total_cost.total_cmp(&b.extraction.total_cost))
        .expect("at least one rollout");
    row.best_cost = best.extraction.total_cost;
    row.nodes = best.nodes;
    row.max_nodes = ok.iter().map(|o| o.nodes).max().unwrap_or(0);
    row.ilp_optimal = ok.iter().all(|o| o.extraction.optimal);
    row.max_cost = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.median_cost = median(&mut costs);
    row.plan = Some(best.extraction.expr.clone());
}

fn check(plan: &RaExpr, expected: &Relation, db: &Database, row: &mut BenchRow) {
    let start = Instant::now();
    match interpret(plan, db) {
        Ok(rel) => {
            row.exec_ms = start.elapsed().as_secs_f64() * 1e3;
            row.result_rows = rel.len();
            if rel.bag_eq(expected) {
                row.equivalence = Equivalence::Pass;
            } else {
                row.equivalence = Equivalence::Fail;
                row.error = format!("{} rows, expected {}", rel.len(), expected.len());
            }
        }
        Err(e) => {
            row.equivalence = Equivalence::Error;
            row.error = e.to_string();
        }
    }
}

/// Runs every (query, agent, seed) cell. Failures are recorded in their
/// row and do not stop the run. Egg has no randomness, so it runs once
/// per query and its row is repeated for every seed.
pub fn run_bench(spec: &BenchSpec) -> BenchReport {
    let (cat, db) = gen_data(spec.scale, spec.data_seed);
    let cat = Arc::new(cat);
    let mut rows = Vec::new();
    for fx in &spec.queries {
        let query = match parse_sql(fx.sql, &cat) {
            Ok(q) => q,
            Err(e) => {
                let eq = if matches!(e, crate::ra::ParseError::Unsupported(_)) {
                    Equivalence::Unsupported
                } else {
                    Equivalence::Error
                };
                for &agent in &spec.agents {
                    for seed in 0..spec.seeds as u64 {
                        rows.push(BenchRow::failed(fx.name, agent, seed, eq, e.to_string()));
                    }
                }
                continue;
            }
        };
        let input_cost = Env::new(&query, cat.clone(), spec.env_config(0)).map(|e| e.cost());
        let expected = interpret(&query, &db);
        for &agent in &spec.agents {
            let mut egg_row: Option<BenchRow> = None;
            for seed in 0..spec.seeds as u64 {
                if let Some(r) = &egg_row {
                    rows.push(BenchRow { seed, ..r.clone() });
                    continue;
                }
                log::info!("bench {} {} seed {seed}", fx.name, agent.name());
                let mut row = BenchRow::failed(fx.name, agent, seed, Equivalence::Error, String::new());
                match (&input_cost, &expected) {
                    (Ok(c), Ok(expected)) => {
                        row.input_cost = *c;
                        run_cell(&query, &cat, spec, agent, seed, &mut row);
                        if let Some(plan) = row.plan.clone() {
                            check(&plan, expected, &db, &mut row);
                        }
                    }
                    (Err(e), _) => row.error = e.to_string(),
                    (_, Err(e)) => row.error = format!("original query: {e}"),
                }
                if agent == Agent::Egg {
                    egg_row = Some(row.clone());
                }
                rows.push(row);
            }
        }
    }
    BenchReport {
        suite: spec.suite.clone(),
        rows,
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

impl BenchReport {
    /// Writes one CSV row per cell. Without `timings` the output depends
    /// only on the spec.
    pub fn write_csv<W: Write>(&self, w: W, timings: bool) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "version", "suite", "query", "agent", "seed", "input_cost", "best_cost", "median_cost", "max_cost",
            "first_cost", "nodes", "max_nodes", "ilp_optimal", "result_rows", "equivalence", "error",
        ];
        if timings {
            header.extend(["plan_ms", "exec_ms"]);
        }
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                CSV_VERSION.to_string(),
                self.suite.clone(),
                r.query.clone(),
                r.agent.name().to_string(),
                r.seed.to_string(),
                num(r.input_cost),
                num(r.best_cost),
                num(r.median_cost),
                num(r.max_cost),
                num(r.first_cost),
                r.nodes.to_string(),
                r.max_nodes.to_string(),
                r.ilp_optimal.to_string(),
                r.result_rows.to_string(),
                r.equivalence.name().to_string(),
                r.error.clone(),
            ];
            if timings {
                rec.push(format!("{:.3}", r.plan_ms));
                rec.push(format!("{:.3}", r.exec_ms));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    fn cells<'a>(&'a self, query: &'a str, agent: Agent) -> impl Iterator<Item = &'a BenchRow> {
        self.rows
            .iter()
            .filter(move |r| r.query == query && r.agent == agent && !r.best_cost.is_nan())
    }

    /// Median over seeds of each seed's best cost.
    pub fn median_best(&self, query: &str, agent: Agent) -> Option<f64> {
        let mut xs: Vec<f64> = self.cells(query, agent).map(|r| r.best_cost).collect();
        (!xs.is_empty()).then(|| median(&mut xs))
    }

    /// Median over seeds of each seed's median rollout cost.
    pub fn median_median(&self, query: &str, agent: Agent) -> Option<f64> {
        let mut xs: Vec<f64> = self.cells(query, agent).map(|r| r.median_cost).collect();
        (!xs.is_empty()).then(|| median(&mut xs))
    }

    /// `(egg − agent) / egg` on median best costs, floored at −1.
    pub fn relative_improvement(&self, query: &str, agent: Agent) -> Option<f64> {
        let egg = self.median_best(query, Agent::Egg)?;
        let x = self.median_best(query, agent)?;
        Some(if egg > 0.0 { ((egg - x) / egg).max(-1.0) } else { 0.0 })
    }

    pub fn summary(&self) -> String {
        let mut queries: Vec<&str> = Vec::new();
        let mut agents: BTreeMap<Agent, ()> = BTreeMap::new();
        for r in &self.rows {
            if !queries.contains(&r.query.as_str()) {
                queries.push(&r.query);
            }
            agents.insert(r.agent, ());
        }
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:<10} {:>14} {:>14} {:>10} {:>7}",
            "query", "agent", "best (median)", "median", "vs egg", "equiv"
        );
        for q in queries {
            for &a in agents.keys() {
                let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.query == q && r.agent == a).collect();
                let passed = rows.iter().filter(|r| r.equivalence == Equivalence::Pass).count();
                let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.0}"));
                let rel = self
                    .relative_improvement(q, a)
                    .map_or("-".to_string(), |v| format!("{:+.1}%", v * 100.0));
                let equiv = match rows.first().map(|r| r.equivalence) {
                    Some(Equivalence::Unsupported) => "unsup.".to_string(),
                    _ => format!("{passed}/{}", rows.len()),
                };
                let _ = writeln!(
                    s,
                    "{:<20} {:<10} {:>14} {:>14} {:>10} {:>7}",
                    q,
                    a.name(),
                    fmt(self.median_best(q, a)),
                    fmt(self.median_median(q, a)),
                    rel,
                    equiv
                );
            }
        }
        s
    }
}
