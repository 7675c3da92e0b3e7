//! Baseline policies and the saturate-everything loop.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::egraph::{EGraph, EGraphError};
use crate::env::{Env, EnvError, RESET};
use crate::extract::{greedy_extract, ExtractResult};
use crate::ra::{Catalog, RaExpr};
use crate::rules::{apply_rule, catalog, RewriteRule};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("no action is applicable")]
    NoApplicableAction,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Uniform choice among the unmasked actions.
pub fn random_policy<R: Rng>(mask: &[bool], rng: &mut R) -> Result<usize, AgentError> {
    let open: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    open.choose(rng).copied().ok_or(AgentError::NoApplicableAction)
}

/// Same distribution as [`random_policy`] over the env's mask, but tests
/// actions in a random order and stops at the first applicable one.
pub fn random_action<R: Rng>(env: &Env, rng: &mut R) -> usize {
    let mut order: Vec<usize> = (0..RESET).collect();
    order.shuffle(rng);
    let rules = catalog();
    // Reset is always open; place it uniformly among the rules.
    let slot = rng.gen_range(0..=order.len());
    order.insert(slot, RESET);
    order
        .into_iter()
        .find(|&a| a == RESET || rules[a].is_applicable(env.graph()))
        .expect("reset is always applicable")
}

/// One-step lookahead: simulates every unmasked action on a copy of the
/// environment and takes the best reward, lowest index on ties.
pub fn heuristic_policy(env: &Env) -> Result<usize, AgentError> {
    let mut best: Option<(usize, f64)> = None;
    for (a, open) in env.mask().into_iter().enumerate() {
        if !open {
            continue;
        }
        let mut sim = env.clone();
        let (reward, _) = sim.advance(a)?;
        if best.is_none_or(|(_, r)| reward > r) {
            best = Some((a, reward));
        }
    }
    best.map(|(a, _)| a).ok_or(AgentError::NoApplicableAction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EggConfig {
    pub node_limit: usize,
    pub max_sweeps: usize,
}

impl Default for EggConfig {
    fn default() -> Self {
        EggConfig {
            node_limit: 1000,
            max_sweeps: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Saturated,
    NodeLimit,
    MaxSweeps,
}

/// State after one rule application.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub applications: usize,
    pub sweep: usize,
    pub rule: &'static str,
    /// Budgeted size, see [`EGraph::size`].
    pub size: usize,
    /// Live e-nodes; drops when a merge makes nodes identical.
    pub node_count: usize,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct EggResult {
    pub extraction: ExtractResult,
    pub graph: EGraph,
    pub trace: Vec<TracePoint>,
    pub stop: StopReason,
}

/// Applies `rules` in order, sweep after sweep, until a sweep changes
/// nothing, an application would exceed the node limit (that application
/// is rolled back), or `max_sweeps` sweeps ran.
pub fn egg_loop(
    query: &RaExpr,
    catalog_: Arc<Catalog>,
    rules: &[RewriteRule],
    cfg: &EggConfig,
) -> Result<EggResult, EnvError> {
    if query.is_plan() {
        query.type_check(&catalog_)?;
    }
    let mut g = EGraph::new(catalog_).with_node_limit(cfg.node_limit);
    let root = g.add_expr(query)?;
    g.rebuild();
    let mut trace = vec![TracePoint {
        applications: 0,
        sweep: 0,
        rule: "",
        size: g.size(),
        node_count: g.node_count(),
        cost: g.analysis(root).best_cost,
    }];
    let mut stop = StopReason::MaxSweeps;
    'sweeps: for sweep in 1..=cfg.max_sweeps {
        let mut changed = false;
        for rule in rules {
            match apply_rule(&mut g, rule) {
                Ok(report) => changed |= !report.saturated,
                Err(EGraphError::NodeBudgetExceeded { .. }) => {
                    stop = StopReason::NodeLimit;
                    break 'sweeps;
                }
                Err(e) => return Err(e.into()),
            }
            trace.push(TracePoint {
                applications: trace.len(),
                sweep,
                rule: rule.name,
                size: g.size(),
                node_count: g.node_count(),
                cost: g.analysis(root).best_cost,
            });
        }
        if !changed {
            stop = StopReason::Saturated;
            break;
        }
    }
    let extraction = greedy_extract(&g, root)?;
    Ok(EggResult {
        extraction,
        graph: g,
        trace,
        stop,
    })
}

/// Convenience wrapper over the full catalog.
pub fn egg_loop_all(query: &RaExpr, catalog_: Arc<Catalog>, cfg: &EggConfig) -> Result<EggResult, EnvError> {
    egg_loop(query, catalog_, catalog(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Random,
    Heuristic,
    /// Heuristic, but a uniformly random unmasked action with the given
    /// probability.
    Explore(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub final_cost: f64,
    pub final_plan: RaExpr,
}

/// Steps without any change in node count or cost after which a rollout
/// is cut short.
pub const STALL_STEPS: usize = 20;

/// Runs one episode to the horizon, or until the graph and cost have not
/// moved for [`STALL_STEPS`] steps. `env` is left in its final state.
pub fn run_episode<R: Rng>(env: &mut Env, policy: Policy, rng: &mut R) -> Result<Episode, AgentError> {
    let mut ep = Episode {
        actions: vec![],
        rewards: vec![],
        costs: vec![env.cost()],
        final_cost: env.cost(),
        final_plan: env.best_plan()?,
    };
    let mut still = 0;
    while !env.is_done() && still < STALL_STEPS {
        let a = match policy {
            Policy::Random => random_action(env, rng),
            Policy::Heuristic => heuristic_policy(env)?,
            Policy::Explore(eps) => {
                if rng.gen_bool(eps) {
                    random_action(env, rng)
                } else {
                    heuristic_policy(env)?
                }
            }
        };
        let (size, cost) = (env.graph().size(), env.cost());
        let (r, info) = env.advance(a)?;
        if info.size == size && info.extracted_cost == cost && a != RESET {
            still += 1;
        } else if a == RESET && info.extracted_cost == cost && info.size >= size {
            still += 1;
        } else {
            still = 0;
        }
        ep.actions.push(a);
        ep.rewards.push(r);
        ep.costs.push(info.extracted_cost);
    }
    ep.final_cost = env.cost();
    ep.final_plan = env.best_plan()?;
    Ok(ep)
}
