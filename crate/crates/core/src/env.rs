//! The equality-saturation environment: one e-graph per episode, one
//! action per rule plus Reset, rewards from greedy-extracted cost.

use std::sync::Arc;

use crate::egraph::{EGraph, EGraphError, Id, OP_KINDS};
use crate::extract::{greedy_extract, ExtractError};
use crate::ra::{Catalog, RaExpr, TypeError};
use crate::rules::{apply_rule, catalog, NUM_RULES};

/// Action index of Reset.
pub const RESET: usize = NUM_RULES;
/// Total number of actions.
pub const NUM_ACTIONS: usize = NUM_RULES + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub node_limit: usize,
    pub horizon: usize,
    pub w_cost: f64,
    pub w_saturated: f64,
    pub w_growth: f64,
    /// Operator one-hot width.
    pub vocab: usize,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            node_limit: 1000,
            horizon: 200,
            w_cost: 1.0,
            w_saturated: 0.1,
            w_growth: 0.1,
            vocab: 64,
            seed: 0,
        }
    }
}

impl EnvConfig {
    /// Width of one feature row.
    pub fn feature_dim(&self) -> usize {
        2 + self.vocab + 3
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("action {0} is out of range (0..{NUM_ACTIONS})")]
    InvalidAction(usize),
    #[error("episode is finished")]
    EpisodeFinished,
    #[error("operator vocabulary of {vocab} cannot hold {needed} operator kinds")]
    VocabularyOverflow { vocab: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    EGraph(#[from] EGraphError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Graph encoding plus action mask and context.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// One row per vertex: each class followed by its nodes, classes in id
    /// order.
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<(u32, u32)>,
    /// 0 for class→node, 1 for node→class.
    pub edge_attrs: Vec<u8>,
    pub mask: Vec<bool>,
    pub step: usize,
    /// size / node_limit.
    pub fill: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub extracted_cost: f64,
    pub node_count: usize,
    /// Budgeted size, see [`EGraph::size`].
    pub size: usize,
    pub saturated_action: bool,
    pub rolled_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Encodes a rebuilt graph. Class rows carry the class's best cost, node
/// rows their own operator cost.
pub fn encode(g: &EGraph, vocab: usize) -> Result<(Vec<Vec<f64>>, Vec<(u32, u32)>, Vec<u8>), EnvError> {
    if vocab < OP_KINDS {
        return Err(EnvError::VocabularyOverflow {
            vocab,
            needed: OP_KINDS,
        });
    }
    let dim = 2 + vocab + 3;
    let mut rows = Vec::new();
    let mut class_row = vec![0u32; g.size()];
    let mut node_rows: Vec<(u32, Vec<Id>)> = Vec::new();
    let mut edges = Vec::new();
    let mut attrs = Vec::new();
    for class in g.classes() {
        let a = &class.data;
        let ci = rows.len() as u32;
        class_row[class.id.index()] = ci;
        let mut row = vec![0.0; dim];
        row[0] = 1.0;
        row[dim - 3] = a.cardinality.ln_1p();
        row[dim - 2] = a.width as f64;
        row[dim - 1] = a.best_cost.ln_1p();
        rows.push(row);
        let mut nodes: Vec<_> = class.nodes.iter().collect();
        nodes.sort();
        for n in nodes {
            let ni = rows.len() as u32;
            let mut row = vec![0.0; dim];
            row[1] = 1.0;
            row[2 + n.op.kind_index()] = 1.0;
            row[dim - 3] = a.cardinality.ln_1p();
            row[dim - 2] = a.width as f64;
            row[dim - 1] = g.node_cost(n).ln_1p();
            rows.push(row);
            edges.push((ci, ni));
            attrs.push(0);
            let mut children = n.children.clone();
            children.dedup();
            node_rows.push((ni, children));
        }
    }
    for (ni, children) in node_rows {
        let mut seen = Vec::new();
        for c in children {
            let c = g.find(c);
            if !seen.contains(&c) {
                seen.push(c);
                edges.push((ni, class_row[c.index()]));
                attrs.push(1);
            }
        }
    }
    Ok((rows, edges, attrs))
}

/// Applicability of every action; Reset is always available.
pub fn action_mask(g: &EGraph) -> Vec<bool> {
    let mut mask: Vec<bool> = catalog().iter().map(|r| r.is_applicable(g)).collect();
    mask.push(true);
    mask
}

#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    graph: EGraph,
    root: Id,
    step: usize,
    cost: f64,
    done: bool,
}

impl Env {
    /// Starts an episode on a fresh graph holding only `query`.
    pub fn new(query: &RaExpr, catalog: Arc<Catalog>, cfg: EnvConfig) -> Result<Self, EnvError> {
        if cfg.node_limit == 0 || cfg.horizon == 0 {
            return Err(EnvError::Config("node_limit and horizon must be positive".into()));
        }
        if cfg.vocab < OP_KINDS {
            return Err(EnvError::VocabularyOverflow {
                vocab: cfg.vocab,
                needed: OP_KINDS,
            });
        }
        query.type_check(&catalog)?;
        let mut graph = EGraph::new(catalog).with_node_limit(cfg.node_limit);
        let root = graph.add_expr(query)?;
        graph.rebuild();
        let cost = graph.analysis(root).best_cost;
        Ok(Env {
            cfg,
            graph,
            root,
            step: 0,
            cost,
            done: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &EGraph {
        &self.graph
    }

    pub fn root(&self) -> Id {
        self.graph.find(self.root)
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Greedy-extracted cost of the current graph.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn mask(&self) -> Vec<bool> {
        action_mask(&self.graph)
    }

    pub fn observe(&self) -> Result<Observation, EnvError> {
        let (features, edges, edge_attrs) = encode(&self.graph, self.cfg.vocab)?;
        Ok(Observation {
            features,
            edges,
            edge_attrs,
            mask: self.mask(),
            step: self.step,
            fill: self.graph.size() as f64 / self.cfg.node_limit as f64,
        })
    }

    /// Applies one action without building an observation.
    pub fn advance(&mut self, action: usize) -> Result<(f64, StepInfo), EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= NUM_ACTIONS {
            return Err(EnvError::InvalidAction(action));
        }
        let before_size = self.graph.size();
        let before_cost = self.cost;
        let mut saturated = false;
        let mut rolled_back = false;
        if action == RESET {
            let extracted = greedy_extract(&self.graph, self.root)?;
            let (g, root) = self.graph.from_choice(&extracted.choices, extracted.root);
            self.graph = g;
            self.root = root;
        } else {
            match apply_rule(&mut self.graph, &catalog()[action]) {
                Ok(report) => saturated = report.saturated,
                Err(EGraphError::NodeBudgetExceeded { .. }) => rolled_back = true,
                Err(e) => return Err(e.into()),
            }
        }
        self.cost = self.graph.analysis(self.root).best_cost;
        let reward = if rolled_back {
            -self.cfg.w_growth
        } else {
            let growth = self.graph.size().saturating_sub(before_size) as f64;
            self.cfg.w_cost * (before_cost.ln_1p() - self.cost.ln_1p())
                - if saturated { self.cfg.w_saturated } else { 0.0 }
                - self.cfg.w_growth * growth / self.cfg.node_limit as f64
        };
        self.step += 1;
        self.done = self.step >= self.cfg.horizon;
        Ok((
            reward,
            StepInfo {
                extracted_cost: self.cost,
                node_count: self.graph.node_count(),
                size: self.graph.size(),
                saturated_action: saturated,
                rolled_back,
            },
        ))
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let (reward, info) = self.advance(action)?;
        Ok(StepResult {
            observation: self.observe()?,
            reward,
            done: self.done,
            info,
        })
    }

    /// Extracts the current best plan greedily.
    pub fn best_plan(&self) -> Result<RaExpr, EnvError> {
        Ok(greedy_extract(&self.graph, self.root)?.expr)
    }
}

#[cfg(test)]
mod tests;
