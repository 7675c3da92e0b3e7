//! Plan extraction: greedy per-class cheapest trees, and exact extraction
//! through the ILP solver in [`bnb`].

mod bnb;

use std::collections::BTreeMap;
use std::time::Duration;

use crate::egraph::{EGraph, ENode, Id, Op};
use crate::ra::{RaExpr, Value};

pub use bnb::{solve_bnb, BnbError, BnbResult, IlpInstance, IlpNode};

/// Largest graph handed to the exact extractor by default.
pub const DEFAULT_ILP_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractResult {
    pub root: Id,
    /// Chosen node of every class the plan uses.
    pub choices: BTreeMap<Id, ENode>,
    /// Tree-walk cost of `expr` under the graph's cost model.
    pub total_cost: f64,
    pub expr: RaExpr,
    /// False only for exact extraction that ran out of time.
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("class {0} has no finite acyclic term")]
    NoFiniteExtraction(Id),
    #[error("e-graph has {nodes} nodes, above the exact-extraction cap of {cap}")]
    IlpCapExceeded { nodes: usize, cap: usize },
    #[error("cannot build a term: {0}")]
    Malformed(String),
}

/// Extraction instance for the part of `g` reachable from `root`, with
/// the class id of each instance class.
pub fn build_instance(g: &EGraph, root: Id) -> (IlpInstance, Vec<Id>) {
    let root = g.find(root);
    let mut ids = vec![root];
    let mut index: BTreeMap<Id, usize> = BTreeMap::from([(root, 0)]);
    let mut i = 0;
    while i < ids.len() {
        for n in &g.class(ids[i]).nodes {
            for &c in &n.children {
                let c = g.find(c);
                if !index.contains_key(&c) {
                    index.insert(c, ids.len());
                    ids.push(c);
                }
            }
        }
        i += 1;
    }
    // Renumber by class id so the instance does not depend on discovery
    // order.
    ids.sort();
    let index: BTreeMap<Id, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut nodes = Vec::new();
    let mut classes = Vec::with_capacity(ids.len());
    for (ci, &id) in ids.iter().enumerate() {
        let mut members = Vec::new();
        for n in &g.class(id).nodes {
            members.push(nodes.len());
            nodes.push(IlpNode {
                class: ci,
                cost: g.node_cost(n),
                children: n.children.iter().map(|&c| index[&g.find(c)]).collect(),
            });
        }
        classes.push(members);
    }
    let inst = IlpInstance {
        nodes,
        classes,
        root: index[&root],
    };
    (inst, ids)
}

/// Cheapest tree per class by fixpoint, ties broken by tree size and then
/// node position within the class.
pub fn greedy_extract(g: &EGraph, root: Id) -> Result<ExtractResult, ExtractError> {
    let (inst, ids) = build_instance(g, root);
    let (key, choice) = inst.greedy();
    if key[inst.root].1 == u64::MAX {
        return Err(ExtractError::NoFiniteExtraction(ids[inst.root]));
    }
    assemble(g, &inst, &ids, &choice, true)
}

/// Exact extraction minimizing the summed cost of chosen nodes. Runs out
/// of time gracefully: the best plan found so far is returned with
/// `optimal == false`.
pub fn ilp_extract(g: &EGraph, root: Id, budget: Duration, cap: usize) -> Result<ExtractResult, ExtractError> {
    let (inst, ids) = build_instance(g, root);
    if inst.nodes.len() > cap {
        return Err(ExtractError::IlpCapExceeded {
            nodes: inst.nodes.len(),
            cap,
        });
    }
    let r = solve_bnb(&inst, budget).map_err(|_| ExtractError::NoFiniteExtraction(ids[inst.root]))?;
    if !r.optimal {
        log::warn!(
            "exact extraction hit its time budget after {} branches; gap {}",
            r.explored,
            r.gap()
        );
    }
    assemble(g, &inst, &ids, &r.choice, r.optimal)
}

fn assemble(
    g: &EGraph,
    inst: &IlpInstance,
    ids: &[Id],
    choice: &[Option<usize>],
    optimal: bool,
) -> Result<ExtractResult, ExtractError> {
    let mut choices = BTreeMap::new();
    let mut stack = vec![inst.root];
    while let Some(c) = stack.pop() {
        if choices.contains_key(&ids[c]) {
            continue;
        }
        let n = choice[c].ok_or(ExtractError::NoFiniteExtraction(ids[c]))?;
        let local = n - inst.classes[c][0];
        choices.insert(ids[c], g.class(ids[c]).nodes[local].clone());
        stack.extend(inst.nodes[n].children.iter().copied());
    }
    let root = ids[inst.root];
    let expr = term(g, &choices, root)?;
    let total_cost = tree_walk_cost(g, &choices, root);
    Ok(ExtractResult {
        root,
        choices,
        total_cost,
        expr,
        optimal,
    })
}

/// Sum of node costs over the tree unfolded from `root`; shared classes
/// are counted once per occurrence.
pub fn tree_walk_cost(g: &EGraph, choices: &BTreeMap<Id, ENode>, root: Id) -> f64 {
    let n = &choices[&g.find(root)];
    g.node_cost(n) + n.children.iter().map(|&c| tree_walk_cost(g, choices, c)).sum::<f64>()
}

fn leaf_name(g: &EGraph, choices: &BTreeMap<Id, ENode>, id: Id) -> Result<String, ExtractError> {
    match &choices[&g.find(id)].op {
        Op::Table(t) => Ok(t.clone()),
        Op::Alias(a) => Ok(a.clone()),
        other => Err(ExtractError::Malformed(format!("expected a table or alias, found {}", other.name()))),
    }
}

/// Builds the term rooted at `id` from a closed choice.
pub fn term(g: &EGraph, choices: &BTreeMap<Id, ENode>, id: Id) -> Result<RaExpr, ExtractError> {
    let n = &choices[&g.find(id)];
    let c = |i: usize| term(g, choices, n.children[i]);
    Ok(match &n.op {
        Op::Bool(b) => RaExpr::Const(Value::Bool(*b)),
        Op::Int(i) => RaExpr::Const(Value::Int(*i)),
        Op::Str(s) => RaExpr::Const(Value::Str(s.clone())),
        Op::Column(col) => RaExpr::Column(col.clone()),
        Op::Scan => RaExpr::Scan(leaf_name(g, choices, n.children[0])?),
        Op::Filter => RaExpr::filter(c(0)?, c(1)?),
        Op::Project => {
            let list = &choices[&g.find(n.children[0])];
            if list.op != Op::List {
                return Err(ExtractError::Malformed("projection without a column list".into()));
            }
            let cols = list
                .children
                .iter()
                .map(|&x| term(g, choices, x))
                .collect::<Result<Vec<_>, _>>()?;
            RaExpr::project(cols, c(1)?)
        }
        Op::Join(kind) => RaExpr::join(*kind, c(0)?, c(1)?, c(2)?),
        Op::Derived => RaExpr::derived(leaf_name(g, choices, n.children[0])?, c(1)?),
        Op::Bin(op) => RaExpr::binary(*op, c(0)?, c(1)?),
        Op::Not => RaExpr::not(c(0)?),
        Op::Table(_) | Op::Alias(_) | Op::List => {
            return Err(ExtractError::Malformed(format!("{} is not a term", n.op.name())))
        }
    })
}
