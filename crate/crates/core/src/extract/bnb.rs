//! The extraction ILP and its exact branch-and-bound solver.
//!
//! Variables are one binary `x_i` per e-node; the objective is the sum of
//! chosen node costs (shared classes are paid once). Constraints: exactly
//! one root node, every chosen node's child classes have a chosen node,
//! and the chosen class graph is acyclic, encoded with per-class order
//! variables `t_c`.

use std::fmt::Write;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct IlpNode {
    pub class: usize,
    pub cost: f64,
    /// Child classes in operand order, repeats included.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpInstance {
    pub nodes: Vec<IlpNode>,
    /// Node indices of each class, ascending.
    pub classes: Vec<Vec<usize>>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbResult {
    /// Chosen node per class; `None` for classes outside the solution.
    pub choice: Vec<Option<usize>>,
    pub objective: f64,
    pub lower_bound: f64,
    /// False when the time budget ran out before the search finished.
    pub optimal: bool,
    pub explored: u64,
}

impl BnbResult {
    pub fn gap(&self) -> f64 {
        (self.objective - self.lower_bound).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BnbError {
    #[error("no acyclic solution exists for the root class")]
    Infeasible,
}

impl IlpInstance {
    /// Distinct child classes of a node.
    pub fn child_classes(&self, node: usize) -> Vec<usize> {
        let mut c = self.nodes[node].children.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Per-class cheapest tree: `(cost, size)` keys and the chosen node,
    /// by strict-improvement fixpoint. Ties keep the lower node index.
    pub fn greedy(&self) -> (Vec<(f64, u64)>, Vec<Option<usize>>) {
        let inf = (f64::INFINITY, u64::MAX);
        let mut key = vec![inf; self.classes.len()];
        let mut choice = vec![None; self.classes.len()];
        loop {
            let mut changed = false;
            for (c, nodes) in self.classes.iter().enumerate() {
                for &n in nodes {
                    let node = &self.nodes[n];
                    let mut cost = node.cost;
                    let mut size: u64 = 1;
                    let mut finite = true;
                    for &ch in &node.children {
                        let (cc, cs) = key[ch];
                        if cs == u64::MAX {
                            finite = false;
                            break;
                        }
                        cost += cc;
                        size = size.saturating_add(cs);
                    }
                    if finite && (cost < key[c].0 || (cost == key[c].0 && size < key[c].1)) {
                        key[c] = (cost, size);
                        choice[c] = Some(n);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (key, choice)
    }

    /// Sum of chosen node costs over the classes reachable from the root.
    pub fn dag_cost(&self, choice: &[Option<usize>]) -> f64 {
        let mut seen = vec![false; self.classes.len()];
        let mut stack = vec![self.root];
        let mut total = 0.0;
        while let Some(c) = stack.pop() {
            if std::mem::replace(&mut seen[c], true) {
                continue;
            }
            let n = choice[c].expect("closed choice");
            total += self.nodes[n].cost;
            stack.extend(self.nodes[n].children.iter().copied());
        }
        total
    }

    /// Standard LP-format text, for external MILP solvers.
    pub fn to_lp(&self) -> String {
        let eps = 1.0 / (self.classes.len() as f64 + 1.0);
        let mut out = String::new();
        out.push_str("\\ e-graph extraction\nMinimize\n obj:");
        for (i, n) in self.nodes.iter().enumerate() {
            write!(out, " + {} x{i}", n.cost).unwrap();
        }
        out.push_str("\nSubject To\n root:");
        for &i in &self.classes[self.root] {
            write!(out, " + x{i}").unwrap();
        }
        out.push_str(" = 1\n");
        for (i, n) in self.nodes.iter().enumerate() {
            for c in self.child_classes(i) {
                write!(out, " child_{i}_{c}: x{i}").unwrap();
                for &j in &self.classes[c] {
                    write!(out, " - x{j}").unwrap();
                }
                out.push_str(" <= 0\n");
                if c == n.class {
                    writeln!(out, " order_{i}_{c}: x{i} <= {}", 1.0 - eps).unwrap();
                } else {
                    writeln!(out, " order_{i}_{c}: t{c} - t{} + x{i} <= {}", n.class, 1.0 - eps).unwrap();
                }
            }
        }
        out.push_str("Bounds\n");
        for c in 0..self.classes.len() {
            writeln!(out, " 0 <= t{c} <= 1").unwrap();
        }
        out.push_str("Binary\n");
        for i in 0..self.nodes.len() {
            writeln!(out, " x{i}").unwrap();
        }
        out.push_str("End\n");
        out
    }
}

/// Exact depth-first branch and bound over one-node-per-class choices.
///
/// The greedy solution is the initial incumbent. Classes whose whole
/// reachable subgraph is free are fixed to their greedy choice. When no
/// node can reach a positive-cost class through two different operands,
/// the objective coincides with tree cost and the per-class greedy tree
/// cost is an admissible bound; otherwise each pending class contributes
/// its cheapest node cost.
pub fn solve_bnb(inst: &IlpInstance, budget: Duration) -> Result<BnbResult, BnbError> {
    let (key, greedy) = inst.greedy();
    if key[inst.root].1 == u64::MAX {
        return Err(BnbError::Infeasible);
    }
    let k = inst.classes.len();
    let free = free_classes(inst);
    let min_own: Vec<f64> = inst
        .classes
        .iter()
        .map(|ns| ns.iter().map(|&n| inst.nodes[n].cost).fold(f64::INFINITY, f64::min))
        .collect();
    let bound: Vec<f64> = if sharing_free(inst) {
        key.iter().map(|&(c, _)| c).collect()
    } else {
        min_own
    };
    let usable = |n: usize| inst.nodes[n].children.iter().all(|&c| key[c].1 != u64::MAX);
    // Try nodes in order of their greedy value, then index.
    let order: Vec<Vec<usize>> = inst
        .classes
        .iter()
        .map(|ns| {
            let mut v: Vec<usize> = ns.iter().copied().filter(|&n| usable(n)).collect();
            let value = |n: usize| {
                inst.nodes[n].cost + inst.nodes[n].children.iter().map(|&c| key[c].0).sum::<f64>()
            };
            v.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            v
        })
        .collect();

    let mut incumbent = greedy.clone();
    let objective = inst.dag_cost(&incumbent);
    let root_bound = bound[inst.root];
    let mut search = Search {
        inst,
        free: &free,
        bound: &bound,
        order: &order,
        choice: vec![None; k],
        best: objective,
        best_choice: None,
        deadline: Instant::now() + budget,
        timed_out: false,
        explored: 0,
    };
    let start = if free[inst.root] { vec![] } else { vec![inst.root] };
    search.dfs(start, 0.0);
    let (timed_out, explored, best) = (search.timed_out, search.explored, search.best);
    if let Some(found) = search.best_choice {
        incumbent = found;
        // Free classes take their greedy choice.
        for c in 0..k {
            if incumbent[c].is_none() && free[c] {
                incumbent[c] = greedy[c];
            }
        }
    }
    let choice = closure(inst, &incumbent);
    Ok(BnbResult {
        choice,
        objective: best,
        lower_bound: if timed_out { root_bound.min(best) } else { best },
        optimal: !timed_out,
        explored,
    })
}

/// Restricts a choice vector to the classes reachable from the root.
fn closure(inst: &IlpInstance, choice: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut out = vec![None; inst.classes.len()];
    let mut stack = vec![inst.root];
    while let Some(c) = stack.pop() {
        if out[c].is_some() {
            continue;
        }
        let n = choice[c].expect("closed choice");
        out[c] = Some(n);
        stack.extend(inst.nodes[n].children.iter().copied());
    }
    out
}

/// Classes from which every reachable node is free.
fn free_classes(inst: &IlpInstance) -> Vec<bool> {
    let mut free: Vec<bool> = inst
        .classes
        .iter()
        .map(|ns| ns.iter().all(|&n| inst.nodes[n].cost == 0.0))
        .collect();
    loop {
        let mut changed = false;
        for c in 0..inst.classes.len() {
            if free[c] && inst.classes[c].iter().any(|&n| inst.nodes[n].children.iter().any(|&ch| !free[ch])) {
                free[c] = false;
                changed = true;
            }
        }
        if !changed {
            return free;
        }
    }
}

/// True if no node reaches a positive-cost class through two operands.
fn sharing_free(inst: &IlpInstance) -> bool {
    let k = inst.classes.len();
    let words = k.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; k];
    for (c, ns) in inst.classes.iter().enumerate() {
        if ns.iter().any(|&n| inst.nodes[n].cost > 0.0) {
            reach[c][c / 64] |= 1 << (c % 64);
        }
    }
    loop {
        let mut changed = false;
        for c in 0..k {
            for &n in &inst.classes[c] {
                for &ch in &inst.nodes[n].children {
                    if ch == c {
                        continue;
                    }
                    for w in 0..words {
                        let add = reach[ch][w] & !reach[c][w];
                        if add != 0 {
                            reach[c][w] |= add;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    inst.nodes.iter().all(|n| {
        n.children.iter().enumerate().all(|(i, &a)| {
            n.children[i + 1..]
                .iter()
                .all(|&b| reach[a].iter().zip(&reach[b]).all(|(x, y)| x & y == 0))
        })
    })
}

struct Search<'a> {
    inst: &'a IlpInstance,
    free: &'a [bool],
    bound: &'a [f64],
    order: &'a [Vec<usize>],
    choice: Vec<Option<usize>>,
    best: f64,
    best_choice: Option<Vec<Option<usize>>>,
    deadline: Instant,
    timed_out: bool,
    explored: u64,
}

fn tolerance(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

impl Search<'_> {
    fn dfs(&mut self, frontier: Vec<usize>, cost: f64) {
        if self.timed_out {
            return;
        }
        self.explored += 1;
        if self.explored % 1024 == 0 && Instant::now() > self.deadline {
            self.timed_out = true;
            return;
        }
        let Some((&c, rest)) = frontier.split_first() else {
            if cost < self.best - tolerance(self.best) {
                self.best = cost;
                self.best_choice = Some(self.choice.clone());
            }
            return;
        };
        let lb = cost + frontier.iter().map(|&f| self.bound[f]).sum::<f64>();
        if lb >= self.best - tolerance(self.best) {
            return;
        }
        for i in 0..self.order[c].len() {
            let n = self.order[c][i];
            if self.closes_cycle(c, n) {
                continue;
            }
            self.choice[c] = Some(n);
            let mut next = rest.to_vec();
            for ch in self.inst.child_classes(n) {
                if !self.free[ch] && self.choice[ch].is_none() && !next.contains(&ch) {
                    next.push(ch);
                }
            }
            self.dfs(next, cost + self.inst.nodes[n].cost);
            self.choice[c] = None;
            if self.timed_out {
                return;
            }
        }
    }

    /// Whether choosing `n` for class `c` lets `c` reach itself through
    /// decided choices.
    fn closes_cycle(&self, c: usize, n: usize) -> bool {
        let mut stack: Vec<usize> = self.inst.nodes[n].children.clone();
        let mut seen = vec![false; self.inst.classes.len()];
        while let Some(x) = stack.pop() {
            if x == c {
                return true;
            }
            if std::mem::replace(&mut seen[x], true) {
                continue;
            }
            if let Some(m) = self.choice[x] {
                stack.extend(self.inst.nodes[m].children.iter().copied());
            }
        }
        false
    }
}
