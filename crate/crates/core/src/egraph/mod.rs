//! E-graph engine: union-find over classes, hashconsed nodes, deferred
//! congruence-closure rebuilding and per-class analysis.

mod dump;
mod pattern;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::BuildHasherDefault;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::cost::{self, ClassAnalysis, CostModel};
use crate::ra::{BinOp, Catalog, ColumnRef, JoinKind, RaExpr, Value};

pub use pattern::{ematch, instantiate, Head, Pattern, PatternError, Subst};
pub(crate) use pattern::match_class;

/// Deterministic hashing so that any incidental iteration order is stable
/// across runs.
type Memo = HashMap<ENode, Id, BuildHasherDefault<DefaultHasher>>;

static NEXT_INSTANCE: AtomicU64 = AtomicU64::new(1);

/// E-class identifier. Only the union-find root of a class is canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Id(u32);

impl Id {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for Id {
    fn from(i: usize) -> Self {
        Id(u32::try_from(i).expect("e-class id overflow"))
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Operator tags. Leaves come first so that they sort before operators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Bool(bool),
    Int(i64),
    Str(String),
    Column(ColumnRef),
    Table(String),
    Alias(String),
    Scan,
    Filter,
    Project,
    List,
    Join(JoinKind),
    Derived,
    Bin(BinOp),
    Not,
}

/// Number of distinct operator kinds; the one-hot vocabulary must be at
/// least this large.
pub const OP_KINDS: usize = 27;

impl Op {
    /// Position in the operator one-hot vocabulary. Leaves share one slot
    /// per kind regardless of payload.
    pub fn kind_index(&self) -> usize {
        match self {
            Op::Bool(_) => 0,
            Op::Int(_) => 1,
            Op::Str(_) => 2,
            Op::Column(_) => 3,
            Op::Table(_) => 4,
            Op::Alias(_) => 5,
            Op::Scan => 6,
            Op::Filter => 7,
            Op::Project => 8,
            Op::List => 9,
            Op::Join(JoinKind::Nested) => 10,
            Op::Join(JoinKind::Hash) => 11,
            Op::Derived => 12,
            Op::Bin(op) => 13 + BinOp::ALL.iter().position(|o| o == op).unwrap(),
            Op::Not => 26,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(
            self,
            Op::Bool(_) | Op::Int(_) | Op::Str(_) | Op::Column(_) | Op::Table(_) | Op::Alias(_)
        )
    }

    /// Fixed arity, or `None` for lists.
    pub fn arity(&self) -> Option<usize> {
        Some(match self {
            op if op.is_leaf() => 0,
            Op::Scan | Op::Not => 1,
            Op::Filter | Op::Project | Op::Derived | Op::Bin(_) => 2,
            Op::Join(_) => 3,
            Op::List => return None,
            _ => unreachable!(),
        })
    }

    /// Operator name used in patterns: `filter`, `hashjoin`, `+`, ...
    pub fn name(&self) -> String {
        match self {
            Op::Bool(b) => b.to_string(),
            Op::Int(i) => i.to_string(),
            Op::Str(s) => Value::Str(s.clone()).to_string(),
            Op::Column(c) => c.qualified(),
            Op::Table(t) => format!("table:{t}"),
            Op::Alias(a) => format!("alias:{a}"),
            Op::Scan => "scan".into(),
            Op::Filter => "filter".into(),
            Op::Project => "project".into(),
            Op::List => "list".into(),
            Op::Join(JoinKind::Nested) => "join".into(),
            Op::Join(JoinKind::Hash) => "hashjoin".into(),
            Op::Derived => "derived".into(),
            Op::Bin(op) => op.symbol().into(),
            Op::Not => "not".into(),
        }
    }

    /// Parses a non-leaf operator name.
    pub fn from_name(s: &str) -> Option<Op> {
        Some(match s {
            "scan" => Op::Scan,
            "filter" => Op::Filter,
            "project" => Op::Project,
            "list" => Op::List,
            "join" => Op::Join(JoinKind::Nested),
            "hashjoin" => Op::Join(JoinKind::Hash),
            "derived" => Op::Derived,
            "not" => Op::Not,
            _ => Op::Bin(BinOp::from_symbol(s)?),
        })
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ENode {
    pub op: Op,
    pub children: Vec<Id>,
}

impl ENode {
    pub fn new(op: Op, children: Vec<Id>) -> Self {
        ENode { op, children }
    }

    pub fn leaf(op: Op) -> Self {
        ENode {
            op,
            children: Vec::new(),
        }
    }
}

impl fmt::Display for ENode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return write!(f, "{}", self.op);
        }
        write!(f, "({}", self.op)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone)]
pub struct EClass {
    pub id: Id,
    /// Canonical nodes, sorted and deduplicated after each rebuild.
    pub nodes: Vec<ENode>,
    /// Nodes that mention this class, with the class they live in.
    parents: Vec<(ENode, Id)>,
    pub data: ClassAnalysis,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EGraphError {
    #[error("node budget exceeded: {attempted} nodes > limit {limit}")]
    NodeBudgetExceeded { limit: usize, attempted: usize },
    #[error("missing statistics: {0}")]
    MissingStatistics(String),
    #[error("snapshot belongs to a different e-graph")]
    StaleSnapshot,
    #[error("operator {0} cannot be turned into a plan here")]
    Malformed(String),
}

/// Saved logical state of one e-graph.
#[derive(Debug, Clone)]
pub struct Snapshot {
    instance: u64,
    graph: Box<EGraph>,
}

#[derive(Debug, Clone)]
pub struct EGraph {
    catalog: Arc<Catalog>,
    cost_model: CostModel,
    uf: Vec<Id>,
    classes: Vec<Option<EClass>>,
    memo: Memo,
    pending: Vec<(ENode, Id)>,
    node_limit: Option<usize>,
    instance: u64,
    inconsistent_merges: usize,
}

impl EGraph {
    pub fn new(catalog: Arc<Catalog>) -> Self {
        Self::with_cost_model(catalog, CostModel::default())
    }

    pub fn with_cost_model(catalog: Arc<Catalog>, cost_model: CostModel) -> Self {
        EGraph {
            catalog,
            cost_model,
            uf: Vec::new(),
            classes: Vec::new(),
            memo: Memo::default(),
            pending: Vec::new(),
            node_limit: None,
            instance: NEXT_INSTANCE.fetch_add(1, Ordering::Relaxed),
            inconsistent_merges: 0,
        }
    }

    pub fn with_node_limit(mut self, limit: usize) -> Self {
        self.node_limit = Some(limit);
        self
    }

    pub fn set_node_limit(&mut self, limit: Option<usize>) {
        self.node_limit = limit;
    }

    pub fn node_limit(&self) -> Option<usize> {
        self.node_limit
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost_model
    }

    /// Number of merges whose cardinality estimates disagreed by more than 5%.
    pub fn inconsistent_merges(&self) -> usize {
        self.inconsistent_merges
    }

    pub fn find(&self, mut id: Id) -> Id {
        while self.uf[id.index()] != id {
            id = self.uf[id.index()];
        }
        id
    }

    fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id;
        while self.uf[cur.index()] != root {
            let next = self.uf[cur.index()];
            self.uf[cur.index()] = root;
            cur = next;
        }
        root
    }

    pub fn class(&self, id: Id) -> &EClass {
        self.classes[self.find(id).index()]
            .as_ref()
            .expect("root class present")
    }

    pub fn analysis(&self, id: Id) -> &ClassAnalysis {
        &self.class(id).data
    }

    /// Canonical classes in id order.
    pub fn classes(&self) -> impl Iterator<Item = &EClass> {
        self.classes.iter().flatten()
    }

    pub fn class_count(&self) -> usize {
        self.classes().count()
    }

    /// Canonical e-node count; exact once the graph is rebuilt.
    pub fn node_count(&self) -> usize {
        self.classes().map(|c| c.nodes.len()).sum()
    }

    /// E-nodes created since the graph was built, including ones later
    /// deduplicated by merges. Storage is never reclaimed, so this is the
    /// quantity the node limit bounds; it never shrinks.
    pub fn size(&self) -> usize {
        self.uf.len()
    }

    pub fn is_clean(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn canonicalize(&self, node: &ENode) -> ENode {
        ENode {
            op: node.op.clone(),
            children: node.children.iter().map(|&c| self.find(c)).collect(),
        }
    }

    /// The class already holding `node`, if any.
    pub fn lookup(&self, node: &ENode) -> Option<Id> {
        self.memo.get(&self.canonicalize(node)).map(|&id| self.find(id))
    }

    /// Adds a node, returning its class. Adding an existing node is a no-op.
    /// The node budget is not checked here; see [`EGraph::add_expr`] and
    /// rule application.
    pub fn add(&mut self, node: ENode) -> Result<Id, EGraphError> {
        let node = self.canonicalize(&node);
        if let Some(&id) = self.memo.get(&node) {
            return Ok(self.find(id));
        }
        let children: Vec<&ClassAnalysis> =
            node.children.iter().map(|&c| &self.class(c).data).collect();
        let duplicate = node.children.len() == 2 && node.children[0] == node.children[1];
        let data = cost::analyze(&node.op, &children, duplicate, &self.catalog, &self.cost_model)?;
        let id = Id::from(self.uf.len());
        self.uf.push(id);
        let mut seen = Vec::new();
        for &c in &node.children {
            if !seen.contains(&c) {
                seen.push(c);
                self.classes[c.index()]
                    .as_mut()
                    .unwrap()
                    .parents
                    .push((node.clone(), id));
            }
        }
        self.classes.push(Some(EClass {
            id,
            nodes: vec![node.clone()],
            parents: Vec::new(),
            data,
        }));
        self.memo.insert(node, id);
        Ok(id)
    }

    /// Adds every subterm of `expr`. Fails without modifying the graph if
    /// the result would exceed the node limit.
    pub fn add_expr(&mut self, expr: &RaExpr) -> Result<Id, EGraphError> {
        let snap = self.node_limit.map(|_| self.snapshot());
        let result = self.add_expr_rec(expr).and_then(|id| {
            let n = self.size();
            match self.node_limit {
                Some(limit) if n > limit => Err(EGraphError::NodeBudgetExceeded {
                    limit,
                    attempted: n,
                }),
                _ => Ok(id),
            }
        });
        if result.is_err() {
            if let Some(s) = snap {
                self.restore(&s).expect("own snapshot");
            }
        }
        result
    }

    fn add_expr_rec(&mut self, e: &RaExpr) -> Result<Id, EGraphError> {
        let node = match e {
            RaExpr::Scan(t) => {
                let table = self.add(ENode::leaf(Op::Table(t.clone())))?;
                ENode::new(Op::Scan, vec![table])
            }
            RaExpr::Filter { pred, input } => {
                let p = self.add_expr_rec(pred)?;
                let i = self.add_expr_rec(input)?;
                ENode::new(Op::Filter, vec![p, i])
            }
            RaExpr::Project { columns, input } => {
                let cols = columns
                    .iter()
                    .map(|c| self.add_expr_rec(c))
                    .collect::<Result<Vec<_>, _>>()?;
                let list = self.add(ENode::new(Op::List, cols))?;
                let i = self.add_expr_rec(input)?;
                ENode::new(Op::Project, vec![list, i])
            }
            RaExpr::Join {
                kind,
                pred,
                left,
                right,
            } => {
                let p = self.add_expr_rec(pred)?;
                let l = self.add_expr_rec(left)?;
                let r = self.add_expr_rec(right)?;
                ENode::new(Op::Join(*kind), vec![p, l, r])
            }
            RaExpr::Derived { alias, input } => {
                let a = self.add(ENode::leaf(Op::Alias(alias.clone())))?;
                let i = self.add_expr_rec(input)?;
                ENode::new(Op::Derived, vec![a, i])
            }
            RaExpr::Column(c) => ENode::leaf(Op::Column(c.clone())),
            RaExpr::Const(Value::Int(i)) => ENode::leaf(Op::Int(*i)),
            RaExpr::Const(Value::Str(s)) => ENode::leaf(Op::Str(s.clone())),
            RaExpr::Const(Value::Bool(b)) => ENode::leaf(Op::Bool(*b)),
            RaExpr::Binary { op, left, right } => {
                let l = self.add_expr_rec(left)?;
                let r = self.add_expr_rec(right)?;
                ENode::new(Op::Bin(*op), vec![l, r])
            }
            RaExpr::Not(inner) => {
                let i = self.add_expr_rec(inner)?;
                ENode::new(Op::Not, vec![i])
            }
        };
        self.add(node)
    }

    /// Merges two classes. Returns false if they were already equal.
    /// Congruence is restored lazily by [`EGraph::rebuild`].
    pub fn union(&mut self, a: Id, b: Id) -> bool {
        let a = self.find_mut(a);
        let b = self.find_mut(b);
        if a == b {
            return false;
        }
        let (root, other) = if a < b { (a, b) } else { (b, a) };
        self.uf[other.index()] = root;
        let merged = self.classes[other.index()].take().unwrap();
        self.pending.extend(merged.parents.iter().cloned());
        let target = self.classes[root.index()].as_mut().unwrap();
        if cost::cardinality_disagrees(&target.data, &merged.data) {
            self.inconsistent_merges += 1;
            log::debug!(
                "cardinality estimates disagree on merge of {root} and {other}: {} vs {}",
                target.data.cardinality,
                merged.data.cardinality
            );
        }
        target.data = cost::merge_analysis(&target.data, &merged.data);
        target.nodes.extend(merged.nodes);
        target.parents.extend(merged.parents);
        true
    }

    /// Restores the hashcons and congruence invariants. Returns the number
    /// of merges performed; a second call on the result returns 0.
    pub fn rebuild(&mut self) -> usize {
        let mut merges = 0;
        while !self.pending.is_empty() {
            let todo = std::mem::take(&mut self.pending);
            for (node, class) in todo {
                let node = ENode {
                    op: node.op,
                    children: node.children.iter().map(|&c| self.find_mut(c)).collect(),
                };
                let class = self.find_mut(class);
                if let Some(old) = self.memo.insert(node, class) {
                    if self.union(old, class) {
                        merges += 1;
                    }
                }
            }
        }
        self.rebuild_classes();
        self.update_best_costs();
        merges
    }

    fn rebuild_classes(&mut self) {
        let uf = self.uf.clone();
        let find = |mut id: Id| {
            while uf[id.index()] != id {
                id = uf[id.index()];
            }
            id
        };
        self.memo.clear();
        for class in self.classes.iter_mut().flatten() {
            for n in &mut class.nodes {
                for c in &mut n.children {
                    *c = find(*c);
                }
            }
            class.nodes.sort();
            class.nodes.dedup();
            for (n, p) in &mut class.parents {
                for c in &mut n.children {
                    *c = find(*c);
                }
                *p = find(*p);
            }
            class.parents.sort();
            class.parents.dedup();
            for n in &class.nodes {
                let prev = self.memo.insert(n.clone(), class.id);
                debug_assert!(prev.is_none(), "hashcons collision on {n}");
            }
        }
    }

    /// Cost of one node under the current child analyses.
    pub fn node_cost(&self, node: &ENode) -> f64 {
        let children: Vec<&ClassAnalysis> =
            node.children.iter().map(|&c| &self.class(c).data).collect();
        self.cost_model.op_cost(&node.op, &children)
    }

    /// Bellman-Ford style fixpoint for the per-class cheapest tree cost.
    /// Values only ever decrease.
    fn update_best_costs(&mut self) {
        loop {
            let mut changed = false;
            for i in 0..self.classes.len() {
                let Some(class) = &self.classes[i] else { continue };
                let mut best = class.data.best_cost;
                for n in &class.nodes {
                    let c = self.node_cost(n)
                        + n.children.iter().map(|&ch| self.class(ch).data.best_cost).sum::<f64>();
                    if c < best {
                        best = c;
                    }
                }
                if best < class.data.best_cost {
                    self.classes[i].as_mut().unwrap().data.best_cost = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// A fresh graph holding only the chosen term under `root`. Each new
    /// class keeps the analysis of the class it was chosen from, so costs
    /// of the extracted plan are preserved exactly.
    pub fn from_choice(&self, choices: &std::collections::BTreeMap<Id, ENode>, root: Id) -> (EGraph, Id) {
        let mut g = EGraph::with_cost_model(self.catalog.clone(), self.cost_model.clone());
        g.node_limit = self.node_limit;
        let mut map = HashMap::new();
        let new_root = g.copy_chosen(self, choices, self.find(root), &mut map);
        g.rebuild();
        (g, new_root)
    }

    fn copy_chosen(
        &mut self,
        old: &EGraph,
        choices: &std::collections::BTreeMap<Id, ENode>,
        id: Id,
        map: &mut HashMap<Id, Id>,
    ) -> Id {
        if let Some(&done) = map.get(&id) {
            return done;
        }
        let n = &choices[&id];
        let children: Vec<Id> = n
            .children
            .iter()
            .map(|&c| self.copy_chosen(old, choices, old.find(c), map))
            .collect();
        let node = ENode::new(n.op.clone(), children);
        let mut data = old.analysis(id).clone();
        data.best_cost = self.node_cost(&node)
            + node.children.iter().map(|&c| self.analysis(c).best_cost).sum::<f64>();
        let new = Id::from(self.uf.len());
        self.uf.push(new);
        for c in node.children.iter().copied().collect::<std::collections::BTreeSet<_>>() {
            self.classes[c.index()].as_mut().unwrap().parents.push((node.clone(), new));
        }
        self.memo.insert(node.clone(), new);
        self.classes.push(Some(EClass {
            id: new,
            nodes: vec![node],
            parents: Vec::new(),
            data,
        }));
        map.insert(id, new);
        new
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            instance: self.instance,
            graph: Box::new(self.clone()),
        }
    }

    pub fn restore(&mut self, snap: &Snapshot) -> Result<(), EGraphError> {
        if snap.instance != self.instance {
            return Err(EGraphError::StaleSnapshot);
        }
        *self = (*snap.graph).clone();
        Ok(())
    }

    /// Full invariant check: canonical children, hashcons uniqueness,
    /// congruence and memo consistency. Intended for tests.
    pub fn audit(&self) -> Result<(), String> {
        if !self.pending.is_empty() {
            return Err("pending unions not rebuilt".into());
        }
        let mut seen: HashMap<&ENode, Id> = HashMap::new();
        for class in self.classes() {
            if self.find(class.id) != class.id {
                return Err(format!("class {} is stored but not a root", class.id));
            }
            for n in &class.nodes {
                if n.children.iter().any(|&c| self.find(c) != c) {
                    return Err(format!("node {n} in {} has non-canonical children", class.id));
                }
                if let Some(other) = seen.insert(n, class.id) {
                    return Err(format!("node {n} appears in {other} and {}", class.id));
                }
                match self.memo.get(n) {
                    Some(&m) if self.find(m) == class.id => {}
                    _ => return Err(format!("memo entry for {n} does not point at {}", class.id)),
                }
            }
        }
        if self.memo.len() != self.node_count() {
            return Err(format!(
                "memo has {} entries for {} nodes",
                self.memo.len(),
                self.node_count()
            ));
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        dump::dump(self)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ra::{ColumnDef, TableDef, Type};

    pub(crate) fn catalog() -> Arc<Catalog> {
        Arc::new(
            Catalog::new(vec![TableDef {
                name: "t".into(),
                row_count: 1000,
                columns: ["x", "y"]
                    .iter()
                    .map(|c| ColumnDef {
                        name: c.to_string(),
                        ty: Type::Int,
                        width_bytes: 8,
                        ndv: 100,
                    })
                    .collect(),
            }])
            .unwrap(),
        )
    }

    /// Tables `a` and `b`, each with int columns `k` and `v`.
    pub(crate) fn two_tables() -> Arc<Catalog> {
        let table = |name: &str| TableDef {
            name: name.into(),
            row_count: 1000,
            columns: ["k", "v"]
                .iter()
                .map(|c| ColumnDef {
                    name: c.to_string(),
                    ty: Type::Int,
                    width_bytes: 8,
                    ndv: 100,
                })
                .collect(),
        };
        Arc::new(Catalog::new(vec![table("a"), table("b")]).unwrap())
    }

    fn x_times_two_over_two() -> RaExpr {
        RaExpr::binary(
            BinOp::Div,
            RaExpr::binary(BinOp::Mul, RaExpr::col("t", "x"), RaExpr::int(2)),
            RaExpr::int(2),
        )
    }

    #[test]
    fn hashconsing_shares_the_literal() {
        let mut g = EGraph::new(catalog());
        let root = g.add_expr(&x_times_two_over_two()).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.class_count(), 4);
        let again = g.add_expr(&x_times_two_over_two()).unwrap();
        assert_eq!(root, again);
        assert_eq!(g.node_count(), 4);
    }

    #[test]
    fn union_with_self_is_noop() {
        let mut g = EGraph::new(catalog());
        let x = g.add_expr(&RaExpr::col("t", "x")).unwrap();
        assert!(!g.union(x, x));
        assert_eq!(g.rebuild(), 0);
    }

    #[test]
    fn congruence_after_union() {
        let mut g = EGraph::new(catalog());
        let fx = g.add_expr(&RaExpr::not(RaExpr::eq(RaExpr::col("t", "x"), RaExpr::int(1)))).unwrap();
        let fy = g.add_expr(&RaExpr::not(RaExpr::eq(RaExpr::col("t", "y"), RaExpr::int(1)))).unwrap();
        let x = g.add_expr(&RaExpr::col("t", "x")).unwrap();
        let y = g.add_expr(&RaExpr::col("t", "y")).unwrap();
        g.union(x, y);
        assert!(g.rebuild() >= 1);
        assert_eq!(g.find(fx), g.find(fy));
        assert_eq!(g.rebuild(), 0);
        g.audit().unwrap();
    }

    #[test]
    fn budget_breach_leaves_graph_untouched() {
        let mut g = EGraph::new(catalog()).with_node_limit(3);
        g.add_expr(&RaExpr::col("t", "x")).unwrap();
        let before = g.dump();
        let err = g.add_expr(&x_times_two_over_two()).unwrap_err();
        assert!(matches!(err, EGraphError::NodeBudgetExceeded { limit: 3, .. }));
        assert_eq!(g.dump(), before);
    }

    #[test]
    fn snapshot_from_other_graph_is_stale() {
        let mut g = EGraph::new(catalog());
        let h = EGraph::new(catalog());
        assert_eq!(g.restore(&h.snapshot()), Err(EGraphError::StaleSnapshot));
        let s = g.snapshot();
        g.add_expr(&RaExpr::col("t", "x")).unwrap();
        g.restore(&s).unwrap();
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn unknown_table_is_missing_statistics() {
        let mut g = EGraph::new(catalog());
        assert!(matches!(
            g.add_expr(&RaExpr::scan("nope")),
            Err(EGraphError::MissingStatistics(_))
        ));
    }

    #[test]
    fn kind_indices_are_dense() {
        let mut ops = vec![
            Op::Bool(true),
            Op::Int(0),
            Op::Str(String::new()),
            Op::Column(ColumnRef::new("a", "b")),
            Op::Table("t".into()),
            Op::Alias("a".into()),
            Op::Scan,
            Op::Filter,
            Op::Project,
            Op::List,
            Op::Join(JoinKind::Nested),
            Op::Join(JoinKind::Hash),
            Op::Derived,
            Op::Not,
        ];
        ops.extend(BinOp::ALL.map(Op::Bin));
        let mut idx: Vec<usize> = ops.iter().map(Op::kind_index).collect();
        idx.sort();
        assert_eq!(idx, (0..OP_KINDS).collect::<Vec<_>>());
    }
}
