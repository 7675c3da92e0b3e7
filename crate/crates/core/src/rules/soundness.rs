//! Randomized equivalence checking of rewrite rules against the
//! interpreter.
//!
//! Each trial builds a random schema and data set, instantiates the
//! rule's left-hand side with random well-scoped subterms, asks the
//! e-graph whether the rule (guard included) fires on it, and compares
//! both sides on the data.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RewriteRule;
use crate::egraph::{EGraph, ENode, Head, Op, Pattern};
use crate::ra::{
    eval_scalar, interpret, BinOp, Catalog, ColumnDef, ColumnRef, Database, RaExpr,
    Relation, TableDef, Type, Value,
};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    pub trials: usize,
    /// Trials where the rule fired and both sides were compared.
    pub checked: usize,
    pub guard_rejected: usize,
    /// Trials whose left-hand side failed to evaluate (overflow, division
    /// by zero) and so say nothing about the rule.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SoundnessError {
    #[error("rule {rule}: counterexample\n  lhs: {lhs}\n  rhs: {rhs}\n  {detail}")]
    Counterexample {
        rule: String,
        lhs: String,
        rhs: String,
        detail: String,
    },
    #[error("rule {rule}: no random instance satisfied the guard in {trials} trials")]
    GuardUninstantiable { rule: String, trials: usize },
}

/// Runs `trials` random instantiations of `rule`, failing on the first
/// one where the two sides disagree.
pub fn soundness_check(
    rule: &RewriteRule,
    trials: usize,
    seed: u64,
) -> Result<SoundnessReport, SoundnessError> {
    let shape = Shape::infer(&rule.lhs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SoundnessReport {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        match trial(rule, &shape, &mut rng)? {
            Outcome::Checked => report.checked += 1,
            Outcome::Rejected => report.guard_rejected += 1,
            Outcome::Skipped => report.skipped += 1,
        }
    }
    if report.checked == 0 {
        return Err(SoundnessError::GuardUninstantiable {
            rule: rule.name.to_string(),
            trials,
        });
    }
    Ok(report)
}

enum Outcome {
    Checked,
    Rejected,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarSort {
    Rel,
    Bool,
    Int,
    List,
    Alias,
}

/// Where a scalar or list variable may take its columns from.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Source {
    Rel(String),
    List(String),
    Root,
}

/// Sorts and scopes of the pattern variables.
struct Shape {
    root_is_relation: bool,
    vars: BTreeMap<String, (VarSort, Vec<Source>)>,
    order: Vec<String>,
    ops: BTreeMap<String, Vec<Op>>,
}

impl Shape {
    fn infer(lhs: &Pattern) -> Shape {
        let mut shape = Shape {
            root_is_relation: false,
            vars: BTreeMap::new(),
            order: Vec::new(),
            ops: BTreeMap::new(),
        };
        let root_sort = match lhs {
            Pattern::Node { head, .. } => head_sort(head),
            Pattern::Var(_) => VarSort::Rel,
        };
        shape.root_is_relation = root_sort == VarSort::Rel;
        shape.walk(lhs, root_sort, vec![Source::Root]);
        shape
    }

    fn record(&mut self, v: &str, sort: VarSort, scope: Vec<Source>) {
        if !self.vars.contains_key(v) {
            self.vars.insert(v.to_string(), (sort, scope));
            self.order.push(v.to_string());
        }
    }

    /// Returns the column sources of a relation-valued pattern.
    fn walk(&mut self, p: &Pattern, sort: VarSort, scope: Vec<Source>) -> Vec<Source> {
        let (head, children) = match p {
            Pattern::Var(v) => {
                self.record(v, sort, scope);
                return match sort {
                    VarSort::Rel => vec![Source::Rel(v.clone())],
                    VarSort::List => vec![Source::List(v.clone())],
                    _ => vec![],
                };
            }
            Pattern::Node { head, children } => (head, children),
        };
        let op = match head {
            Head::Op(o) => o.clone(),
            Head::OneOf(v, ops) => {
                self.ops.entry(v.clone()).or_insert_with(|| ops.clone());
                ops[0].clone()
            }
        };
        match op {
            Op::Filter => {
                let out = self.walk(&children[1], VarSort::Rel, vec![]);
                self.walk(&children[0], VarSort::Bool, out.clone());
                out
            }
            Op::Project => {
                let inner = self.walk(&children[1], VarSort::Rel, vec![]);
                self.walk(&children[0], VarSort::List, inner)
            }
            Op::Join(_) => {
                let mut out = self.walk(&children[1], VarSort::Rel, vec![]);
                out.extend(self.walk(&children[2], VarSort::Rel, vec![]));
                self.walk(&children[0], VarSort::Bool, out.clone());
                out
            }
            Op::Derived => {
                self.walk(&children[0], VarSort::Alias, vec![]);
                self.walk(&children[1], VarSort::Rel, vec![])
            }
            Op::Bin(b) => {
                let child = if b.is_logical() { VarSort::Bool } else { VarSort::Int };
                for c in children {
                    self.walk(c, child, scope.clone());
                }
                vec![]
            }
            Op::Not => {
                self.walk(&children[0], VarSort::Bool, scope);
                vec![]
            }
            _ => vec![],
        }
    }
}

fn head_sort(head: &Head) -> VarSort {
    let op = match head {
        Head::Op(o) => o,
        Head::OneOf(_, ops) => &ops[0],
    };
    match op {
        Op::Filter | Op::Project | Op::Join(_) | Op::Derived | Op::Scan => VarSort::Rel,
        Op::Bin(b) if b.is_arithmetic() => VarSort::Int,
        Op::Int(_) => VarSort::Int,
        _ => VarSort::Bool,
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Expr(RaExpr),
    List(Vec<RaExpr>),
    Alias(String),
}

struct World {
    catalog: Catalog,
    db: Database,
}

const MAX_ROWS: usize = 6;

fn random_world(rng: &mut ChaCha8Rng, tables: usize) -> World {
    let mut defs = Vec::new();
    let mut db = Database::new();
    for t in 0..tables {
        let name = format!("t{t}");
        let mut types = vec![Type::Int];
        for _ in 0..rng.gen_range(1..=2) {
            types.push(if rng.gen_bool(0.7) { Type::Int } else { Type::Str });
        }
        let n = rng.gen_range(0..=MAX_ROWS);
        let rows: Vec<Vec<Value>> = (0..n)
            .map(|_| {
                types
                    .iter()
                    .map(|ty| match ty {
                        Type::Str => Value::Str(["a", "b", "c"][rng.gen_range(0..3)].to_string()),
                        _ => Value::Int(rng.gen_range(-3..=3)),
                    })
                    .collect()
            })
            .collect();
        let columns: Vec<ColumnDef> = types
            .iter()
            .enumerate()
            .map(|(i, ty)| {
                let mut distinct: Vec<&Value> = rows.iter().map(|r| &r[i]).collect();
                distinct.sort();
                distinct.dedup();
                ColumnDef {
                    name: format!("c{i}"),
                    ty: *ty,
                    width_bytes: 8,
                    ndv: distinct.len().max(1) as u64,
                }
            })
            .collect();
        let refs = (0..types.len()).map(|i| ColumnRef::new(&name, format!("c{i}"))).collect();
        db.insert(&name, Relation::new(refs, rows.clone()));
        defs.push(TableDef {
            name,
            row_count: n as u64,
            columns,
        });
    }
    World {
        catalog: Catalog::new(defs).expect("generated catalog is valid"),
        db,
    }
}

/// Column generator over a typed scope.
struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
}

type Scope = Vec<Vec<(ColumnRef, Type)>>;

impl Gen<'_> {
    /// Columns of a random nonempty subset of the scope's sources.
    fn pick_sources(&mut self, scope: &Scope) -> Vec<(ColumnRef, Type)> {
        if scope.len() <= 1 {
            return scope.concat();
        }
        loop {
            let chosen: Vec<_> = scope
                .iter()
                .filter(|_| self.rng.gen_bool(0.5))
                .flatten()
                .cloned()
                .collect();
            if !chosen.is_empty() {
                return chosen;
            }
        }
    }

    fn int_column(&mut self, cols: &[(ColumnRef, Type)]) -> Option<RaExpr> {
        let ints: Vec<_> = cols.iter().filter(|(_, t)| *t == Type::Int).collect();
        ints.choose(self.rng).map(|(c, _)| RaExpr::Column(c.clone()))
    }

    fn int(&mut self, cols: &[(ColumnRef, Type)], depth: u32) -> RaExpr {
        match self.rng.gen_range(0..4) {
            0 | 1 => self
                .int_column(cols)
                .unwrap_or_else(|| RaExpr::int(self.rng.gen_range(-3..=3))),
            2 if depth > 0 => {
                let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul].choose(self.rng).unwrap();
                RaExpr::binary(op, self.int(cols, depth - 1), self.int(cols, depth - 1))
            }
            _ => RaExpr::int(self.rng.gen_range(-3..=3)),
        }
    }

    fn boolean(&mut self, scope: &Scope, depth: u32) -> RaExpr {
        let cols = self.pick_sources(scope);
        let cmp = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Gt, BinOp::Le, BinOp::Ge];
        match self.rng.gen_range(0..10) {
            0 | 1 if scope.len() >= 2 => {
                // Equality across two sources, the shape hash joins need.
                let mut idx: Vec<usize> = (0..scope.len()).collect();
                idx.shuffle(self.rng);
                match (self.int_column(&scope[idx[0]]), self.int_column(&scope[idx[1]])) {
                    (Some(a), Some(b)) => RaExpr::eq(a, b),
                    _ => RaExpr::bool(true),
                }
            }
            2 => {
                let strs: Vec<_> = cols.iter().filter(|(_, t)| *t == Type::Str).collect();
                match strs.choose(self.rng) {
                    Some((c, _)) => RaExpr::eq(
                        RaExpr::Column(c.clone()),
                        RaExpr::str(["a", "b", "z"][self.rng.gen_range(0..3)]),
                    ),
                    None => RaExpr::bool(self.rng.gen_bool(0.5)),
                }
            }
            3 | 4 if depth > 0 => {
                let op = if self.rng.gen_bool(0.5) { BinOp::And } else { BinOp::Or };
                RaExpr::binary(op, self.boolean(scope, depth - 1), self.boolean(scope, depth - 1))
            }
            5 if depth > 0 => RaExpr::not(self.boolean(scope, depth - 1)),
            6 if self.rng.gen_bool(0.3) => RaExpr::bool(self.rng.gen_bool(0.5)),
            _ => {
                let op = *cmp.choose(self.rng).unwrap();
                RaExpr::binary(op, self.int(&cols, 1), self.int(&cols, 0))
            }
        }
    }

    fn list(&mut self, cols: &[(ColumnRef, Type)]) -> Vec<RaExpr> {
        let mut out: Vec<RaExpr> = cols
            .iter()
            .filter(|_| self.rng.gen_bool(0.6))
            .map(|(c, _)| RaExpr::Column(c.clone()))
            .collect();
        if out.is_empty() {
            if let Some((c, _)) = cols.choose(self.rng) {
                out.push(RaExpr::Column(c.clone()));
            }
        }
        out
    }

    fn relation(&mut self, table: &str, catalog: &Catalog) -> RaExpr {
        let scan = RaExpr::scan(table);
        let cols = typed_columns(&scan, catalog);
        match self.rng.gen_range(0..5) {
            0 => RaExpr::filter(self.boolean(&vec![cols], 1), scan),
            1 => {
                // Keep the leading int column so joins stay possible.
                let mut list = vec![RaExpr::Column(cols[0].0.clone())];
                for (c, _) in &cols[1..] {
                    if self.rng.gen_bool(0.5) {
                        list.push(RaExpr::Column(c.clone()));
                    }
                }
                RaExpr::project(list, scan)
            }
            _ => scan,
        }
    }
}

fn typed_columns(plan: &RaExpr, catalog: &Catalog) -> Vec<(ColumnRef, Type)> {
    plan.type_check(catalog).expect("generated plans are well typed")
}

/// Random bindings for every variable and operator variable.
fn bind(
    shape: &Shape,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> (BTreeMap<String, Binding>, BTreeMap<String, Op>) {
    let mut ops = BTreeMap::new();
    for (v, choices) in &shape.ops {
        ops.insert(v.clone(), choices.choose(rng).unwrap().clone());
    }
    let mut bindings: BTreeMap<String, Binding> = BTreeMap::new();
    let mut next_table = 1;
    let mut gen = Gen { rng };
    for v in &shape.order {
        if shape.vars[v].0 == VarSort::Rel {
            let t = format!("t{next_table}");
            next_table += 1;
            bindings.insert(v.clone(), Binding::Expr(gen.relation(&t, &world.catalog)));
        }
    }
    let root_cols = typed_columns(&RaExpr::scan("t0"), &world.catalog);
    // Lists may scope later variables, so resolve in dependency order.
    let mut remaining: Vec<&String> =
        shape.order.iter().filter(|v| shape.vars[*v].0 != VarSort::Rel).collect();
    while !remaining.is_empty() {
        let before = remaining.len();
        remaining.retain(|v| {
            let (sort, sources) = &shape.vars[*v];
            let mut scope: Scope = Vec::new();
            for s in sources {
                let cols = match s {
                    Source::Root => root_cols.clone(),
                    Source::Rel(r) => match &bindings[r] {
                        Binding::Expr(e) => typed_columns(e, &world.catalog),
                        _ => unreachable!(),
                    },
                    Source::List(l) => match bindings.get(l) {
                        Some(Binding::List(items)) => items
                            .iter()
                            .map(|c| match c {
                                RaExpr::Column(c) => {
                                    let ty = world.catalog.column(c).unwrap().ty;
                                    (c.clone(), ty)
                                }
                                _ => unreachable!(),
                            })
                            .collect(),
                        _ => return true,
                    },
                };
                scope.push(cols);
            }
            let b = match sort {
                VarSort::Bool => Binding::Expr(gen.boolean(&scope, 2)),
                VarSort::Int => {
                    if gen.rng.gen_bool(0.4) {
                        Binding::Expr(RaExpr::int(gen.rng.gen_range(-3..=3)))
                    } else {
                        let cols = gen.pick_sources(&scope);
                        Binding::Expr(gen.int(&cols, 1))
                    }
                }
                VarSort::List => Binding::List(gen.list(&scope.concat())),
                VarSort::Alias => Binding::Alias(format!("d{}", gen.rng.gen_range(0..3))),
                VarSort::Rel => unreachable!(),
            };
            bindings.insert((*v).clone(), b);
            false
        });
        assert!(remaining.len() < before, "cyclic variable scopes");
    }
    (bindings, ops)
}

/// Builds the term for `p` under the given bindings.
fn to_expr(p: &Pattern, b: &BTreeMap<String, Binding>, ops: &BTreeMap<String, Op>) -> RaExpr {
    let (head, children) = match p {
        Pattern::Var(v) => match &b[v] {
            Binding::Expr(e) => return e.clone(),
            other => panic!("{v} bound to {other:?} used as a term"),
        },
        Pattern::Node { head, children } => (head, children),
    };
    let op = match head {
        Head::Op(o) => o.clone(),
        Head::OneOf(v, _) => ops[v].clone(),
    };
    let c = |i: usize| to_expr(&children[i], b, ops);
    match op {
        Op::Bool(v) => RaExpr::bool(v),
        Op::Int(v) => RaExpr::int(v),
        Op::Str(s) => RaExpr::str(&s),
        Op::Column(col) => RaExpr::Column(col),
        Op::Filter => RaExpr::filter(c(0), c(1)),
        Op::Project => {
            let cols = match &children[0] {
                Pattern::Var(v) => match &b[v] {
                    Binding::List(items) => items.clone(),
                    other => panic!("{v} bound to {other:?} used as a column list"),
                },
                other => panic!("unsupported column list pattern {other}"),
            };
            RaExpr::project(cols, c(1))
        }
        Op::Join(kind) => RaExpr::join(kind, c(0), c(1), c(2)),
        Op::Derived => {
            let alias = match &children[0] {
                Pattern::Var(v) => match &b[v] {
                    Binding::Alias(a) => a.clone(),
                    other => panic!("{v} bound to {other:?} used as an alias"),
                },
                Pattern::Node { head: Head::Op(Op::Alias(a)), .. } => a.clone(),
                other => panic!("unsupported alias pattern {other}"),
            };
            RaExpr::derived(alias, c(1))
        }
        Op::Bin(o) => RaExpr::binary(o, c(0), c(1)),
        Op::Not => RaExpr::not(c(0)),
        other => panic!("operator {} cannot appear in a rule", other.name()),
    }
}

fn trial(rule: &RewriteRule, shape: &Shape, rng: &mut ChaCha8Rng) -> Result<Outcome, SoundnessError> {
    let rel_vars = shape.vars.values().filter(|(s, _)| *s == VarSort::Rel).count();
    let world = random_world(rng, rel_vars + 1);
    let (bindings, ops) = bind(shape, &world, rng);
    let lhs = to_expr(&rule.lhs, &bindings, &ops);

    let mut g = EGraph::new(Arc::new(world.catalog.clone()));
    let root = g.add_expr(&lhs).expect("no node limit");
    let mut ids = BTreeMap::new();
    for (v, b) in &bindings {
        let id = match b {
            Binding::Expr(e) => g.add_expr(e).unwrap(),
            Binding::List(items) => {
                let children = items.iter().map(|e| g.add_expr(e).unwrap()).collect();
                g.lookup(&ENode::new(Op::List, children)).expect("list is part of the lhs")
            }
            Binding::Alias(a) => g.lookup(&ENode::leaf(Op::Alias(a.clone()))).expect("alias is part of the lhs"),
        };
        ids.insert(v.clone(), g.find(id));
    }
    let root = g.find(root);
    let fired = rule.matches(&g).into_iter().find(|(id, s, _)| {
        *id == root
            && s.vars().all(|(v, id)| ids.get(v) == Some(&id))
            && ops.iter().all(|(v, op)| s.op(v) == Some(op))
    });
    let Some((_, _, rhs_pattern)) = fired else {
        return Ok(Outcome::Rejected);
    };
    let rhs = to_expr(&rhs_pattern, &bindings, &ops);
    let fail = |detail: String| SoundnessError::Counterexample {
        rule: rule.name.to_string(),
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        detail,
    };

    if shape.root_is_relation {
        let Ok(left) = interpret(&lhs, &world.db) else {
            return Ok(Outcome::Skipped);
        };
        if let Err(e) = rhs.type_check(&world.catalog) {
            return Err(fail(format!("rhs is ill-formed: {e}")));
        }
        let right = interpret(&rhs, &world.db).map_err(|e| fail(format!("rhs failed: {e}")))?;
        if !left.bag_eq(&right) {
            return Err(fail(format!(
                "lhs has {} rows, rhs has {} rows (or the bags differ)",
                left.len(),
                right.len()
            )));
        }
        return Ok(Outcome::Checked);
    }

    let rel = world.db.get("t0").unwrap();
    let mut compared = false;
    for row in &rel.rows {
        let Ok(l) = eval_scalar(&lhs, rel, row) else { continue };
        let r = eval_scalar(&rhs, rel, row).map_err(|e| fail(format!("rhs failed on {row:?}: {e}")))?;
        if l != r {
            return Err(fail(format!("on row {row:?}: lhs = {l}, rhs = {r}")));
        }
        compared = true;
    }
    if rel.is_empty() && lhs.referenced_columns().is_empty() {
        let empty = Relation::empty(rel.columns.clone());
        if let Ok(l) = eval_scalar(&lhs, &empty, &[]) {
            let r = eval_scalar(&rhs, &empty, &[]).map_err(|e| fail(format!("rhs failed: {e}")))?;
            if l != r {
                return Err(fail(format!("lhs = {l}, rhs = {r}")));
            }
            compared = true;
        }
    }
    Ok(if compared { Outcome::Checked } else { Outcome::Skipped })
}
