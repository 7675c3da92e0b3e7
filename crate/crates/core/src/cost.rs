//! Statistics, selectivity estimation, the per-class analysis and the
//! operator cost model.
//!
//! Costs follow textbook asymptotics with every unit constant set to 1:
//! a scan of `n` rows and `m` columns costs `n·m`, a filter `n`, a
//! projection `n·|cols|`, a nested-loop join `n_l·n_r` and a hash join
//! `n_l + n_r + n_out`. Scalars and leaves are free.

use std::collections::BTreeSet;

use crate::egraph::{EGraphError, Op};
use crate::ra::{eval_binary, BinOp, Catalog, ColumnRef, RaExpr, Type, Value};

/// Selectivity assumed for predicates of unknown shape.
pub const DEFAULT_SELECTIVITY: f64 = 0.5;
/// Selectivity of a range comparison.
pub const RANGE_SELECTIVITY: f64 = 1.0 / 3.0;
/// Relative cardinality gap on merge that is logged as an estimator
/// inconsistency.
pub const MERGE_TOLERANCE: f64 = 0.05;

/// Per-operator unit costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub scan: f64,
    pub filter: f64,
    pub project: f64,
    pub nested_join: f64,
    pub hash_join: f64,
    /// Materializing an inline view, per row and column.
    pub derived: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            scan: 1.0,
            filter: 1.0,
            project: 1.0,
            nested_join: 1.0,
            hash_join: 1.0,
            derived: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Relation,
    Scalar,
    List,
    Table,
    Alias,
}

/// Facts shared by every term of an e-class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAnalysis {
    pub sort: Sort,
    /// Scalar type, for scalar classes.
    pub ty: Option<Type>,
    /// Estimated rows; base row count for table leaves; 0 for scalars.
    pub cardinality: f64,
    /// Output column count (relations, tables) or entry count (lists).
    pub width: usize,
    pub width_bytes: u64,
    /// Output columns of a relation, or columns referenced by a scalar or
    /// list.
    pub provenance: BTreeSet<ColumnRef>,
    /// Fraction of rows kept, for boolean scalars.
    pub selectivity: Option<f64>,
    /// Distinct values, for column references.
    pub ndv: Option<f64>,
    /// Known constant value of a scalar class.
    pub constant: Option<Value>,
    /// Cheapest known tree cost of any term in the class.
    pub best_cost: f64,
}

impl ClassAnalysis {
    fn empty(sort: Sort) -> Self {
        ClassAnalysis {
            sort,
            ty: None,
            cardinality: 0.0,
            width: 0,
            width_bytes: 0,
            provenance: BTreeSet::new(),
            selectivity: None,
            ndv: None,
            constant: None,
            best_cost: 0.0,
        }
    }

    fn scalar(ty: Type) -> Self {
        ClassAnalysis {
            ty: Some(ty),
            ..Self::empty(Sort::Scalar)
        }
    }
}

fn missing(what: String) -> EGraphError {
    EGraphError::MissingStatistics(what)
}

/// Analysis of a node from its children's analyses. `best_cost` is the
/// node's own cost plus its children's best costs.
pub fn analyze(
    op: &Op,
    children: &[&ClassAnalysis],
    duplicate_operands: bool,
    catalog: &Catalog,
    model: &CostModel,
) -> Result<ClassAnalysis, EGraphError> {
    let mut a = match op {
        Op::Table(t) => {
            let def = catalog
                .table(t)
                .ok_or_else(|| missing(format!("table `{t}` is not in the catalog")))?;
            ClassAnalysis {
                cardinality: def.row_count as f64,
                width: def.columns.len(),
                width_bytes: def.width_bytes(),
                provenance: def.columns.iter().map(|c| ColumnRef::new(t, &c.name)).collect(),
                ..ClassAnalysis::empty(Sort::Table)
            }
        }
        Op::Alias(_) => ClassAnalysis::empty(Sort::Alias),
        Op::Column(c) => {
            let def = catalog
                .column(c)
                .ok_or_else(|| missing(format!("column `{c}` is not in the catalog")))?;
            ClassAnalysis {
                width_bytes: def.width_bytes as u64,
                provenance: BTreeSet::from([c.clone()]),
                ndv: Some(def.ndv.max(1) as f64),
                ..ClassAnalysis::scalar(def.ty)
            }
        }
        Op::Int(i) => ClassAnalysis {
            constant: Some(Value::Int(*i)),
            ..ClassAnalysis::scalar(Type::Int)
        },
        Op::Str(s) => ClassAnalysis {
            constant: Some(Value::Str(s.clone())),
            ..ClassAnalysis::scalar(Type::Str)
        },
        Op::Bool(b) => ClassAnalysis {
            constant: Some(Value::Bool(*b)),
            selectivity: Some(if *b { 1.0 } else { 0.0 }),
            ..ClassAnalysis::scalar(Type::Bool)
        },
        Op::Scan => {
            let t = children[0];
            ClassAnalysis {
                cardinality: t.cardinality,
                width: t.width,
                width_bytes: t.width_bytes,
                provenance: t.provenance.clone(),
                ..ClassAnalysis::empty(Sort::Relation)
            }
        }
        Op::Filter => {
            let (p, input) = (children[0], children[1]);
            ClassAnalysis {
                cardinality: p.selectivity.unwrap_or(DEFAULT_SELECTIVITY) * input.cardinality,
                ..relation_like(input)
            }
        }
        Op::Project => {
            let (list, input) = (children[0], children[1]);
            ClassAnalysis {
                cardinality: input.cardinality,
                width: list.width,
                width_bytes: list.width_bytes,
                provenance: list.provenance.clone(),
                ..ClassAnalysis::empty(Sort::Relation)
            }
        }
        Op::List => ClassAnalysis {
            width: children.len(),
            width_bytes: children.iter().map(|c| c.width_bytes).sum(),
            provenance: children.iter().flat_map(|c| c.provenance.iter().cloned()).collect(),
            ..ClassAnalysis::empty(Sort::List)
        },
        Op::Join(_) => {
            let (p, l, r) = (children[0], children[1], children[2]);
            ClassAnalysis {
                cardinality: l.cardinality * r.cardinality * p.selectivity.unwrap_or(DEFAULT_SELECTIVITY),
                width: l.width + r.width,
                width_bytes: l.width_bytes + r.width_bytes,
                provenance: l.provenance.union(&r.provenance).cloned().collect(),
                ..ClassAnalysis::empty(Sort::Relation)
            }
        }
        Op::Derived => relation_like(children[1]),
        Op::Not => {
            let c = children[0];
            ClassAnalysis {
                provenance: c.provenance.clone(),
                constant: match &c.constant {
                    Some(Value::Bool(b)) => Some(Value::Bool(!b)),
                    _ => None,
                },
                selectivity: Some(1.0 - c.selectivity.unwrap_or(DEFAULT_SELECTIVITY)),
                ..ClassAnalysis::scalar(Type::Bool)
            }
        }
        Op::Bin(bop) => binary(*bop, children[0], children[1], duplicate_operands),
    };
    let own = model.op_cost(op, children);
    a.best_cost = own + children.iter().map(|c| c.best_cost).sum::<f64>();
    Ok(a)
}

fn relation_like(input: &ClassAnalysis) -> ClassAnalysis {
    ClassAnalysis {
        cardinality: input.cardinality,
        width: input.width,
        width_bytes: input.width_bytes,
        provenance: input.provenance.clone(),
        ..ClassAnalysis::empty(Sort::Relation)
    }
}

fn binary(op: BinOp, l: &ClassAnalysis, r: &ClassAnalysis, same: bool) -> ClassAnalysis {
    let ty = if op.is_arithmetic() { Type::Int } else { Type::Bool };
    let constant = match (&l.constant, &r.constant) {
        (Some(a), Some(b)) => eval_binary(op, a.clone(), b.clone()).ok(),
        _ => None,
    };
    let selectivity = if ty != Type::Bool {
        None
    } else if let Some(Value::Bool(b)) = constant {
        Some(if b { 1.0 } else { 0.0 })
    } else {
        let sl = l.selectivity.unwrap_or(DEFAULT_SELECTIVITY);
        let sr = r.selectivity.unwrap_or(DEFAULT_SELECTIVITY);
        Some(match op {
            BinOp::And if same => sl,
            BinOp::Or if same => sl,
            BinOp::And => sl * sr,
            BinOp::Or => sl + sr - sl * sr,
            BinOp::Eq => equality_selectivity(l, r),
            BinOp::Ne => 1.0 - equality_selectivity(l, r),
            _ => RANGE_SELECTIVITY,
        })
    };
    ClassAnalysis {
        provenance: l.provenance.union(&r.provenance).cloned().collect(),
        constant,
        selectivity,
        ..ClassAnalysis::scalar(ty)
    }
}

fn equality_selectivity(l: &ClassAnalysis, r: &ClassAnalysis) -> f64 {
    match (l.ndv, r.ndv) {
        (Some(a), Some(b)) => 1.0 / a.max(b),
        (Some(n), None) if r.constant.is_some() => 1.0 / n,
        (None, Some(n)) if l.constant.is_some() => 1.0 / n,
        _ => DEFAULT_SELECTIVITY,
    }
}

impl CostModel {
    /// Cost of one operator given its children's analyses.
    pub fn op_cost(&self, op: &Op, children: &[&ClassAnalysis]) -> f64 {
        match op {
            Op::Scan => self.scan * children[0].cardinality * children[0].width as f64,
            Op::Filter => self.filter * children[1].cardinality,
            Op::Project => self.project * children[1].cardinality * children[0].width as f64,
            Op::Join(crate::ra::JoinKind::Nested) => {
                self.nested_join * children[1].cardinality * children[2].cardinality
            }
            Op::Join(crate::ra::JoinKind::Hash) => {
                let (p, l, r) = (children[0], children[1], children[2]);
                let out = l.cardinality * r.cardinality * p.selectivity.unwrap_or(DEFAULT_SELECTIVITY);
                self.hash_join * (l.cardinality + r.cardinality + out)
            }
            Op::Derived => self.derived * children[1].cardinality * children[1].width as f64,
            _ => 0.0,
        }
    }
}

/// Componentwise merge of two analyses of the same class: minimum for the
/// estimates, union for provenance.
pub fn merge_analysis(a: &ClassAnalysis, b: &ClassAnalysis) -> ClassAnalysis {
    debug_assert_eq!(a.sort, b.sort, "merging classes of different sorts");
    let min_opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    if let (Some(x), Some(y)) = (&a.constant, &b.constant) {
        if x != y {
            log::warn!("merging classes with different constants {x} and {y}");
        }
    }
    ClassAnalysis {
        sort: a.sort,
        ty: a.ty.or(b.ty),
        cardinality: a.cardinality.min(b.cardinality),
        width: a.width.min(b.width),
        width_bytes: a.width_bytes.min(b.width_bytes),
        provenance: a.provenance.union(&b.provenance).cloned().collect(),
        selectivity: min_opt(a.selectivity, b.selectivity),
        ndv: min_opt(a.ndv, b.ndv),
        constant: a.constant.clone().or_else(|| b.constant.clone()),
        best_cost: a.best_cost.min(b.best_cost),
    }
}

/// True if two cardinality estimates differ by more than [`MERGE_TOLERANCE`].
pub fn cardinality_disagrees(a: &ClassAnalysis, b: &ClassAnalysis) -> bool {
    let hi = a.cardinality.max(b.cardinality);
    hi > 0.0 && (a.cardinality - b.cardinality).abs() / hi > MERGE_TOLERANCE
}

/// Estimated fraction of rows satisfying `pred`.
pub fn selectivity(pred: &RaExpr, catalog: &Catalog) -> f64 {
    scalar_analysis(pred, catalog)
        .ok()
        .and_then(|a| a.selectivity)
        .unwrap_or(DEFAULT_SELECTIVITY)
}

fn scalar_analysis(e: &RaExpr, catalog: &Catalog) -> Result<ClassAnalysis, EGraphError> {
    let model = CostModel::default();
    let (op, kids): (Op, Vec<&RaExpr>) = match e {
        RaExpr::Column(c) => (Op::Column(c.clone()), vec![]),
        RaExpr::Const(Value::Int(i)) => (Op::Int(*i), vec![]),
        RaExpr::Const(Value::Str(s)) => (Op::Str(s.clone()), vec![]),
        RaExpr::Const(Value::Bool(b)) => (Op::Bool(*b), vec![]),
        RaExpr::Binary { op, left, right } => (Op::Bin(*op), vec![left, right]),
        RaExpr::Not(inner) => (Op::Not, vec![inner]),
        _ => return Err(EGraphError::Malformed("plan in scalar position".into())),
    };
    let analyses = kids
        .iter()
        .map(|k| scalar_analysis(k, catalog))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&ClassAnalysis> = analyses.iter().collect();
    let same = kids.len() == 2 && kids[0] == kids[1];
    analyze(&op, &refs, same, catalog, &model)
}

/// Cost of a plan tree: the sum of [`CostModel::op_cost`] over its nodes,
/// computed directly on the tree (no e-graph involved).
pub fn tree_cost(expr: &RaExpr, catalog: &Catalog, model: &CostModel) -> Result<f64, EGraphError> {
    Ok(tree_walk(expr, catalog, model)?.1)
}

/// Returns (analysis, cost) of a subtree.
fn tree_walk(e: &RaExpr, cat: &Catalog, model: &CostModel) -> Result<(ClassAnalysis, f64), EGraphError> {
    let leaf = |op: Op| -> Result<(ClassAnalysis, f64), EGraphError> {
        Ok((analyze(&op, &[], false, cat, model)?, 0.0))
    };
    let (op, kids): (Op, Vec<(ClassAnalysis, f64)>) = match e {
        RaExpr::Scan(t) => (Op::Scan, vec![leaf(Op::Table(t.clone()))?]),
        RaExpr::Filter { pred, input } => (
            Op::Filter,
            vec![tree_walk(pred, cat, model)?, tree_walk(input, cat, model)?],
        ),
        RaExpr::Project { columns, input } => {
            let cols = columns
                .iter()
                .map(|c| tree_walk(c, cat, model))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&ClassAnalysis> = cols.iter().map(|(a, _)| a).collect();
            let list = analyze(&Op::List, &refs, false, cat, model)?;
            (Op::Project, vec![(list, 0.0), tree_walk(input, cat, model)?])
        }
        RaExpr::Join {
            kind,
            pred,
            left,
            right,
        } => (
            Op::Join(*kind),
            vec![
                tree_walk(pred, cat, model)?,
                tree_walk(left, cat, model)?,
                tree_walk(right, cat, model)?,
            ],
        ),
        RaExpr::Derived { alias, input } => (
            Op::Derived,
            vec![leaf(Op::Alias(alias.clone()))?, tree_walk(input, cat, model)?],
        ),
        scalar => return Ok((scalar_analysis(scalar, cat)?, 0.0)),
    };
    let refs: Vec<&ClassAnalysis> = kids.iter().map(|(a, _)| a).collect();
    let a = analyze(&op, &refs, false, cat, model)?;
    let cost = model.op_cost(&op, &refs) + kids.iter().map(|(_, c)| c).sum::<f64>();
    Ok((a, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ra::{ColumnDef, JoinKind, TableDef};

    fn two_filter_catalog() -> Catalog {
        Catalog::new(vec![TableDef {
            name: "t".into(),
            row_count: 1000,
            columns: vec![
                ColumnDef { name: "c1".into(), ty: Type::Bool, width_bytes: 1, ndv: 2 },
                ColumnDef { name: "c2".into(), ty: Type::Bool, width_bytes: 1, ndv: 2 },
                ColumnDef { name: "c3".into(), ty: Type::Int, width_bytes: 8, ndv: 100 },
                ColumnDef { name: "c4".into(), ty: Type::Int, width_bytes: 8, ndv: 100 },
            ],
        }])
        .unwrap()
    }

    fn c(n: &str) -> RaExpr {
        RaExpr::col("t", n)
    }

    fn is_true(n: &str) -> RaExpr {
        RaExpr::eq(c(n), RaExpr::bool(true))
    }

    #[test]
    fn selectivity_rules() {
        let cat = two_filter_catalog();
        assert_eq!(selectivity(&RaExpr::bool(true), &cat), 1.0);
        assert_eq!(selectivity(&c("c1"), &cat), DEFAULT_SELECTIVITY);
        assert_eq!(selectivity(&RaExpr::eq(c("c3"), RaExpr::int(5)), &cat), 0.01);
        assert_eq!(selectivity(&RaExpr::eq(c("c3"), c("c4")), &cat), 0.01);
        assert_eq!(
            selectivity(&RaExpr::binary(BinOp::Lt, c("c3"), RaExpr::int(5)), &cat),
            RANGE_SELECTIVITY
        );
        assert_eq!(selectivity(&RaExpr::and(is_true("c1"), is_true("c2")), &cat), 0.25);
        assert_eq!(selectivity(&RaExpr::and(is_true("c1"), is_true("c1")), &cat), 0.5);
        assert_eq!(selectivity(&RaExpr::binary(BinOp::Or, is_true("c1"), is_true("c2")), &cat), 0.75);
        assert_eq!(selectivity(&RaExpr::not(is_true("c1")), &cat), 0.5);
        assert!((selectivity(&RaExpr::binary(BinOp::Ne, c("c3"), RaExpr::int(1)), &cat) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn scan_and_filter_estimates() {
        let cat = two_filter_catalog();
        let m = CostModel::default();
        let scan = tree_walk(&RaExpr::scan("t"), &cat, &m).unwrap();
        assert_eq!((scan.0.cardinality, scan.0.width), (1000.0, 4));
        assert_eq!(scan.1, 4000.0);
        let f = tree_walk(&RaExpr::filter(is_true("c1"), RaExpr::scan("t")), &cat, &m).unwrap();
        assert_eq!(f.0.cardinality, 500.0);
        let t = tree_walk(&RaExpr::filter(RaExpr::bool(true), RaExpr::scan("t")), &cat, &m).unwrap();
        assert_eq!((t.0.cardinality, t.0.width), (1000.0, 4));
    }

    /// Hand totals: scan 1000·4 = 4000; σ over 1000 rows = 1000; second σ
    /// over 500 rows = 500; π over 250 rows × 4 columns = 1000.
    #[test]
    fn merged_filter_is_cheaper() {
        let cat = two_filter_catalog();
        let m = CostModel::default();
        let all: Vec<RaExpr> = ["c1", "c2", "c3", "c4"].iter().map(|n| c(n)).collect();
        let nested = RaExpr::filter(is_true("c1"), RaExpr::filter(is_true("c2"), RaExpr::scan("t")));
        let merged = RaExpr::filter(RaExpr::and(is_true("c1"), is_true("c2")), RaExpr::scan("t"));
        assert_eq!(tree_cost(&nested, &cat, &m).unwrap(), 5500.0);
        assert_eq!(tree_cost(&merged, &cat, &m).unwrap(), 5000.0);
        assert_eq!(tree_cost(&RaExpr::project(all.clone(), nested), &cat, &m).unwrap(), 6500.0);
        assert_eq!(tree_cost(&RaExpr::project(all, merged), &cat, &m).unwrap(), 6000.0);
    }

    #[test]
    fn join_costs() {
        let cat = two_filter_catalog();
        let m = CostModel::default();
        let scan = tree_walk(&RaExpr::scan("t"), &cat, &m).unwrap().0;
        let p = scalar_analysis(&RaExpr::eq(c("c3"), c("c4")), &cat).unwrap();
        let nl = m.op_cost(&Op::Join(JoinKind::Nested), &[&p, &scan, &scan]);
        let hj = m.op_cost(&Op::Join(JoinKind::Hash), &[&p, &scan, &scan]);
        assert_eq!(nl, 1_000_000.0);
        assert_eq!(hj, 2000.0 + 10_000.0);
        assert_eq!(m.op_cost(&Op::Project, &[&analyze(&Op::List, &[], false, &cat, &m).unwrap(), &scan]), 0.0);
    }

    #[test]
    fn merge_takes_minimum_cost() {
        let mut a = ClassAnalysis::empty(Sort::Relation);
        a.cardinality = 500.0;
        a.width = 4;
        a.best_cost = 5500.0;
        let mut b = a.clone();
        b.best_cost = 5000.0;
        assert_eq!(merge_analysis(&a, &a), a);
        assert_eq!(merge_analysis(&a, &b).best_cost, 5000.0);
        assert!(!cardinality_disagrees(&a, &b));
        b.cardinality = 400.0;
        assert!(cardinality_disagrees(&a, &b));
    }
}
