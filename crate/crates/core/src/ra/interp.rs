//! Bag-semantics interpreter: the ground truth for plan equivalence.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{BinOp, Catalog, ColumnRef, RaExpr, Type, Value};

/// Upper bound on nested-loop pairs a single join may inspect.
const MAX_JOIN_PAIRS: u64 = 200_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("table `{0}` is not in the database")]
    UnknownTable(String),
    #[error("column `{0}` is not in scope")]
    UnknownColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("expected a plan, found a scalar expression")]
    NotAPlan,
    #[error("join would inspect {0} row pairs")]
    TooLarge(u64),
    #[error("data error: {0}")]
    Data(String),
}

/// A multiset of rows over named columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub columns: Vec<ColumnRef>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(columns: Vec<ColumnRef>, rows: Vec<Vec<Value>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
        Relation { columns, rows }
    }

    pub fn empty(columns: Vec<ColumnRef>) -> Self {
        Relation {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Columns sorted by name, rows sorted. Two relations are equal as bags
    /// iff their canonical forms are identical.
    pub fn canonical(&self) -> Relation {
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.sort_by(|&a, &b| self.columns[a].cmp(&self.columns[b]));
        let columns = order.iter().map(|&i| self.columns[i].clone()).collect();
        let mut rows: Vec<Vec<Value>> = self
            .rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i].clone()).collect())
            .collect();
        rows.sort();
        Relation { columns, rows }
    }

    pub fn bag_eq(&self, other: &Relation) -> bool {
        self.rows.len() == other.rows.len() && self.canonical() == other.canonical()
    }

    fn index_of(&self, c: &ColumnRef) -> Option<usize> {
        self.columns.iter().position(|x| x == c)
    }
}

/// Base tables by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    pub tables: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: Relation) {
        self.tables.insert(name.into(), rel);
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.tables.get(name)
    }

    /// Loads `<dir>/<table>.csv` for every catalog table. The header row
    /// must list the catalog's columns in order.
    pub fn load_csv_dir(dir: impl AsRef<Path>, catalog: &Catalog) -> Result<Self, InterpError> {
        let mut db = Database::new();
        for t in &catalog.tables {
            let path = dir.as_ref().join(format!("{}.csv", t.name));
            let mut rdr = csv::Reader::from_path(&path)
                .map_err(|e| InterpError::Data(format!("{}: {e}", path.display())))?;
            let header: Vec<String> = rdr
                .headers()
                .map_err(|e| InterpError::Data(e.to_string()))?
                .iter()
                .map(str::to_string)
                .collect();
            let expected: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
            if header != expected {
                return Err(InterpError::Data(format!(
                    "{}: header {header:?} does not match catalog {expected:?}",
                    path.display()
                )));
            }
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(|e| InterpError::Data(e.to_string()))?;
                let row = rec
                    .iter()
                    .zip(&t.columns)
                    .map(|(field, col)| parse_field(field, col.ty))
                    .collect::<Result<Vec<_>, _>>()?;
                rows.push(row);
            }
            let columns = t
                .columns
                .iter()
                .map(|c| ColumnRef::new(&t.name, &c.name))
                .collect();
            db.insert(&t.name, Relation::new(columns, rows));
        }
        Ok(db)
    }

    pub fn write_csv_dir(&self, dir: impl AsRef<Path>) -> Result<(), InterpError> {
        std::fs::create_dir_all(dir.as_ref()).map_err(|e| InterpError::Data(e.to_string()))?;
        for (name, rel) in &self.tables {
            let path = dir.as_ref().join(format!("{name}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| InterpError::Data(e.to_string()))?;
            w.write_record(rel.columns.iter().map(|c| c.column.as_str()))
                .map_err(|e| InterpError::Data(e.to_string()))?;
            for row in &rel.rows {
                w.write_record(row.iter().map(|v| match v {
                    Value::Int(i) => i.to_string(),
                    Value::Str(s) => s.clone(),
                    Value::Bool(b) => b.to_string(),
                }))
                .map_err(|e| InterpError::Data(e.to_string()))?;
            }
            w.flush().map_err(|e| InterpError::Data(e.to_string()))?;
        }
        Ok(())
    }
}

fn parse_field(field: &str, ty: Type) -> Result<Value, InterpError> {
    match ty {
        Type::Int => field
            .parse()
            .map(Value::Int)
            .map_err(|_| InterpError::Data(format!("`{field}` is not an integer"))),
        Type::Str => Ok(Value::Str(field.to_string())),
        Type::Bool => match field.to_ascii_lowercase().as_str() {
            "true" | "t" | "1" => Ok(Value::Bool(true)),
            "false" | "f" | "0" => Ok(Value::Bool(false)),
            _ => Err(InterpError::Data(format!("`{field}` is not a boolean"))),
        },
    }
}

/// Evaluates a plan over `db` with bag semantics.
pub fn interpret(expr: &RaExpr, db: &Database) -> Result<Relation, InterpError> {
    match expr {
        RaExpr::Scan(t) => db
            .get(t)
            .cloned()
            .ok_or_else(|| InterpError::UnknownTable(t.clone())),
        RaExpr::Filter { pred, input } => {
            if matches!(**input, RaExpr::Join { .. }) {
                return join_tree(Some(pred), input, db);
            }
            let rel = interpret(input, db)?;
            let p = compile(pred, &rel)?;
            let mut rows = Vec::new();
            for row in rel.rows {
                if truthy(&p.eval(&row)?)? {
                    rows.push(row);
                }
            }
            Ok(Relation::new(rel.columns, rows))
        }
        RaExpr::Project { columns, input } => {
            let rel = interpret(input, db)?;
            let idx = columns
                .iter()
                .map(|c| match c {
                    RaExpr::Column(r) => rel
                        .index_of(r)
                        .ok_or_else(|| InterpError::UnknownColumn(r.qualified())),
                    other => Err(InterpError::TypeMismatch(format!(
                        "projection entry {other} is not a column"
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let cols = idx.iter().map(|&i| rel.columns[i].clone()).collect();
            let rows = rel
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect();
            Ok(Relation::new(cols, rows))
        }
        RaExpr::Join { .. } => join_tree(None, expr, db),
        RaExpr::Derived { input, .. } => interpret(input, db),
        _ => Err(InterpError::NotAPlan),
    }
}

fn flatten_joins<'a>(e: &'a RaExpr, leaves: &mut Vec<&'a RaExpr>, preds: &mut Vec<&'a RaExpr>) {
    match e {
        RaExpr::Join {
            pred, left, right, ..
        } => {
            preds.extend(conjuncts(pred));
            flatten_joins(left, leaves, preds);
            flatten_joins(right, leaves, preds);
        }
        // A selection inside the tree is one more conjunct over the product.
        RaExpr::Filter { pred, input } if matches!(**input, RaExpr::Join { .. } | RaExpr::Filter { .. }) => {
            preds.extend(conjuncts(pred));
            flatten_joins(input, leaves, preds);
        }
        other => leaves.push(other),
    }
}

/// Evaluates `σ(filter, join tree)` as a filtered product of the tree's
/// non-join inputs. Inputs are joined greedily, preferring one linked to
/// the partial result by an equality, and every conjunct is applied as
/// soon as its columns are present. The result keeps the tree's column
/// order.
fn join_tree(filter: Option<&RaExpr>, tree: &RaExpr, db: &Database) -> Result<Relation, InterpError> {
    let mut leaves = Vec::new();
    let mut preds = Vec::new();
    flatten_joins(tree, &mut leaves, &mut preds);
    if let Some(f) = filter {
        preds.extend(conjuncts(f));
    }
    let rels = leaves
        .iter()
        .map(|l| interpret(l, db))
        .collect::<Result<Vec<_>, _>>()?;
    let order: Vec<ColumnRef> = rels.iter().flat_map(|r| r.columns.iter().cloned()).collect();
    let needs: Vec<std::collections::BTreeSet<ColumnRef>> = preds.iter().map(|p| p.referenced_columns()).collect();
    let mut pending: Vec<usize> = (0..preds.len()).collect();
    let has_all = |rel: &Relation, i: usize| needs[i].iter().all(|c| rel.index_of(c).is_some());
    let links = |a: &Relation, b: &Relation, i: usize| {
        matches!(preds[i], RaExpr::Binary { op: BinOp::Eq, left, right }
            if matches!((&**left, &**right), (RaExpr::Column(x), RaExpr::Column(y))
                if (a.index_of(x).is_some() && b.index_of(y).is_some())
                    || (a.index_of(y).is_some() && b.index_of(x).is_some())))
    };
    let mut remaining: Vec<usize> = (1..rels.len()).collect();
    let mut acc = rels[0].clone();
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .position(|&j| pending.iter().any(|&i| links(&acc, &rels[j], i)))
            .unwrap_or(0);
        let next = &rels[remaining.remove(pos)];
        let mut both = acc.columns.clone();
        both.extend(next.columns.iter().cloned());
        let both = Relation::empty(both);
        let (now, later): (Vec<usize>, Vec<usize>) = pending.iter().partition(|&&i| has_all(&both, i));
        pending = later;
        let pred = now
            .iter()
            .map(|&i| preds[i].clone())
            .reduce(RaExpr::and)
            .unwrap_or(RaExpr::Const(Value::Bool(true)));
        acc = join(&pred, &acc, next)?;
    }
    if !pending.is_empty() {
        // Conjuncts naming columns outside the tree; compiling reports them.
        let rest = pending.iter().map(|&i| preds[i].clone()).reduce(RaExpr::and).expect("nonempty");
        let p = compile(&rest, &acc)?;
        let mut rows = Vec::new();
        for row in std::mem::take(&mut acc.rows) {
            if truthy(&p.eval(&row)?)? {
                rows.push(row);
            }
        }
        acc.rows = rows;
    }
    let idx: Vec<usize> = order.iter().map(|c| acc.index_of(c).expect("joined column")).collect();
    let rows = acc.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect();
    Ok(Relation::new(order, rows))
}

fn join(pred: &RaExpr, l: &Relation, r: &Relation) -> Result<Relation, InterpError> {
    let mut columns = l.columns.clone();
    columns.extend(r.columns.iter().cloned());
    let combined = Relation::empty(columns);
    let p = compile(pred, &combined)?;

    // Equi-conjuncts `lcol = rcol` become hash keys; the full predicate is
    // still evaluated on every candidate pair.
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for conj in conjuncts(pred) {
        if let RaExpr::Binary {
            op: BinOp::Eq,
            left: a,
            right: b,
        } = conj
        {
            if let (RaExpr::Column(a), RaExpr::Column(b)) = (&**a, &**b) {
                match (l.index_of(a), r.index_of(b), l.index_of(b), r.index_of(a)) {
                    (Some(li), Some(ri), _, _) => keys.push((li, ri)),
                    (_, _, Some(li), Some(ri)) => keys.push((li, ri)),
                    _ => {}
                }
            }
        }
    }

    let mut rows = Vec::new();
    let mut emit = |lr: &Vec<Value>, rr: &Vec<Value>| -> Result<(), InterpError> {
        let mut row = Vec::with_capacity(lr.len() + rr.len());
        row.extend(lr.iter().cloned());
        row.extend(rr.iter().cloned());
        if truthy(&p.eval(&row)?)? {
            rows.push(row);
        }
        Ok(())
    };
    if keys.is_empty() {
        let pairs = l.rows.len() as u64 * r.rows.len() as u64;
        if pairs > MAX_JOIN_PAIRS {
            return Err(InterpError::TooLarge(pairs));
        }
        for lr in &l.rows {
            for rr in &r.rows {
                emit(lr, rr)?;
            }
        }
    } else {
        let mut table: HashMap<Vec<&Value>, Vec<usize>> = HashMap::new();
        for (i, rr) in r.rows.iter().enumerate() {
            table
                .entry(keys.iter().map(|&(_, ri)| &rr[ri]).collect())
                .or_default()
                .push(i);
        }
        for lr in &l.rows {
            let key: Vec<&Value> = keys.iter().map(|&(li, _)| &lr[li]).collect();
            if let Some(matches) = table.get(&key) {
                for &i in matches {
                    emit(lr, &r.rows[i])?;
                }
            }
        }
    }
    let mut out = combined;
    out.rows = rows;
    Ok(out)
}

fn conjuncts(e: &RaExpr) -> Vec<&RaExpr> {
    match e {
        RaExpr::Binary {
            op: BinOp::And,
            left,
            right,
        } => {
            let mut v = conjuncts(left);
            v.extend(conjuncts(right));
            v
        }
        other => vec![other],
    }
}

fn truthy(v: &Value) -> Result<bool, InterpError> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(InterpError::TypeMismatch(format!(
            "predicate evaluated to non-boolean {other}"
        ))),
    }
}

/// A scalar expression with column references bound to row positions.
#[derive(Debug, Clone)]
pub(crate) enum Compiled {
    Col(usize),
    Const(Value),
    Bin(BinOp, Box<Compiled>, Box<Compiled>),
    Not(Box<Compiled>),
}

pub(crate) fn compile(e: &RaExpr, rel: &Relation) -> Result<Compiled, InterpError> {
    Ok(match e {
        RaExpr::Column(c) => Compiled::Col(
            rel.index_of(c)
                .ok_or_else(|| InterpError::UnknownColumn(c.qualified()))?,
        ),
        RaExpr::Const(v) => Compiled::Const(v.clone()),
        RaExpr::Binary { op, left, right } => Compiled::Bin(
            *op,
            Box::new(compile(left, rel)?),
            Box::new(compile(right, rel)?),
        ),
        RaExpr::Not(inner) => Compiled::Not(Box::new(compile(inner, rel)?)),
        _ => {
            return Err(InterpError::TypeMismatch(
                "plan operator used as a scalar".into(),
            ))
        }
    })
}

impl Compiled {
    pub(crate) fn eval(&self, row: &[Value]) -> Result<Value, InterpError> {
        match self {
            Compiled::Col(i) => Ok(row[*i].clone()),
            Compiled::Const(v) => Ok(v.clone()),
            Compiled::Not(inner) => match inner.eval(row)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                other => Err(InterpError::TypeMismatch(format!("not applied to {other}"))),
            },
            Compiled::Bin(op, a, b) => eval_binary(*op, a.eval(row)?, b.eval(row)?),
        }
    }
}

/// Applies a binary operator to two values.
pub fn eval_binary(op: BinOp, a: Value, b: Value) -> Result<Value, InterpError> {
    use Value::*;
    if op.is_arithmetic() {
        let (Int(x), Int(y)) = (&a, &b) else {
            return Err(InterpError::TypeMismatch(format!(
                "{a} {} {b} needs integers",
                op.symbol()
            )));
        };
        let (x, y) = (*x, *y);
        let overflow = || InterpError::Arithmetic(format!("{x} {} {y} overflows", op.symbol()));
        let r = match op {
            BinOp::Add => x.checked_add(y).ok_or_else(overflow)?,
            BinOp::Sub => x.checked_sub(y).ok_or_else(overflow)?,
            BinOp::Mul => x.checked_mul(y).ok_or_else(overflow)?,
            BinOp::Div => {
                if y == 0 {
                    return Err(InterpError::Arithmetic("division by zero".into()));
                }
                x.checked_div(y).ok_or_else(overflow)?
            }
            BinOp::Shl => {
                if !(0..63).contains(&y) {
                    return Err(overflow());
                }
                x.checked_mul(1i64 << y).ok_or_else(overflow)?
            }
            _ => unreachable!(),
        };
        return Ok(Int(r));
    }
    if op.is_logical() {
        let (Bool(x), Bool(y)) = (&a, &b) else {
            return Err(InterpError::TypeMismatch(format!(
                "{a} {} {b} needs booleans",
                op.symbol()
            )));
        };
        return Ok(Bool(if op == BinOp::And { *x && *y } else { *x || *y }));
    }
    if a.ty() != b.ty() {
        return Err(InterpError::TypeMismatch(format!(
            "cannot compare {a} {} {b}",
            op.symbol()
        )));
    }
    let ord = a.cmp(&b);
    Ok(Bool(match op {
        BinOp::Eq => ord.is_eq(),
        BinOp::Ne => ord.is_ne(),
        BinOp::Lt => ord.is_lt(),
        BinOp::Gt => ord.is_gt(),
        BinOp::Le => ord.is_le(),
        BinOp::Ge => ord.is_ge(),
        _ => unreachable!(),
    }))
}

/// Evaluates a scalar expression against one row of `rel`.
pub fn eval_scalar(e: &RaExpr, rel: &Relation, row: &[Value]) -> Result<Value, InterpError> {
    compile(e, rel)?.eval(row)
}
