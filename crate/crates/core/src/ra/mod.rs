//! Relational-algebra IR shared by the parser, the interpreter, the SQL
//! emitter and the e-graph.
//!
//! Plans and scalar expressions live in one tree type, [`RaExpr`]. Column
//! references are always resolved to their base table (`table.column`), so
//! a plan never depends on the aliases used in the SQL text it came from.

mod catalog;
mod emit;
mod interp;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

pub use catalog::{Catalog, CatalogError, ColumnDef, TableDef};
pub use emit::{emit_sql, Dialect, EmitError};
pub use interp::{eval_binary, eval_scalar, interpret, Database, InterpError, Relation};
pub use parser::{parse_sql, ParseError};

/// Primitive scalar types. Floats are deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Int,
    Str,
    Bool,
}

impl Type {
    pub fn name(self) -> &'static str {
        match self {
            Type::Int => "int",
            Type::Str => "str",
            Type::Bool => "bool",
        }
    }

    pub fn from_name(s: &str) -> Option<Type> {
        match s.to_ascii_lowercase().as_str() {
            "int" | "integer" | "bigint" => Some(Type::Int),
            "str" | "string" | "text" | "varchar" => Some(Type::Str),
            "bool" | "boolean" => Some(Type::Bool),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Str(String),
    Bool(bool),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Str(_) => Type::Str,
            Value::Bool(_) => Type::Bool,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Binary scalar operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Shl,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 13] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Shl,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Le,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Shl => "<<",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Shl)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negated_comparison(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Ge => BinOp::Lt,
            BinOp::Gt => BinOp::Le,
            BinOp::Le => BinOp::Gt,
            _ => return None,
        })
    }
}

/// Physical flavour of a join. Both compute the same inner join.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinKind {
    /// Logical join, costed as a nested loop.
    Nested,
    Hash,
}

/// A column resolved to its base table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }

    /// Parses `table.column`.
    pub fn parse_qualified(s: &str) -> Option<Self> {
        let (t, c) = s.split_once('.')?;
        if t.is_empty() || c.is_empty() {
            return None;
        }
        Some(ColumnRef::new(t, c))
    }

    pub fn qualified(&self) -> String {
        format!("{}.{}", self.table, self.column)
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// Relational-algebra term: plan operators and scalar expressions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RaExpr {
    Scan(String),
    Filter {
        pred: Box<RaExpr>,
        input: Box<RaExpr>,
    },
    Project {
        columns: Vec<RaExpr>,
        input: Box<RaExpr>,
    },
    Join {
        kind: JoinKind,
        pred: Box<RaExpr>,
        left: Box<RaExpr>,
        right: Box<RaExpr>,
    },
    /// An inline view. Semantically the identity; aliases are resolved at
    /// parse time, the alias is kept for printing.
    Derived {
        alias: String,
        input: Box<RaExpr>,
    },
    Column(ColumnRef),
    Const(Value),
    Binary {
        op: BinOp,
        left: Box<RaExpr>,
        right: Box<RaExpr>,
    },
    Not(Box<RaExpr>),
}

impl RaExpr {
    pub fn scan(t: impl Into<String>) -> Self {
        RaExpr::Scan(t.into())
    }

    pub fn filter(pred: RaExpr, input: RaExpr) -> Self {
        RaExpr::Filter {
            pred: Box::new(pred),
            input: Box::new(input),
        }
    }

    pub fn project(columns: Vec<RaExpr>, input: RaExpr) -> Self {
        RaExpr::Project {
            columns,
            input: Box::new(input),
        }
    }

    pub fn join(kind: JoinKind, pred: RaExpr, left: RaExpr, right: RaExpr) -> Self {
        RaExpr::Join {
            kind,
            pred: Box::new(pred),
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn derived(alias: impl Into<String>, input: RaExpr) -> Self {
        RaExpr::Derived {
            alias: alias.into(),
            input: Box::new(input),
        }
    }

    pub fn col(table: &str, column: &str) -> Self {
        RaExpr::Column(ColumnRef::new(table, column))
    }

    pub fn int(v: i64) -> Self {
        RaExpr::Const(Value::Int(v))
    }

    pub fn str(s: &str) -> Self {
        RaExpr::Const(Value::Str(s.to_string()))
    }

    pub fn bool(b: bool) -> Self {
        RaExpr::Const(Value::Bool(b))
    }

    pub fn binary(op: BinOp, left: RaExpr, right: RaExpr) -> Self {
        RaExpr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn and(left: RaExpr, right: RaExpr) -> Self {
        RaExpr::binary(BinOp::And, left, right)
    }

    pub fn eq(left: RaExpr, right: RaExpr) -> Self {
        RaExpr::binary(BinOp::Eq, left, right)
    }

    pub fn not(e: RaExpr) -> Self {
        RaExpr::Not(Box::new(e))
    }

    /// True for plan operators, false for scalar expressions.
    pub fn is_plan(&self) -> bool {
        matches!(
            self,
            RaExpr::Scan(_)
                | RaExpr::Filter { .. }
                | RaExpr::Project { .. }
                | RaExpr::Join { .. }
                | RaExpr::Derived { .. }
        )
    }

    /// Number of operators in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&RaExpr> {
        match self {
            RaExpr::Scan(_) | RaExpr::Column(_) | RaExpr::Const(_) => vec![],
            RaExpr::Filter { pred, input } => vec![pred, input],
            RaExpr::Project { columns, input } => {
                columns.iter().chain(std::iter::once(&**input)).collect()
            }
            RaExpr::Join {
                pred, left, right, ..
            } => vec![pred, left, right],
            RaExpr::Derived { input, .. } => vec![input],
            RaExpr::Binary { left, right, .. } => vec![left, right],
            RaExpr::Not(e) => vec![e],
        }
    }

    /// Columns referenced anywhere in a scalar expression.
    pub fn referenced_columns(&self) -> BTreeSet<ColumnRef> {
        let mut out = BTreeSet::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut BTreeSet<ColumnRef>) {
        if let RaExpr::Column(c) = self {
            out.insert(c.clone());
        }
        for c in self.children() {
            c.collect_columns(out);
        }
    }

    /// Base tables scanned by a plan, in scan order.
    pub fn scanned_tables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_tables(&mut out);
        out
    }

    fn collect_tables(&self, out: &mut Vec<String>) {
        if let RaExpr::Scan(t) = self {
            out.push(t.clone());
        }
        for c in self.children() {
            c.collect_tables(out);
        }
    }

    /// Output columns of a plan, in order.
    pub fn output_columns(&self, catalog: &Catalog) -> Result<Vec<ColumnRef>, TypeError> {
        Ok(check_plan(self, catalog)?.into_iter().map(|(c, _)| c).collect())
    }

    /// Full type check: every column resolves, predicates are boolean,
    /// operands agree. Returns the output schema of a plan.
    pub fn type_check(&self, catalog: &Catalog) -> Result<Vec<(ColumnRef, Type)>, TypeError> {
        check_plan(self, catalog)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("column `{0}` is not in scope")]
    ColumnNotInScope(String),
    #[error("type mismatch: {0}")]
    Mismatch(String),
    #[error("expected a plan, found a scalar expression")]
    NotAPlan,
}

fn check_plan(e: &RaExpr, cat: &Catalog) -> Result<Vec<(ColumnRef, Type)>, TypeError> {
    match e {
        RaExpr::Scan(t) => {
            let def = cat
                .table(t)
                .ok_or_else(|| TypeError::UnknownTable(t.clone()))?;
            Ok(def
                .columns
                .iter()
                .map(|c| (ColumnRef::new(t, &c.name), c.ty))
                .collect())
        }
        RaExpr::Filter { pred, input } => {
            let scope = check_plan(input, cat)?;
            expect_type(check_scalar(pred, &scope)?, Type::Bool, "filter predicate")?;
            Ok(scope)
        }
        RaExpr::Project { columns, input } => {
            let scope = check_plan(input, cat)?;
            columns
                .iter()
                .map(|c| match c {
                    RaExpr::Column(r) => {
                        let ty = check_scalar(c, &scope)?;
                        Ok((r.clone(), ty))
                    }
                    other => Err(TypeError::Mismatch(format!(
                        "projection entries must be columns, found {other}"
                    ))),
                })
                .collect()
        }
        RaExpr::Join {
            pred, left, right, ..
        } => {
            let mut scope = check_plan(left, cat)?;
            scope.extend(check_plan(right, cat)?);
            expect_type(check_scalar(pred, &scope)?, Type::Bool, "join predicate")?;
            Ok(scope)
        }
        RaExpr::Derived { input, .. } => check_plan(input, cat),
        _ => Err(TypeError::NotAPlan),
    }
}

fn expect_type(got: Type, want: Type, what: &str) -> Result<(), TypeError> {
    if got == want {
        Ok(())
    } else {
        Err(TypeError::Mismatch(format!("{what} has type {got}, expected {want}")))
    }
}

pub(crate) fn check_scalar(e: &RaExpr, scope: &[(ColumnRef, Type)]) -> Result<Type, TypeError> {
    match e {
        RaExpr::Column(c) => scope
            .iter()
            .find(|(r, _)| r == c)
            .map(|(_, t)| *t)
            .ok_or_else(|| TypeError::ColumnNotInScope(c.qualified())),
        RaExpr::Const(v) => Ok(v.ty()),
        RaExpr::Not(inner) => {
            expect_type(check_scalar(inner, scope)?, Type::Bool, "operand of not")?;
            Ok(Type::Bool)
        }
        RaExpr::Binary { op, left, right } => {
            let l = check_scalar(left, scope)?;
            let r = check_scalar(right, scope)?;
            if op.is_arithmetic() {
                expect_type(l, Type::Int, op.symbol())?;
                expect_type(r, Type::Int, op.symbol())?;
                Ok(Type::Int)
            } else if op.is_logical() {
                expect_type(l, Type::Bool, op.symbol())?;
                expect_type(r, Type::Bool, op.symbol())?;
                Ok(Type::Bool)
            } else {
                expect_type(r, l, op.symbol())?;
                Ok(Type::Bool)
            }
        }
        _ => Err(TypeError::Mismatch("plan used where a scalar is expected".into())),
    }
}

/// Collapses inline views and drops identity projections below the root.
///
/// `select * from (select * from t where c2) where c1` parses to
/// `π(σ_c1(Derived(π(σ_c2(t)))))` and normalizes to `π(σ_c1(σ_c2(t)))`.
pub fn normalize(expr: &RaExpr, catalog: &Catalog) -> Result<RaExpr, TypeError> {
    fn go(e: &RaExpr, cat: &Catalog, root: bool) -> Result<RaExpr, TypeError> {
        Ok(match e {
            RaExpr::Derived { input, .. } => go(input, cat, root)?,
            RaExpr::Filter { pred, input } => {
                RaExpr::filter((**pred).clone(), go(input, cat, false)?)
            }
            RaExpr::Join {
                kind,
                pred,
                left,
                right,
            } => RaExpr::join(
                *kind,
                (**pred).clone(),
                go(left, cat, false)?,
                go(right, cat, false)?,
            ),
            RaExpr::Project { columns, input } => {
                let inner = go(input, cat, false)?;
                let inner_cols = inner.output_columns(cat)?;
                let identity = columns.len() == inner_cols.len()
                    && columns
                        .iter()
                        .zip(&inner_cols)
                        .all(|(c, r)| matches!(c, RaExpr::Column(x) if x == r));
                if identity && !root {
                    inner
                } else {
                    RaExpr::project(columns.clone(), inner)
                }
            }
            other => other.clone(),
        })
    }
    go(expr, catalog, true)
}

impl fmt::Display for RaExpr {
    /// S-expression rendering, e.g. `(project [t.a] (scan t))`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RaExpr::Scan(t) => write!(f, "(scan {t})"),
            RaExpr::Filter { pred, input } => write!(f, "(filter {pred} {input})"),
            RaExpr::Project { columns, input } => {
                f.write_str("(project [")?;
                for (i, c) in columns.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "] {input})")
            }
            RaExpr::Join {
                kind,
                pred,
                left,
                right,
            } => {
                let name = match kind {
                    JoinKind::Nested => "join",
                    JoinKind::Hash => "hashjoin",
                };
                write!(f, "({name} {pred} {left} {right})")
            }
            RaExpr::Derived { alias, input } => write!(f, "(derived {alias} {input})"),
            RaExpr::Column(c) => write!(f, "{c}"),
            RaExpr::Const(v) => write!(f, "{v}"),
            RaExpr::Binary { op, left, right } => write!(f, "({} {left} {right})", op.symbol()),
            RaExpr::Not(e) => write!(f, "(not {e})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_filter_catalog() -> Catalog {
        Catalog::from_toml_str(
            r#"
            [[tables]]
            name = "t"
            row_count = 1000
            columns = [
              { name = "c1", type = "bool", width_bytes = 1, ndv = 2 },
              { name = "c2", type = "bool", width_bytes = 1, ndv = 2 },
              { name = "c3", type = "int", width_bytes = 8, ndv = 100 },
              { name = "c4", type = "int", width_bytes = 8, ndv = 100 },
            ]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn normalize_collapses_nested_select_star() {
        let cat = two_filter_catalog();
        let e = parse_sql(
            "select * from (select * from t where c2=True) where c1=True",
            &cat,
        )
        .unwrap();
        let n = normalize(&e, &cat).unwrap();
        let all: Vec<RaExpr> = ["c1", "c2", "c3", "c4"]
            .iter()
            .map(|c| RaExpr::col("t", c))
            .collect();
        let expected = RaExpr::project(
            all,
            RaExpr::filter(
                RaExpr::eq(RaExpr::col("t", "c1"), RaExpr::bool(true)),
                RaExpr::filter(
                    RaExpr::eq(RaExpr::col("t", "c2"), RaExpr::bool(true)),
                    RaExpr::scan("t"),
                ),
            ),
        );
        assert_eq!(n, expected);
    }

    #[test]
    fn type_check_rejects_int_string_comparison() {
        let cat = two_filter_catalog();
        let e = RaExpr::filter(
            RaExpr::eq(RaExpr::col("t", "c3"), RaExpr::str("x")),
            RaExpr::scan("t"),
        );
        assert!(matches!(e.type_check(&cat), Err(TypeError::Mismatch(_))));
    }

    #[test]
    fn negated_comparisons_are_involutive() {
        for op in BinOp::ALL.into_iter().filter(|o| o.is_comparison()) {
            let n = op.negated_comparison().unwrap();
            assert_eq!(n.negated_comparison(), Some(op));
        }
    }
}
