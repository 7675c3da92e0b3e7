//! SQL text generation from plans.

use std::collections::{BTreeMap, BTreeSet};

use super::{BinOp, Catalog, ColumnRef, JoinKind, RaExpr, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    /// Plain SQL accepted by [`parse_sql`](super::parse_sql). Physical join
    /// kinds without portable syntax are written as comment hints.
    #[default]
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("expected a plan, found a scalar expression")]
    NotAPlan,
    #[error("a projection with no columns has no SQL form")]
    EmptyProjection,
}

/// One `select ... from ... where ...` block.
struct Block {
    columns: Option<Vec<ColumnRef>>,
    from: From,
    filters: Vec<RaExpr>,
}

enum From {
    Table(String),
    Sub(Box<Block>, String),
    Join(JoinKind, RaExpr, Box<From>, Box<From>),
}

struct Emitter {
    used_names: BTreeSet<String>,
    /// Aliases of derived tables in the input; generated names avoid them.
    reserved: BTreeSet<String>,
    next_alias: usize,
    /// Column names that occur in more than one scanned table.
    ambiguous: BTreeSet<String>,
}

/// Renders a plan as a single SQL query.
///
/// Column references are printed bare unless the name occurs in several
/// scanned tables, in which case they are qualified by base table name.
pub fn emit_sql(expr: &RaExpr, catalog: &Catalog, dialect: Dialect) -> Result<String, EmitError> {
    let Dialect::Generic = dialect;
    if !expr.is_plan() {
        return Err(EmitError::NotAPlan);
    }
    let tables = expr.scanned_tables();
    let mut owners: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in &tables {
        if let Some(def) = catalog.table(t) {
            for c in &def.columns {
                owners.entry(c.name.clone()).or_default().insert(t.clone());
            }
        }
    }
    let mut reserved = BTreeSet::new();
    collect_aliases(expr, &mut reserved);
    let mut em = Emitter {
        used_names: tables.into_iter().collect(),
        reserved,
        next_alias: 0,
        ambiguous: owners
            .into_iter()
            .filter(|(_, ts)| ts.len() > 1)
            .map(|(c, _)| c)
            .collect(),
    };
    let block = em.block(expr)?;
    Ok(em.render_block(&block))
}

fn collect_aliases(e: &RaExpr, out: &mut BTreeSet<String>) {
    if let RaExpr::Derived { alias, .. } = e {
        out.insert(alias.clone());
    }
    for c in e.children() {
        collect_aliases(c, out);
    }
}

impl Emitter {
    fn fresh_alias(&mut self) -> String {
        loop {
            self.next_alias += 1;
            let name = format!("d{}", self.next_alias);
            if !self.reserved.contains(&name) && self.used_names.insert(name.clone()) {
                return name;
            }
        }
    }

    fn claim_alias(&mut self, wanted: &str) -> String {
        if self.used_names.insert(wanted.to_string()) {
            return wanted.to_string();
        }
        let mut k = 2;
        loop {
            let name = format!("{wanted}_{k}");
            if self.used_names.insert(name.clone()) {
                return name;
            }
            k += 1;
        }
    }

    fn wrap(&mut self, b: Block) -> Block {
        let alias = self.fresh_alias();
        Block {
            columns: None,
            from: From::Sub(Box::new(b), alias),
            filters: Vec::new(),
        }
    }

    fn block(&mut self, e: &RaExpr) -> Result<Block, EmitError> {
        Ok(match e {
            RaExpr::Scan(t) => Block {
                columns: None,
                from: From::Table(t.clone()),
                filters: Vec::new(),
            },
            RaExpr::Derived { alias, input } => {
                let inner = self.block(input)?;
                let alias = self.claim_alias(alias);
                Block {
                    columns: None,
                    from: From::Sub(Box::new(inner), alias),
                    filters: Vec::new(),
                }
            }
            RaExpr::Project { columns, input } => {
                if columns.is_empty() {
                    return Err(EmitError::EmptyProjection);
                }
                let mut b = self.block(input)?;
                if b.columns.is_some() {
                    b = self.wrap(b);
                }
                let cols = columns
                    .iter()
                    .map(|c| match c {
                        RaExpr::Column(r) => Ok(r.clone()),
                        _ => Err(EmitError::NotAPlan),
                    })
                    .collect::<Result<_, _>>()?;
                b.columns = Some(cols);
                b
            }
            RaExpr::Filter { pred, input } => {
                let mut b = self.block(input)?;
                if b.columns.is_some() {
                    b = self.wrap(b);
                }
                b.filters.push((**pred).clone());
                b
            }
            RaExpr::Join {
                kind,
                pred,
                left,
                right,
            } => {
                let l = self.from_item(left)?;
                let mut r = self.from_item(right)?;
                // `a join (b join c on q) on p` is outside the parsed subset.
                if matches!(r, From::Join(..)) {
                    let inner = Block {
                        columns: None,
                        from: r,
                        filters: Vec::new(),
                    };
                    r = From::Sub(Box::new(inner), self.fresh_alias());
                }
                Block {
                    columns: None,
                    from: From::Join(*kind, (**pred).clone(), Box::new(l), Box::new(r)),
                    filters: Vec::new(),
                }
            }
            _ => return Err(EmitError::NotAPlan),
        })
    }

    fn from_item(&mut self, e: &RaExpr) -> Result<From, EmitError> {
        let b = self.block(e)?;
        if b.columns.is_none() && b.filters.is_empty() {
            Ok(b.from)
        } else {
            let alias = self.fresh_alias();
            Ok(From::Sub(Box::new(b), alias))
        }
    }

    fn render_block(&self, b: &Block) -> String {
        let cols = match &b.columns {
            None => "*".to_string(),
            Some(cs) => cs
                .iter()
                .map(|c| self.column(c))
                .collect::<Vec<_>>()
                .join(", "),
        };
        let mut s = format!("select {cols} from {}", self.render_from(&b.from));
        if !b.filters.is_empty() {
            let conds: Vec<String> = b
                .filters
                .iter()
                .map(|p| self.expr(p, prec_of_op(BinOp::And)))
                .collect();
            s.push_str(" where ");
            s.push_str(&conds.join(" and "));
        }
        s
    }

    fn render_from(&self, f: &From) -> String {
        match f {
            From::Table(t) => t.clone(),
            From::Sub(b, alias) => format!("({}) as {alias}", self.render_block(b)),
            From::Join(kind, pred, l, r) => {
                let hint = match kind {
                    JoinKind::Nested => "",
                    JoinKind::Hash => "/* hash join */ ",
                };
                let l = self.render_from(l);
                let r = self.render_from(r);
                if *pred == RaExpr::bool(true) {
                    format!("{l} cross join {hint}{r}")
                } else {
                    format!("{l} join {hint}{r} on {}", self.expr(pred, 0))
                }
            }
        }
    }

    fn column(&self, c: &ColumnRef) -> String {
        if self.ambiguous.contains(&c.column) {
            c.qualified()
        } else {
            c.column.clone()
        }
    }

    fn expr(&self, e: &RaExpr, min_prec: u8) -> String {
        let (prec, text) = match e {
            RaExpr::Column(c) => (ATOM, self.column(c)),
            RaExpr::Const(Value::Int(i64::MIN)) => (ADD, format!("{} - 1", i64::MIN + 1)),
            RaExpr::Const(v) => (ATOM, v.to_string()),
            RaExpr::Not(inner) => (NOT, format!("not {}", self.expr(inner, NOT))),
            RaExpr::Binary { op, left, right } => {
                let p = prec_of_op(*op);
                let lmin = if op.is_comparison() { p + 1 } else { p };
                (
                    p,
                    format!(
                        "{} {} {}",
                        self.expr(left, lmin),
                        op.symbol(),
                        self.expr(right, p + 1)
                    ),
                )
            }
            // Unreachable for well-typed plans; render something readable.
            other => (ATOM, other.to_string()),
        };
        if prec < min_prec {
            format!("({text})")
        } else {
            text
        }
    }
}

const NOT: u8 = 3;
const ADD: u8 = 6;
const ATOM: u8 = 9;

fn prec_of_op(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 4,
        BinOp::Shl => 5,
        BinOp::Add | BinOp::Sub => ADD,
        BinOp::Mul | BinOp::Div => 7,
    }
}
