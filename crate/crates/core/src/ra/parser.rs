//! Recursive-descent parser for the supported SQL subset.
//!
//! Supported: `SELECT` of columns or `*`, `FROM` with base tables, comma
//! joins, `[INNER|CROSS] JOIN ... ON`, derived tables, and `WHERE` with
//! comparisons, arithmetic and `AND`/`OR`/`NOT`. Everything else is
//! rejected with [`ParseError::Unsupported`].

use std::collections::BTreeSet;

use super::{BinOp, Catalog, ColumnRef, JoinKind, RaExpr, TypeError, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        found: String,
        expected: String,
    },
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }
}

const SYMBOLS: [&str; 16] = [
    "<<", "<>", "!=", "<=", ">=", "=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ".",
];

const RESERVED: [&str; 24] = [
    "select", "from", "where", "and", "or", "not", "join", "inner", "cross", "on", "as", "in",
    "group", "order", "by", "having", "limit", "union", "left", "right", "outer", "full",
    "distinct", "between",
];

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() || c == ';' {
            i += 1;
            continue;
        }
        if text[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if text[i..].starts_with("/*") {
            match text[i + 2..].find("*/") {
                Some(end) => i += end + 4,
                None => {
                    return Err(ParseError::Syntax {
                        pos: i,
                        found: "unterminated comment".into(),
                        expected: "`*/`".into(),
                    })
                }
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                return Err(ParseError::Unsupported("floating-point literal".into()));
            }
            let v = text[start..i].parse::<i64>().map_err(|_| ParseError::Syntax {
                pos: start,
                found: format!("`{}`", &text[start..i]),
                expected: "a 64-bit integer".into(),
            })?;
            out.push((Tok::Int(v), start));
        } else if c == '\'' {
            i += 1;
            let mut s = String::new();
            loop {
                match text[i..].chars().next() {
                    None => {
                        return Err(ParseError::Syntax {
                            pos: start,
                            found: "unterminated string".into(),
                            expected: "`'`".into(),
                        })
                    }
                    Some('\'') if text[i + 1..].starts_with('\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(ch) => {
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            out.push((Tok::Str(s), start));
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            i += sym.len();
            out.push((Tok::Sym(sym), start));
        } else {
            let ch = text[i..].chars().next().unwrap();
            return Err(ParseError::Syntax {
                pos: start,
                found: format!("`{ch}`"),
                expected: "a token".into(),
            });
        }
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

/// A column visible in some scope.
#[derive(Debug, Clone)]
struct ScopeCol {
    qualifier: String,
    name: String,
    target: ColumnRef,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    catalog: &'a Catalog,
    tables_used: BTreeSet<String>,
    derived_counter: usize,
}

/// Parses a SQL query into a relational-algebra plan.
///
/// Column references are resolved against `catalog`. Derived-table column
/// aliases are resolved to their base columns; inline views are kept as
/// [`RaExpr::Derived`] nodes (see [`super::normalize`] to collapse them).
pub fn parse_sql(text: &str, catalog: &Catalog) -> Result<RaExpr, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        catalog,
        tables_used: BTreeSet::new(),
        derived_counter: 0,
    };
    let (plan, _) = p.query()?;
    if p.peek() != &Tok::Eof {
        if let Tok::Ident(s) = p.peek() {
            let lower = s.to_ascii_lowercase();
            if ["group", "order", "having", "limit", "union", "offset"].contains(&lower.as_str()) {
                return Err(ParseError::Unsupported(format!("{} clause", lower.to_uppercase())));
            }
        }
        return Err(p.error("end of query"));
    }
    plan.type_check(catalog)?;
    Ok(plan)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let (tok, pos) = &self.toks[self.pos];
        ParseError::Syntax {
            pos: *pos,
            found: tok.describe(),
            expected: expected.into(),
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek().is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("`{}`", kw.to_uppercase())))
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&format!("`{s}`")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.to_ascii_lowercase().as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(what)),
        }
    }

    fn query(&mut self) -> Result<(RaExpr, Vec<ScopeCol>), ParseError> {
        self.expect_kw("select")?;
        if self.peek().is_kw("distinct") {
            return Err(ParseError::Unsupported("SELECT DISTINCT".into()));
        }
        let items = self.select_list()?;
        self.expect_kw("from")?;
        let (mut plan, scope) = self.from_list()?;
        if self.eat_kw("where") {
            let pred = self.expr(&scope)?;
            plan = RaExpr::filter(pred, plan);
        }

        let mut out = Vec::new();
        for item in items {
            match item {
                SelectItem::Star => out.extend(scope.iter().cloned()),
                SelectItem::Column {
                    qualifier,
                    name,
                    alias,
                } => {
                    let col = resolve(&scope, qualifier.as_deref(), &name)?;
                    out.push(ScopeCol {
                        qualifier: String::new(),
                        name: alias.unwrap_or(name),
                        target: col,
                    });
                }
            }
        }
        let columns = out.iter().map(|c| RaExpr::Column(c.target.clone())).collect();
        Ok((RaExpr::project(columns, plan), out))
    }

    fn select_list(&mut self) -> Result<Vec<SelectItem>, ParseError> {
        let mut items = Vec::new();
        loop {
            if self.eat_sym("*") {
                items.push(SelectItem::Star);
            } else {
                let first = self.ident("a column name or `*`")?;
                if matches!(self.peek(), Tok::Sym("(")) {
                    return Err(ParseError::Unsupported(format!(
                        "function call or aggregate `{first}(...)`"
                    )));
                }
                let (qualifier, name) = if self.eat_sym(".") {
                    if self.eat_sym("*") {
                        return Err(ParseError::Unsupported("qualified `*`".into()));
                    }
                    (Some(first), self.ident("a column name")?)
                } else {
                    (None, first)
                };
                let alias = if self.eat_kw("as") {
                    Some(self.ident("an alias")?)
                } else if let Tok::Ident(s) = self.peek() {
                    if RESERVED.contains(&s.to_ascii_lowercase().as_str()) {
                        None
                    } else {
                        Some(self.ident("an alias")?)
                    }
                } else {
                    None
                };
                if !matches!(self.peek(), Tok::Sym(",")) && !self.peek().is_kw("from") {
                    if matches!(self.peek(), Tok::Sym(_)) {
                        return Err(ParseError::Unsupported(
                            "computed expression in SELECT list".into(),
                        ));
                    }
                }
                items.push(SelectItem::Column {
                    qualifier,
                    name,
                    alias,
                });
            }
            if !self.eat_sym(",") {
                return Ok(items);
            }
        }
    }

    fn from_list(&mut self) -> Result<(RaExpr, Vec<ScopeCol>), ParseError> {
        let (mut plan, mut scope) = self.from_item()?;
        while self.eat_sym(",") {
            let (rp, rs) = self.from_item()?;
            plan = RaExpr::join(JoinKind::Nested, RaExpr::bool(true), plan, rp);
            scope.extend(rs);
        }
        Ok((plan, scope))
    }

    fn from_item(&mut self) -> Result<(RaExpr, Vec<ScopeCol>), ParseError> {
        let (mut plan, mut scope) = self.from_primary()?;
        loop {
            if self.peek().is_kw("left")
                || self.peek().is_kw("right")
                || self.peek().is_kw("full")
                || self.peek().is_kw("outer")
            {
                return Err(ParseError::Unsupported("outer join".into()));
            }
            let cross = self.peek().is_kw("cross");
            if cross {
                self.bump();
                self.expect_kw("join")?;
            } else if self.eat_kw("inner") {
                self.expect_kw("join")?;
            } else if !self.eat_kw("join") {
                return Ok((plan, scope));
            }
            let (rp, rs) = self.from_primary()?;
            scope.extend(rs);
            let pred = if cross {
                RaExpr::bool(true)
            } else {
                self.expect_kw("on")?;
                self.expr(&scope)?
            };
            plan = RaExpr::join(JoinKind::Nested, pred, plan, rp);
        }
    }

    fn from_primary(&mut self) -> Result<(RaExpr, Vec<ScopeCol>), ParseError> {
        if self.eat_sym("(") {
            if !self.peek().is_kw("select") {
                return Err(self.error("`SELECT`"));
            }
            let (sub, cols) = self.query()?;
            self.expect_sym(")")?;
            let alias = self.opt_alias()?.unwrap_or_else(|| {
                self.derived_counter += 1;
                format!("subquery{}", self.derived_counter)
            });
            let scope = cols
                .into_iter()
                .map(|c| ScopeCol {
                    qualifier: alias.clone(),
                    ..c
                })
                .collect();
            return Ok((RaExpr::derived(alias, sub), scope));
        }
        let name_pos = self.pos;
        let name = self.ident("a table name or `(`")?;
        let def = self
            .catalog
            .table(&name)
            .ok_or_else(|| ParseError::UnknownTable(name.clone()))?;
        if !self.tables_used.insert(name.clone()) {
            self.pos = name_pos;
            return Err(ParseError::Unsupported(format!(
                "table `{name}` referenced more than once (self-join)"
            )));
        }
        let alias = self.opt_alias()?.unwrap_or_else(|| name.clone());
        let scope = def
            .columns
            .iter()
            .map(|c| ScopeCol {
                qualifier: alias.clone(),
                name: c.name.clone(),
                target: ColumnRef::new(&name, &c.name),
            })
            .collect();
        Ok((RaExpr::scan(name), scope))
    }

    fn opt_alias(&mut self) -> Result<Option<String>, ParseError> {
        if self.eat_kw("as") {
            return Ok(Some(self.ident("an alias")?));
        }
        if let Tok::Ident(s) = self.peek() {
            if !RESERVED.contains(&s.to_ascii_lowercase().as_str()) {
                return Ok(Some(self.ident("an alias")?));
            }
        }
        Ok(None)
    }

    fn expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        let mut left = self.and_expr(scope)?;
        while self.eat_kw("or") {
            let right = self.and_expr(scope)?;
            left = RaExpr::binary(BinOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        let mut left = self.not_expr(scope)?;
        while self.eat_kw("and") {
            let right = self.not_expr(scope)?;
            left = RaExpr::and(left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        if self.eat_kw("not") {
            return Ok(RaExpr::not(self.not_expr(scope)?));
        }
        self.cmp_expr(scope)
    }

    fn cmp_expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        let left = self.shift_expr(scope)?;
        if self.peek().is_kw("in") || (self.peek().is_kw("not") && self.peek_at(1).is_kw("in")) {
            let nested = self.peek_at(1).is_kw("select")
                || self.peek_at(2).is_kw("select")
                || self.peek_at(3).is_kw("select");
            return Err(ParseError::Unsupported(if nested {
                "IN over nested query".into()
            } else {
                "IN list".into()
            }));
        }
        for kw in ["between", "like", "is"] {
            if self.peek().is_kw(kw) {
                return Err(ParseError::Unsupported(format!("{} predicate", kw.to_uppercase())));
            }
        }
        let op = match self.peek() {
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("<>") | Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(left),
        };
        self.bump();
        let right = self.shift_expr(scope)?;
        Ok(RaExpr::binary(op, left, right))
    }

    fn shift_expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        let mut left = self.add_expr(scope)?;
        while self.eat_sym("<<") {
            let right = self.add_expr(scope)?;
            left = RaExpr::binary(BinOp::Shl, left, right);
        }
        Ok(left)
    }

    fn add_expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        let mut left = self.mul_expr(scope)?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(left);
            };
            let right = self.mul_expr(scope)?;
            left = RaExpr::binary(op, left, right);
        }
    }

    fn mul_expr(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        let mut left = self.unary(scope)?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                return Ok(left);
            };
            let right = self.unary(scope)?;
            left = RaExpr::binary(op, left, right);
        }
    }

    fn unary(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        if self.eat_sym("-") {
            return Ok(match self.unary(scope)? {
                RaExpr::Const(Value::Int(v)) => RaExpr::int(v.wrapping_neg()),
                e => RaExpr::binary(BinOp::Sub, RaExpr::int(0), e),
            });
        }
        self.atom(scope)
    }

    fn atom(&mut self, scope: &[ScopeCol]) -> Result<RaExpr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(RaExpr::int(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(RaExpr::Const(Value::Str(s)))
            }
            Tok::Sym("(") => {
                if self.peek_at(1).is_kw("select") {
                    return Err(ParseError::Unsupported("scalar subquery".into()));
                }
                self.bump();
                let e = self.expr(scope)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("true") => {
                self.bump();
                Ok(RaExpr::bool(true))
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("false") => {
                self.bump();
                Ok(RaExpr::bool(false))
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("exists") => {
                Err(ParseError::Unsupported("EXISTS over nested query".into()))
            }
            Tok::Ident(_) => {
                let first = self.ident("an expression")?;
                if matches!(self.peek(), Tok::Sym("(")) {
                    return Err(ParseError::Unsupported(format!(
                        "function call or aggregate `{first}(...)`"
                    )));
                }
                let col = if self.eat_sym(".") {
                    let name = self.ident("a column name")?;
                    resolve(scope, Some(&first), &name)?
                } else {
                    resolve(scope, None, &first)?
                };
                Ok(RaExpr::Column(col))
            }
            _ => Err(self.error("an expression")),
        }
    }
}

enum SelectItem {
    Star,
    Column {
        qualifier: Option<String>,
        name: String,
        alias: Option<String>,
    },
}

/// Resolves a (possibly qualified) name. A qualifier may name the visible
/// alias or, as an extension, the base table behind a derived column.
fn resolve(scope: &[ScopeCol], qualifier: Option<&str>, name: &str) -> Result<ColumnRef, ParseError> {
    let display = match qualifier {
        Some(q) => format!("{q}.{name}"),
        None => name.to_string(),
    };
    let by_visible: Vec<&ScopeCol> = scope
        .iter()
        .filter(|c| c.name == name && qualifier.is_none_or(|q| c.qualifier == q))
        .collect();
    let candidates: Vec<&ScopeCol> = if by_visible.is_empty() {
        match qualifier {
            Some(q) => scope
                .iter()
                .filter(|c| c.target.table == q && c.target.column == name)
                .collect(),
            None => vec![],
        }
    } else {
        by_visible
    };
    let targets: BTreeSet<&ColumnRef> = candidates.iter().map(|c| &c.target).collect();
    match targets.len() {
        0 => Err(ParseError::UnknownColumn(display)),
        1 => Ok((*targets.iter().next().unwrap()).clone()),
        _ => Err(ParseError::AmbiguousColumn(display)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ra::{ColumnDef, TableDef, Type};

    fn cat() -> Catalog {
        let col = |n: &str, ty| ColumnDef {
            name: n.into(),
            ty,
            width_bytes: 8,
            ndv: 10,
        };
        Catalog::new(vec![
            TableDef {
                name: "t".into(),
                row_count: 100,
                columns: vec![col("a", Type::Int), col("b", Type::Int), col("s", Type::Str)],
            },
            TableDef {
                name: "u".into(),
                row_count: 100,
                columns: vec![col("a", Type::Int), col("c", Type::Int)],
            },
            TableDef {
                name: "orders".into(),
                row_count: 1000,
                columns: vec![
                    col("o_orderkey", Type::Int),
                    col("o_orderstatus", Type::Str),
                    col("o_totalprice", Type::Int),
                ],
            },
        ])
        .unwrap()
    }

    #[test]
    fn single_column_select() {
        let e = parse_sql("select a from t", &cat()).unwrap();
        assert_eq!(e, RaExpr::project(vec![RaExpr::col("t", "a")], RaExpr::scan("t")));
    }

    #[test]
    fn explicit_join_keeps_predicate_on_join() {
        let e = parse_sql("select t.b, c from t join u on t.a = u.a where b > 3", &cat()).unwrap();
        let expected = RaExpr::project(
            vec![RaExpr::col("t", "b"), RaExpr::col("u", "c")],
            RaExpr::filter(
                RaExpr::binary(BinOp::Gt, RaExpr::col("t", "b"), RaExpr::int(3)),
                RaExpr::join(
                    JoinKind::Nested,
                    RaExpr::eq(RaExpr::col("t", "a"), RaExpr::col("u", "a")),
                    RaExpr::scan("t"),
                    RaExpr::scan("u"),
                ),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn derived_alias_resolves_to_base_column() {
        let e = parse_sql(
            "select key from (select o_orderkey as key, o_orderstatus as status, o_totalprice as price \
             from orders where o_totalprice > 40000) as inter where status = 'F' and inter.price > 40000",
            &cat(),
        )
        .unwrap();
        match &e {
            RaExpr::Project { columns, input } => {
                assert_eq!(columns, &vec![RaExpr::col("orders", "o_orderkey")]);
                match &**input {
                    RaExpr::Filter { input, .. } => {
                        assert!(matches!(&**input, RaExpr::Derived { alias, .. } if alias == "inter"))
                    }
                    other => panic!("expected filter, got {other}"),
                }
            }
            other => panic!("expected project, got {other}"),
        }
    }

    #[test]
    fn precedence_of_arithmetic_and_logic() {
        let e = parse_sql("select a from t where a + b * 2 > 3 or not b = 1 and a < 2", &cat()).unwrap();
        let RaExpr::Project { input, .. } = e else { panic!() };
        let RaExpr::Filter { pred, .. } = *input else { panic!() };
        let expected = RaExpr::binary(
            BinOp::Or,
            RaExpr::binary(
                BinOp::Gt,
                RaExpr::binary(
                    BinOp::Add,
                    RaExpr::col("t", "a"),
                    RaExpr::binary(BinOp::Mul, RaExpr::col("t", "b"), RaExpr::int(2)),
                ),
                RaExpr::int(3),
            ),
            RaExpr::and(
                RaExpr::not(RaExpr::eq(RaExpr::col("t", "b"), RaExpr::int(1))),
                RaExpr::binary(BinOp::Lt, RaExpr::col("t", "a"), RaExpr::int(2)),
            ),
        );
        assert_eq!(*pred, expected);
    }

    #[test]
    fn in_over_subquery_is_unsupported() {
        let err = parse_sql(
            "select o_orderkey from orders where o_orderstatus = 'F' and o_orderkey in \
             (select o_orderkey from orders where o_totalprice > 40000)",
            &cat(),
        )
        .unwrap_err();
        assert_eq!(err, ParseError::Unsupported("IN over nested query".into()));
    }

    #[test]
    fn errors_are_positioned_and_named() {
        assert!(matches!(
            parse_sql("select a from", &cat()),
            Err(ParseError::Syntax { pos: 13, .. })
        ));
        assert!(matches!(
            // `frm` reads as a column alias, so the error is at `t`.
            parse_sql("select a frm t", &cat()),
            Err(ParseError::Syntax { pos: 13, .. })
        ));
        assert_eq!(
            parse_sql("select zz from t", &cat()).unwrap_err(),
            ParseError::UnknownColumn("zz".into())
        );
        assert_eq!(
            parse_sql("select a from nope", &cat()).unwrap_err(),
            ParseError::UnknownTable("nope".into())
        );
        assert_eq!(
            parse_sql("select a from t, u", &cat()).unwrap_err(),
            ParseError::AmbiguousColumn("a".into())
        );
        assert!(matches!(
            parse_sql("select count(a) from t", &cat()),
            Err(ParseError::Unsupported(_))
        ));
        assert!(matches!(
            parse_sql("select a from t order by a", &cat()),
            Err(ParseError::Unsupported(_))
        ));
        assert!(matches!(
            parse_sql("select a from t where s = 1", &cat()),
            Err(ParseError::Type(_))
        ));
    }

    #[test]
    fn comments_are_skipped() {
        let e = parse_sql("select a /* hint */ from t -- trailing\n", &cat()).unwrap();
        assert_eq!(e, RaExpr::project(vec![RaExpr::col("t", "a")], RaExpr::scan("t")));
    }
}
