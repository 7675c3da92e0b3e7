//! Patterns over e-graph operators and the backtracking e-matcher.
//!
//! Text syntax is an s-expression: `(filter ?c (join ?p ?l ?r))`. A head
//! of the form `?name:op1|op2` is an operator variable that matches any of
//! the listed operators and binds the one it matched.

use std::fmt;

use super::{EGraph, EGraphError, ENode, Id, Op};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(String),
    Node { head: Head, children: Vec<Pattern> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    Op(Op),
    /// Binds the matched operator under the given name.
    OneOf(String, Vec<Op>),
}

impl Head {
    fn matches(&self, op: &Op) -> bool {
        match self {
            Head::Op(o) => o == op,
            Head::OneOf(_, ops) => ops.contains(op),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("unbalanced parentheses in pattern")]
    Unbalanced,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` takes {expected} operands, got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("empty pattern")]
    Empty,
}

/// Variable and operator bindings produced by a match.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subst {
    vars: Vec<(String, Id)>,
    ops: Vec<(String, Op)>,
}

impl Subst {
    pub fn get(&self, var: &str) -> Option<Id> {
        self.vars.iter().find(|(v, _)| v == var).map(|(_, id)| *id)
    }

    /// The class bound to `var`. Panics if unbound; patterns are validated
    /// so that right-hand sides only use bound variables.
    pub fn id(&self, var: &str) -> Id {
        self.get(var)
            .unwrap_or_else(|| panic!("pattern variable {var} is unbound"))
    }

    pub fn op(&self, var: &str) -> Option<&Op> {
        self.ops.iter().find(|(v, _)| v == var).map(|(_, o)| o)
    }

    pub fn insert(&mut self, var: &str, id: Id) {
        match self.vars.iter_mut().find(|(v, _)| v == var) {
            Some(slot) => slot.1 = id,
            None => self.vars.push((var.to_string(), id)),
        }
    }

    pub fn insert_op(&mut self, var: &str, op: Op) {
        self.ops.push((var.to_string(), op));
    }

    pub fn vars(&self) -> impl Iterator<Item = (&str, Id)> {
        self.vars.iter().map(|(v, id)| (v.as_str(), *id))
    }

    pub(crate) fn canonical(mut self, g: &EGraph) -> Self {
        for (_, id) in &mut self.vars {
            *id = g.find(*id);
        }
        self.vars.sort();
        self.ops.sort();
        self
    }
}

impl Pattern {
    pub fn parse(text: &str) -> Result<Pattern, PatternError> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let p = parse_at(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(PatternError::Unbalanced);
        }
        Ok(p)
    }

    pub fn var(name: &str) -> Pattern {
        Pattern::Var(name.to_string())
    }

    pub fn node(op: Op, children: Vec<Pattern>) -> Pattern {
        Pattern::Node {
            head: Head::Op(op),
            children,
        }
    }

    /// Variables in first-occurrence order, including operator variables.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Pattern::Node { head, children } => {
                if let Head::OneOf(v, _) = head {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                for c in children {
                    c.collect_vars(out);
                }
            }
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn parse_atom(tok: &str) -> Result<Op, PatternError> {
    if let Ok(i) = tok.parse::<i64>() {
        return Ok(Op::Int(i));
    }
    match tok {
        "true" => Ok(Op::Bool(true)),
        "false" => Ok(Op::Bool(false)),
        _ => Op::from_name(tok).ok_or_else(|| PatternError::UnknownOperator(tok.to_string())),
    }
}

fn parse_at(tokens: &[String], pos: &mut usize) -> Result<Pattern, PatternError> {
    let tok = tokens.get(*pos).ok_or(PatternError::Empty)?;
    *pos += 1;
    if tok == ")" {
        return Err(PatternError::Unbalanced);
    }
    if tok != "(" {
        if tok.starts_with('?') {
            return Ok(Pattern::Var(tok.clone()));
        }
        let op = parse_atom(tok)?;
        if !op.is_leaf() {
            return Err(PatternError::Arity {
                op: tok.clone(),
                expected: op.arity().unwrap_or(0),
                got: 0,
            });
        }
        return Ok(Pattern::node(op, vec![]));
    }
    let head_tok = tokens.get(*pos).ok_or(PatternError::Unbalanced)?.clone();
    *pos += 1;
    let head = match head_tok.split_once(':') {
        Some((var, ops)) if var.starts_with('?') => Head::OneOf(
            var.to_string(),
            ops.split('|').map(parse_atom).collect::<Result<_, _>>()?,
        ),
        _ => Head::Op(parse_atom(&head_tok)?),
    };
    let mut children = Vec::new();
    loop {
        match tokens.get(*pos).map(String::as_str) {
            None => return Err(PatternError::Unbalanced),
            Some(")") => {
                *pos += 1;
                break;
            }
            Some(_) => children.push(parse_at(tokens, pos)?),
        }
    }
    let ops: Vec<&Op> = match &head {
        Head::Op(o) => vec![o],
        Head::OneOf(_, os) => os.iter().collect(),
    };
    for o in ops {
        if let Some(n) = o.arity() {
            if n != children.len() {
                return Err(PatternError::Arity {
                    op: o.name(),
                    expected: n,
                    got: children.len(),
                });
            }
        }
    }
    Ok(Pattern::Node { head, children })
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(v) => f.write_str(v),
            Pattern::Node { head, children } => {
                let name = match head {
                    Head::Op(o) => o.name(),
                    Head::OneOf(v, ops) => format!(
                        "{v}:{}",
                        ops.iter().map(Op::name).collect::<Vec<_>>().join("|")
                    ),
                };
                if children.is_empty() {
                    return f.write_str(&name);
                }
                write!(f, "({name}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// All matches of `pattern` in a rebuilt graph, as (root class,
/// substitution) pairs ordered by class id. Complete: every way of
/// instantiating the pattern inside the graph is reported once.
pub fn ematch(g: &EGraph, pattern: &Pattern) -> Vec<(Id, Subst)> {
    let mut out = Vec::new();
    for class in g.classes() {
        for s in match_class(g, pattern, class.id, Subst::default()) {
            out.push((class.id, s.canonical(g)));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Matches of `pattern` rooted at one class.
pub(crate) fn match_class(g: &EGraph, pattern: &Pattern, id: Id, subst: Subst) -> Vec<Subst> {
    let id = g.find(id);
    match pattern {
        Pattern::Var(v) => match subst.get(v) {
            Some(bound) if g.find(bound) == id => vec![subst],
            Some(_) => vec![],
            None => {
                let mut s = subst;
                s.insert(v, id);
                vec![s]
            }
        },
        Pattern::Node { head, children } => {
            let mut out = Vec::new();
            for node in &g.class(id).nodes {
                if !head.matches(&node.op) || node.children.len() != children.len() {
                    continue;
                }
                let mut start = subst.clone();
                if let Head::OneOf(v, _) = head {
                    match start.op(v) {
                        Some(bound) if bound != &node.op => continue,
                        Some(_) => {}
                        None => start.insert_op(v, node.op.clone()),
                    }
                }
                let mut partial = vec![start];
                for (cp, &cid) in children.iter().zip(&node.children) {
                    partial = partial
                        .into_iter()
                        .flat_map(|s| match_class(g, cp, cid, s))
                        .collect();
                    if partial.is_empty() {
                        break;
                    }
                }
                out.extend(partial);
            }
            out
        }
    }
}

/// Adds the instance of `pattern` under `subst`, returning its class.
pub fn instantiate(g: &mut EGraph, pattern: &Pattern, subst: &Subst) -> Result<Id, EGraphError> {
    match pattern {
        Pattern::Var(v) => Ok(subst.id(v)),
        Pattern::Node { head, children } => {
            let op = match head {
                Head::Op(o) => o.clone(),
                Head::OneOf(v, _) => subst
                    .op(v)
                    .cloned()
                    .unwrap_or_else(|| panic!("operator variable {v} is unbound")),
            };
            let ids = children
                .iter()
                .map(|c| instantiate(g, c, subst))
                .collect::<Result<Vec<_>, _>>()?;
            g.add(ENode::new(op, ids))
        }
    }
}
