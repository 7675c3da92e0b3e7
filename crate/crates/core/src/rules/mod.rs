//! The rewrite-rule catalog and rule application.
//!
//! The catalog order is the action-index mapping seen by agents and must
//! not change within a protocol version.

mod soundness;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::egraph::{ematch, instantiate, match_class, EGraph, EGraphError, Id, Op, Pattern, Subst};
use crate::ra::{eval_binary, BinOp, ColumnRef, Value};

pub use soundness::{soundness_check, SoundnessError, SoundnessReport};

/// Number of rules in the catalog.
pub const NUM_RULES: usize = 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Relational,
    Math,
    Boolean,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Relational => "relational",
            Category::Math => "math",
            Category::Boolean => "boolean",
        }
    }
}

/// Extra applicability condition over a match.
pub type Guard = fn(&EGraph, &Subst) -> bool;
/// Builds the right-hand side from a match, or declines it.
pub type RhsBuilder = fn(&EGraph, &Subst) -> Option<Pattern>;

#[derive(Debug, Clone)]
pub enum Rhs {
    Pattern(Pattern),
    /// Right-hand side computed per match; `shape` is its documentation.
    Dynamic { shape: &'static str, build: RhsBuilder },
}

#[derive(Debug, Clone)]
pub struct RewriteRule {
    pub name: &'static str,
    pub category: Category,
    /// The textbook identity the rule implements.
    pub identity: &'static str,
    pub lhs: Pattern,
    pub rhs: Rhs,
    pub guard: Option<Guard>,
}

impl RewriteRule {
    fn new(
        name: &'static str,
        category: Category,
        identity: &'static str,
        lhs: &str,
        rhs: &str,
        guard: Option<Guard>,
    ) -> Self {
        let lhs = Pattern::parse(lhs).unwrap_or_else(|e| panic!("{name}: {e}"));
        let rhs = Pattern::parse(rhs).unwrap_or_else(|e| panic!("{name}: {e}"));
        let lv = lhs.vars();
        for v in rhs.vars() {
            assert!(lv.contains(&v), "{name}: {v} is not bound by the left-hand side");
        }
        RewriteRule {
            name,
            category,
            identity,
            lhs,
            rhs: Rhs::Pattern(rhs),
            guard,
        }
    }

    fn dynamic(
        name: &'static str,
        category: Category,
        identity: &'static str,
        lhs: &str,
        shape: &'static str,
        build: RhsBuilder,
    ) -> Self {
        RewriteRule {
            name,
            category,
            identity,
            lhs: Pattern::parse(lhs).unwrap_or_else(|e| panic!("{name}: {e}")),
            rhs: Rhs::Dynamic { shape, build },
            guard: None,
        }
    }

    pub fn rhs_text(&self) -> String {
        match &self.rhs {
            Rhs::Pattern(p) => p.to_string(),
            Rhs::Dynamic { shape, .. } => shape.to_string(),
        }
    }

    /// Matches that pass the guard, with their instantiated right-hand side.
    pub fn matches(&self, g: &EGraph) -> Vec<(Id, Subst, Pattern)> {
        ematch(g, &self.lhs)
            .into_iter()
            .filter(|(_, s)| self.guard.is_none_or(|guard| guard(g, s)))
            .filter_map(|(id, s)| {
                let rhs = self.build_rhs(g, &s)?;
                Some((id, s, rhs))
            })
            .collect()
    }

    pub(crate) fn build_rhs(&self, g: &EGraph, s: &Subst) -> Option<Pattern> {
        match &self.rhs {
            Rhs::Pattern(p) => Some(p.clone()),
            Rhs::Dynamic { build, .. } => build(g, s),
        }
    }

    /// True if the rule has at least one guard-passing match.
    pub fn is_applicable(&self, g: &EGraph) -> bool {
        g.classes().any(|class| {
            match_class(g, &self.lhs, class.id, Subst::default()).into_iter().any(|s| {
                let s = s.canonical(g);
                self.guard.is_none_or(|guard| guard(g, &s)) && self.build_rhs(g, &s).is_some()
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ApplyReport {
    pub matches: usize,
    pub new_nodes: usize,
    pub new_unions: usize,
    /// Nothing was added and nothing was merged.
    pub saturated: bool,
}

/// Applies every match of `rule` (collected on the frozen graph first),
/// then rebuilds. On a node-budget breach the graph is restored to its
/// state before the call.
pub fn apply_rule(g: &mut EGraph, rule: &RewriteRule) -> Result<ApplyReport, EGraphError> {
    debug_assert!(g.is_clean(), "apply_rule needs a rebuilt graph");
    let matches = rule.matches(g);
    let before = g.size();
    let worst_case: usize = before + matches.iter().map(|(_, _, p)| pattern_size(p)).sum::<usize>();
    let snap = match g.node_limit() {
        Some(limit) if worst_case > limit => Some(g.snapshot()),
        _ => None,
    };
    let mut new_unions = 0;
    let result = (|| {
        for (id, subst, rhs) in &matches {
            let r = instantiate(g, rhs, subst)?;
            if g.union(*id, r) {
                new_unions += 1;
            }
        }
        new_unions += g.rebuild();
        let n = g.size();
        match g.node_limit() {
            Some(limit) if n > limit => Err(EGraphError::NodeBudgetExceeded { limit, attempted: n }),
            _ => Ok(()),
        }
    })();
    if let Err(e) = result {
        if let Some(s) = snap {
            g.restore(&s).expect("own snapshot");
        }
        return Err(e);
    }
    let new_nodes = g.size() - before;
    Ok(ApplyReport {
        matches: matches.len(),
        new_nodes,
        new_unions,
        saturated: new_nodes == 0 && new_unions == 0,
    })
}

fn pattern_size(p: &Pattern) -> usize {
    match p {
        Pattern::Var(_) => 0,
        Pattern::Node { children, .. } => 1 + children.iter().map(pattern_size).sum::<usize>(),
    }
}

/// The frozen rule catalog.
pub fn catalog() -> &'static [RewriteRule] {
    static CATALOG: OnceLock<Vec<RewriteRule>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

/// Looks a rule up by name.
pub fn rule(name: &str) -> Option<&'static RewriteRule> {
    catalog().iter().find(|r| r.name == name)
}

fn build_catalog() -> Vec<RewriteRule> {
    use Category::*;
    let r = RewriteRule::new;
    let rules = vec![
        // Relational.
        r("filter-merge", Relational, "σ_a(σ_b(R)) = σ_{a∧b}(R)",
          "(filter ?c1 (filter ?c2 ?t))", "(filter (and ?c1 ?c2) ?t)", None),
        r("filter-split", Relational, "σ_{a∧b}(R) = σ_a(σ_b(R))",
          "(filter (and ?c1 ?c2) ?t)", "(filter ?c1 (filter ?c2 ?t))", None),
        r("filter-pushdown-left", Relational, "σ_c(L ⋈_p R) = σ_c(L) ⋈_p R if c only uses L",
          "(filter ?c (join ?p ?l ?r))", "(join ?p (filter ?c ?l) ?r)", Some(guard_pred_in_left)),
        r("filter-pushdown-right", Relational, "σ_c(L ⋈_p R) = L ⋈_p σ_c(R) if c only uses R",
          "(filter ?c (join ?p ?l ?r))", "(join ?p ?l (filter ?c ?r))", Some(guard_pred_in_right)),
        r("filter-into-join", Relational, "σ_c(L ⋈_p R) = L ⋈_{p∧c} R",
          "(filter ?c (join ?p ?l ?r))", "(join (and ?p ?c) ?l ?r)", None),
        r("filter-below-project", Relational, "σ_p(π_C(R)) = π_C(σ_p(R))",
          "(filter ?p (project ?cols ?t))", "(project ?cols (filter ?p ?t))", None),
        r("projection-pushdown", Relational, "π_C(σ_p(R)) = σ_p(π_C(R)) if p only uses C",
          "(project ?cols (filter ?p ?t))", "(filter ?p (project ?cols ?t))", Some(guard_pred_in_list)),
        r("projection-merge", Relational, "π_A(π_B(R)) = π_A(R) for A ⊆ B",
          "(project ?c1 (project ?c2 ?t))", "(project ?c1 ?t)", None),
        r("filter-true-elim", Relational, "σ_true(R) = R",
          "(filter true ?t)", "?t", None),
        r("derived-collapse", Relational, "(SELECT * FROM (Q) AS a) = Q",
          "(derived ?a ?t)", "?t", None),
        r("derived-pullup", Relational, "(Q) AS a ⋈_p R = ((Q ⋈_p R)) AS a",
          "(join ?p (derived ?a ?t) ?r)", "(derived ?a (join ?p ?t ?r))", None),
        r("join-commute", Relational, "L ⋈_p R = R ⋈_p L",
          "(join ?p ?a ?b)", "(join ?p ?b ?a)", None),
        r("join-assoc-left", Relational, "(A ⋈_q B) ⋈_p C = A ⋈_q (B ⋈_p C) if p only uses B, C",
          "(join ?p1 (join ?p2 ?a ?b) ?c)", "(join ?p2 ?a (join ?p1 ?b ?c))", Some(guard_assoc_left)),
        r("join-assoc-right", Relational, "A ⋈_p (B ⋈_q C) = (A ⋈_p B) ⋈_q C if p only uses A, B",
          "(join ?p1 ?a (join ?p2 ?b ?c))", "(join ?p2 (join ?p1 ?a ?b) ?c)", Some(guard_assoc_right)),
        r("hash-join", Relational, "L ⋈_p R runs as a hash join when p has an equi-conjunct across L and R",
          "(join ?p ?l ?r)", "(hashjoin ?p ?l ?r)", Some(guard_equi_join)),
        // Math.
        r("arith-commute", Math, "x + y = y + x; x × y = y × x",
          "(?op:+|* ?a ?b)", "(?op:+|* ?b ?a)", None),
        r("add-assoc", Math, "(x + y) + z = x + (y + z)",
          "(+ (+ ?a ?b) ?c)", "(+ ?a (+ ?b ?c))", None),
        r("mul-assoc", Math, "(x × y) × z = x × (y × z)",
          "(* (* ?a ?b) ?c)", "(* ?a (* ?b ?c))", None),
        r("add-zero", Math, "x + 0 = x",
          "(+ ?a 0)", "?a", None),
        r("mul-one", Math, "x × 1 = x",
          "(* ?a 1)", "?a", None),
        r("mul-two-shift", Math, "x × 2 = x << 1",
          "(* ?a 2)", "(<< ?a 1)", None),
        r("mul-div-cancel", Math, "(x × 2) / 2 = x",
          "(/ (* ?a 2) 2)", "?a", None),
        RewriteRule::dynamic("const-fold", Math, "c1 ∘ c2 = [c1 ∘ c2] for ∘ in +, −, ×, ÷, <<",
          "(?op:+|-|*|/|<< ?a ?b)", "<folded constant>", fold_constants),
        // Boolean.
        r("and-commute", Boolean, "a ∧ b = b ∧ a",
          "(and ?a ?b)", "(and ?b ?a)", None),
        r("or-commute", Boolean, "a ∨ b = b ∨ a",
          "(or ?a ?b)", "(or ?b ?a)", None),
        r("and-assoc", Boolean, "(a ∧ b) ∧ c = a ∧ (b ∧ c)",
          "(and (and ?a ?b) ?c)", "(and ?a (and ?b ?c))", None),
        r("or-assoc", Boolean, "(a ∨ b) ∨ c = a ∨ (b ∨ c)",
          "(or (or ?a ?b) ?c)", "(or ?a (or ?b ?c))", None),
        r("and-true", Boolean, "a ∧ true = a",
          "(and ?a true)", "?a", None),
        r("or-false", Boolean, "a ∨ false = a",
          "(or ?a false)", "?a", None),
        r("and-idem", Boolean, "a ∧ a = a",
          "(and ?a ?a)", "?a", None),
        r("not-not", Boolean, "¬¬a = a",
          "(not (not ?a))", "?a", None),
        r("demorgan-and", Boolean, "¬(a ∧ b) = ¬a ∨ ¬b",
          "(not (and ?a ?b))", "(or (not ?a) (not ?b))", None),
        r("demorgan-or", Boolean, "¬(a ∨ b) = ¬a ∧ ¬b",
          "(not (or ?a ?b))", "(and (not ?a) (not ?b))", None),
        RewriteRule::dynamic("negate-comparison", Boolean, "¬(x < y) = x ≥ y, and likewise for =, ≠, >, ≤, ≥",
          "(not (?op:=|<>|<|>|<=|>= ?a ?b))", "(?op' ?a ?b) with ?op' the complement of ?op", flip_comparison),
    ];
    assert_eq!(rules.len(), NUM_RULES);
    rules
}

fn prov(g: &EGraph, id: Id) -> &BTreeSet<ColumnRef> {
    &g.analysis(id).provenance
}

fn guard_pred_in_left(g: &EGraph, s: &Subst) -> bool {
    prov(g, s.id("?c")).is_subset(prov(g, s.id("?l")))
}

fn guard_pred_in_right(g: &EGraph, s: &Subst) -> bool {
    prov(g, s.id("?c")).is_subset(prov(g, s.id("?r")))
}

fn guard_pred_in_list(g: &EGraph, s: &Subst) -> bool {
    prov(g, s.id("?p")).is_subset(prov(g, s.id("?cols")))
}

fn guard_assoc_left(g: &EGraph, s: &Subst) -> bool {
    let scope: BTreeSet<&ColumnRef> = prov(g, s.id("?b")).iter().chain(prov(g, s.id("?c"))).collect();
    prov(g, s.id("?p1")).iter().all(|c| scope.contains(c))
}

fn guard_assoc_right(g: &EGraph, s: &Subst) -> bool {
    let scope: BTreeSet<&ColumnRef> = prov(g, s.id("?a")).iter().chain(prov(g, s.id("?b"))).collect();
    prov(g, s.id("?p1")).iter().all(|c| scope.contains(c))
}

fn guard_equi_join(g: &EGraph, s: &Subst) -> bool {
    let l = prov(g, s.id("?l"));
    let r = prov(g, s.id("?r"));
    let mut seen = BTreeSet::new();
    has_equi_conjunct(g, s.id("?p"), l, r, &mut seen)
}

/// Searches the conjunction tree of a predicate class for `a = b` with
/// `a` a column of one side and `b` a column of the other.
fn has_equi_conjunct(
    g: &EGraph,
    id: Id,
    l: &BTreeSet<ColumnRef>,
    r: &BTreeSet<ColumnRef>,
    seen: &mut BTreeSet<Id>,
) -> bool {
    let id = g.find(id);
    if !seen.insert(id) {
        return false;
    }
    let column = |c: Id| {
        g.class(c).nodes.iter().find_map(|n| match &n.op {
            Op::Column(col) => Some(col.clone()),
            _ => None,
        })
    };
    for n in &g.class(id).nodes {
        match n.op {
            Op::Bin(BinOp::Eq) => {
                if let (Some(a), Some(b)) = (column(n.children[0]), column(n.children[1])) {
                    if (l.contains(&a) && r.contains(&b)) || (l.contains(&b) && r.contains(&a)) {
                        return true;
                    }
                }
            }
            Op::Bin(BinOp::And) => {
                if n.children.iter().any(|&c| has_equi_conjunct(g, c, l, r, seen)) {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

fn int_constant(g: &EGraph, id: Id) -> Option<i64> {
    match g.analysis(id).constant {
        Some(Value::Int(v)) => Some(v),
        _ => None,
    }
}

fn fold_constants(g: &EGraph, s: &Subst) -> Option<Pattern> {
    let Some(Op::Bin(op)) = s.op("?op") else { return None };
    let a = int_constant(g, s.id("?a"))?;
    let b = int_constant(g, s.id("?b"))?;
    match eval_binary(*op, Value::Int(a), Value::Int(b)) {
        Ok(Value::Int(v)) => Some(Pattern::node(Op::Int(v), vec![])),
        _ => None,
    }
}

fn flip_comparison(_: &EGraph, s: &Subst) -> Option<Pattern> {
    let Some(Op::Bin(op)) = s.op("?op") else { return None };
    Some(Pattern::node(
        Op::Bin(op.negated_comparison()?),
        vec![Pattern::var("?a"), Pattern::var("?b")],
    ))
}
