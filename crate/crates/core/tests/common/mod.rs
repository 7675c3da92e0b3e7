//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use qrewrite::egraph::{EGraph, ENode, Id, Op};
use qrewrite::extract::IlpInstance;
use qrewrite::ra::{BinOp, Catalog, ColumnDef, RaExpr, TableDef, Type};
use rand::Rng;

/// One edit of an arithmetic e-graph. Term indices refer to earlier
/// `Leaf`/`Bin` steps and are taken modulo the number of terms so far.
#[derive(Debug, Clone)]
pub enum Step {
    Leaf(i64),
    Bin(bool, usize, usize),
    Union(usize, usize),
    Rebuild,
}

/// Terms as added, by operator and child term indices.
pub type Terms = Vec<(Op, Vec<usize>)>;

pub struct Scripted {
    pub g: EGraph,
    pub terms: Terms,
    pub ids: Vec<Id>,
    pub unions: Vec<(usize, usize)>,
    /// Audit failures seen after intermediate rebuilds.
    pub audit_errors: Vec<String>,
}

pub fn empty_catalog() -> Arc<Catalog> {
    Arc::new(Catalog::new(vec![]).unwrap())
}

pub fn random_script<R: Rng>(rng: &mut R, len: usize) -> Vec<Step> {
    (0..len)
        .map(|i| match rng.gen_range(0..10) {
            _ if i < 2 => Step::Leaf(rng.gen_range(0..3)),
            0..=2 => Step::Leaf(rng.gen_range(0..3)),
            3..=6 => Step::Bin(rng.gen(), rng.gen(), rng.gen()),
            7 | 8 => Step::Union(rng.gen(), rng.gen()),
            _ => Step::Rebuild,
        })
        .collect()
}

/// Runs a script, auditing after every rebuild, and ends rebuilt.
pub fn run_script(steps: &[Step]) -> Scripted {
    let mut s = Scripted {
        g: EGraph::new(empty_catalog()),
        terms: Vec::new(),
        ids: Vec::new(),
        unions: Vec::new(),
        audit_errors: Vec::new(),
    };
    let rebuild = |s: &mut Scripted| {
        s.g.rebuild();
        if let Err(e) = s.g.audit() {
            s.audit_errors.push(e);
        }
    };
    for step in steps {
        let n = s.terms.len();
        let (op, children) = match *step {
            Step::Leaf(v) => (Op::Int(v), vec![]),
            Step::Bin(_, _, _) | Step::Union(_, _) if n == 0 => continue,
            Step::Bin(mul, a, b) => (Op::Bin(if mul { BinOp::Mul } else { BinOp::Add }), vec![a % n, b % n]),
            Step::Union(a, b) => {
                s.g.union(s.ids[a % n], s.ids[b % n]);
                s.unions.push((a % n, b % n));
                continue;
            }
            Step::Rebuild => {
                rebuild(&mut s);
                continue;
            }
        };
        let node = ENode::new(op.clone(), children.iter().map(|&c| s.ids[c]).collect());
        s.ids.push(s.g.add(node).unwrap());
        s.terms.push((op, children));
    }
    rebuild(&mut s);
    s
}

/// Congruence closure by brute force: union the asserted pairs, then
/// merge any two terms with the same operator and pairwise equivalent
/// children until nothing changes. Returns a representative per term.
pub fn naive_closure(terms: &Terms, unions: &[(usize, usize)]) -> Vec<usize> {
    let mut rep: Vec<usize> = (0..terms.len()).collect();
    fn root(rep: &mut [usize], mut i: usize) -> usize {
        while rep[i] != i {
            i = rep[i];
        }
        i
    }
    for &(a, b) in unions {
        let (ra, rb) = (root(&mut rep, a), root(&mut rep, b));
        rep[ra.max(rb)] = ra.min(rb);
    }
    loop {
        let mut changed = false;
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                let (ri, rj) = (root(&mut rep, i), root(&mut rep, j));
                if ri == rj || terms[i].0 != terms[j].0 || terms[i].1.len() != terms[j].1.len() {
                    continue;
                }
                let congruent = terms[i]
                    .1
                    .iter()
                    .zip(&terms[j].1)
                    .all(|(&a, &b)| root(&mut rep, a) == root(&mut rep, b));
                if congruent {
                    rep[ri.max(rj)] = ri.min(rj);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..terms.len()).map(|i| root(&mut rep, i)).collect()
}

/// First pair of terms on which the e-graph and the naive closure
/// disagree, if any.
pub fn partition_mismatch(s: &Scripted) -> Option<(usize, usize)> {
    let rep = naive_closure(&s.terms, &s.unions);
    for i in 0..s.terms.len() {
        for j in i..s.terms.len() {
            let same = s.g.find(s.ids[i]) == s.g.find(s.ids[j]);
            if same != (rep[i] == rep[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Cost of a choice as the sum over classes reachable from the root,
/// each counted once, or `None` if the chosen nodes form a cycle.
pub fn choice_cost(inst: &IlpInstance, choice: &[usize]) -> Option<f64> {
    // 0 = unseen, 1 = on stack, 2 = done
    let mut state = vec![0u8; inst.classes.len()];
    fn visit(inst: &IlpInstance, choice: &[usize], c: usize, state: &mut [u8]) -> bool {
        match state[c] {
            1 => return false,
            2 => return true,
            _ => {}
        }
        state[c] = 1;
        for &k in &inst.nodes[choice[c]].children {
            if !visit(inst, choice, k, state) {
                return false;
            }
        }
        state[c] = 2;
        true
    }
    if !visit(inst, choice, inst.root, &mut state) {
        return None;
    }
    let mut total = 0.0;
    for (c, &s) in state.iter().enumerate() {
        if s == 2 {
            total += inst.nodes[choice[c]].cost;
        }
    }
    Some(total)
}

/// Number of complete choices, saturating.
pub fn choice_space(inst: &IlpInstance) -> u64 {
    inst.classes.iter().fold(1u64, |acc, c| acc.saturating_mul(c.len() as u64))
}

/// Minimum over every acyclic choice of one node per class.
pub fn brute_force(inst: &IlpInstance) -> Option<f64> {
    let k = inst.classes.len();
    let mut odometer = vec![0usize; k];
    let mut best: Option<f64> = None;
    loop {
        let choice: Vec<usize> = (0..k).map(|c| inst.classes[c][odometer[c]]).collect();
        if let Some(cost) = choice_cost(inst, &choice) {
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
        let mut c = 0;
        loop {
            if c == k {
                return best;
            }
            odometer[c] += 1;
            if odometer[c] < inst.classes[c].len() {
                break;
            }
            odometer[c] = 0;
            c += 1;
        }
    }
}

/// Instance node indices for an extraction's choices. Classes outside
/// the extracted term keep their first node, which `choice_cost` never
/// reads.
pub fn instance_choice(g: &EGraph, inst: &IlpInstance, ids: &[Id], choices: &BTreeMap<Id, ENode>) -> Vec<usize> {
    ids.iter()
        .enumerate()
        .map(|(c, id)| match choices.get(id) {
            Some(n) => {
                let local = g.class(*id).nodes.iter().position(|m| m == n).expect("chosen node in class");
                inst.classes[c][local]
            }
            None => inst.classes[c][0],
        })
        .collect()
}

/// Random extraction instance with integer costs; cycles and
/// infeasible roots are possible.
pub fn random_instance<R: Rng>(rng: &mut R, max_classes: usize) -> IlpInstance {
    use qrewrite::extract::IlpNode;
    let k = rng.gen_range(1..=max_classes);
    let mut nodes = Vec::new();
    let mut classes = Vec::new();
    for c in 0..k {
        let mut members = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            members.push(nodes.len());
            let arity = if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..=2) };
            nodes.push(IlpNode {
                class: c,
                cost: rng.gen_range(0..20) as f64,
                children: (0..arity).map(|_| rng.gen_range(0..k)).collect(),
            });
        }
        classes.push(members);
    }
    IlpInstance { nodes, classes, root: 0 }
}

/// One table `t` with 1000 rows and columns c1, c2 (bool), c3, c4 (int).
pub fn two_filter_catalog() -> Arc<Catalog> {
    let col = |name: &str, ty, w, ndv| ColumnDef {
        name: name.into(),
        ty,
        width_bytes: w,
        ndv,
    };
    Arc::new(
        Catalog::new(vec![TableDef {
            name: "t".into(),
            row_count: 1000,
            columns: vec![
                col("c1", Type::Bool, 1, 2),
                col("c2", Type::Bool, 1, 2),
                col("c3", Type::Int, 8, 100),
                col("c4", Type::Int, 8, 100),
            ],
        }])
        .unwrap(),
    )
}

pub fn is_true(c: &str) -> RaExpr {
    RaExpr::eq(RaExpr::col("t", c), RaExpr::bool(true))
}

pub fn projected_columns() -> Vec<RaExpr> {
    ["c1", "c2", "c3", "c4"].iter().map(|c| RaExpr::col("t", c)).collect()
}

/// π_{c1..c4}(σ_{c1}(σ_{c2}(t)))
pub fn nested_filters() -> RaExpr {
    RaExpr::project(projected_columns(), RaExpr::filter(is_true("c1"), RaExpr::filter(is_true("c2"), RaExpr::scan("t"))))
}

/// π_{c1..c4}(σ_{c1 ∧ c2}(t))
pub fn merged_filter() -> RaExpr {
    RaExpr::project(projected_columns(), RaExpr::filter(RaExpr::and(is_true("c1"), is_true("c2")), RaExpr::scan("t")))
}

/// Tables a, b, c with power-of-two row counts and ndvs, so every
/// estimate and cost is exact in binary floating point.
pub fn dyadic_catalog() -> Arc<Catalog> {
    let int = |name: &str, ndv| ColumnDef {
        name: name.into(),
        ty: Type::Int,
        width_bytes: 8,
        ndv,
    };
    let table = |name: &str, rows, cols: Vec<ColumnDef>| TableDef {
        name: name.into(),
        row_count: rows,
        columns: cols,
    };
    Arc::new(
        Catalog::new(vec![
            table("a", 64, vec![int("x", 8), int("y", 4)]),
            table("b", 32, vec![int("x", 8), int("z", 2)]),
            table("c", 16, vec![int("x", 4), int("w", 2)]),
        ])
        .unwrap(),
    )
}

/// Random select-project-join query over [`dyadic_catalog`] using only
/// equality predicates.
pub fn random_spj<R: Rng>(rng: &mut R) -> RaExpr {
    let mut tables = vec![("a", "y"), ("b", "z"), ("c", "w")];
    for i in (1..tables.len()).rev() {
        tables.swap(i, rng.gen_range(0..=i));
    }
    let n = rng.gen_range(1..=3);
    let mut plan = RaExpr::scan(tables[0].0);
    for &(t, _) in &tables[1..n] {
        let pred = RaExpr::eq(RaExpr::col(tables[0].0, "x"), RaExpr::col(t, "x"));
        plan = RaExpr::join(qrewrite::ra::JoinKind::Nested, pred, plan, RaExpr::scan(t));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (t, c) = tables[rng.gen_range(0..n)];
        plan = RaExpr::filter(RaExpr::eq(RaExpr::col(t, c), RaExpr::int(rng.gen_range(0..2))), plan);
    }
    if rng.gen_bool(0.5) {
        let (t, c) = tables[rng.gen_range(0..n)];
        plan = RaExpr::project(vec![RaExpr::col(t, "x"), RaExpr::col(t, c)], plan);
    }
    plan
}

/// A random query grown by random rule applications under a budget of
/// `limit` e-nodes.
pub fn random_plan_graph<R: Rng>(rng: &mut R, limit: usize) -> Option<(EGraph, Id)> {
    let rules = qrewrite::rules::catalog();
    let mut g = EGraph::new(dyadic_catalog()).with_node_limit(limit);
    let root = g.add_expr(&random_spj(rng)).ok()?;
    for _ in 0..rng.gen_range(0..8) {
        let live: Vec<_> = rules.iter().filter(|r| r.is_applicable(&g)).collect();
        if live.is_empty() {
            break;
        }
        let _ = qrewrite::rules::apply_rule(&mut g, live[rng.gen_range(0..live.len())]);
    }
    Some((g, root))
}

/// The scripted bridge session: handshake, one episode of 50 steps,
/// close. Step `i` takes the `(7·i)`-th valid action of the last mask
/// (cyclically), and every 17th step is a Reset. Returns the request
/// and response lines.
pub fn scripted_session() -> (Vec<String>, Vec<String>) {
    use qrewrite::bridge::{BridgeConfig, Session};
    use qrewrite::env::{EnvConfig, RESET};
    let (cat, _) = qrewrite::bench::gen_data(200, 0);
    let mut session = Session::new(Arc::new(BridgeConfig::with_fixtures(cat, EnvConfig::default())));
    let mut reqs = vec![
        r#"{"seq":1,"type":"hello"}"#.to_string(),
        r#"{"seq":2,"type":"rules"}"#.to_string(),
        r#"{"seq":3,"type":"reset","query_id":"nested_filter","seed":7,"node_limit":80,"horizon":100}"#.to_string(),
    ];
    let mut resps: Vec<String> = reqs.iter().map(|r| session.handle(r.as_bytes())).collect();
    for i in 0..50usize {
        let last: serde_json::Value = serde_json::from_str(resps.last().unwrap()).unwrap();
        let valid: Vec<usize> = last["observation"]["mask"]
            .as_array()
            .unwrap()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.as_bool() == Some(true))
            .map(|(a, _)| a)
            .collect();
        let action = if i % 17 == 16 { RESET } else { valid[(7 * i) % valid.len()] };
        reqs.push(format!(r#"{{"seq":{},"type":"step","action":{action}}}"#, i + 4));
        resps.push(session.handle(reqs.last().unwrap().as_bytes()));
    }
    reqs.push(r#"{"seq":54,"type":"close"}"#.to_string());
    resps.push(session.handle(reqs.last().unwrap().as_bytes()));
    (reqs, resps)
}

/// Response bytes of [`scripted_session`], one line each.
pub fn scripted_transcript() -> Vec<u8> {
    let (_, resps) = scripted_session();
    resps.iter().flat_map(|r| r.bytes().chain([b'\n'])).collect()
}

pub fn golden_path(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, got: &[u8]) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, got).unwrap();
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(got == want.as_slice(), "{} differs; rerun with UPDATE_GOLDEN=1 if intended", path.display());
}
