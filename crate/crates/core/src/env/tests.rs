use super::*;
use crate::ra::{ColumnDef, TableDef, Type};
use crate::rules::rule;

fn two_filter_catalog() -> Arc<Catalog> {
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

fn nested() -> RaExpr {
    let is_true = |n: &str| RaExpr::eq(RaExpr::col("t", n), RaExpr::bool(true));
    let cols = ["c1", "c2", "c3", "c4"].iter().map(|n| RaExpr::col("t", n)).collect();
    RaExpr::project(cols, RaExpr::filter(is_true("c1"), RaExpr::filter(is_true("c2"), RaExpr::scan("t"))))
}

fn index(name: &str) -> usize {
    catalog().iter().position(|r| r.name == name).unwrap()
}

fn env() -> Env {
    Env::new(&nested(), two_filter_catalog(), EnvConfig::default()).unwrap()
}

#[test]
fn initial_observation() {
    let e = env();
    assert_eq!(e.cost(), 6500.0);
    let obs = e.observe().unwrap();
    let g = e.graph();
    assert_eq!(obs.features.len(), g.class_count() + g.node_count());
    assert!(obs.features.iter().all(|r| r.len() == 69));
    assert!(obs.mask[index("filter-merge")]);
    assert!(obs.mask[RESET]);
    assert!(!obs.mask[index("join-commute")]);
    assert_eq!(obs.edges.len(), obs.edge_attrs.len());
    for r in &obs.features {
        if r[0] == 1.0 {
            assert!(r[2..66].iter().all(|&x| x == 0.0), "class rows have no operator bits");
        } else {
            assert_eq!(r[2..66].iter().filter(|&&x| x == 1.0).count(), 1);
        }
    }
    // The single-predicate filter keeps half of 1000 rows.
    let half = 500f64.ln_1p();
    assert!(obs.features.iter().any(|r| r[0] == 1.0 && r[66] == half));
}

#[test]
fn filter_merge_rewards_cost_drop() {
    let mut e = env();
    let size = e.graph().size();
    let r = e.step(index("filter-merge")).unwrap();
    assert_eq!(r.info.extracted_cost, 6000.0);
    let growth = (r.info.size - size) as f64;
    let expected = 6500f64.ln_1p() - 6000f64.ln_1p() - 0.1 * growth / 1000.0;
    assert!((r.reward - expected).abs() < 1e-12, "{} vs {expected}", r.reward);
    assert!(r.reward > 0.0);

    let before = e.graph().dump();
    let again = e.step(index("filter-merge")).unwrap();
    assert!(again.info.saturated_action);
    assert_eq!(again.reward, -0.1);
    assert_eq!(e.graph().dump(), before);
}

#[test]
fn reset_on_fresh_graph_changes_nothing() {
    let mut e = env();
    let nodes = e.graph().node_count();
    let r = e.step(RESET).unwrap();
    assert_eq!(r.info.node_count, nodes);
    assert_eq!(r.reward, 0.0);
    assert_eq!(r.info.extracted_cost, 6500.0);
}

#[test]
fn reset_keeps_cost_and_keeps_only_the_plan() {
    let mut e = env();
    for name in ["filter-merge", "and-commute", "filter-split", "projection-pushdown"] {
        e.step(index(name)).unwrap();
    }
    let cost = e.cost();
    let plan = e.best_plan().unwrap();
    e.step(RESET).unwrap();
    assert_eq!(e.cost(), cost);
    let mut fresh = EGraph::new(two_filter_catalog());
    fresh.add_expr(&plan).unwrap();
    assert_eq!(e.graph().node_count(), fresh.node_count());
    assert_eq!(e.best_plan().unwrap(), plan);
}

#[test]
fn budget_breach_rolls_back() {
    let cfg = EnvConfig {
        node_limit: 13,
        ..EnvConfig::default()
    };
    let mut e = Env::new(&nested(), two_filter_catalog(), cfg).unwrap();
    assert_eq!(e.graph().node_count(), 13);
    assert_eq!(e.graph().size(), 13);
    let before = e.graph().dump();
    let r = e.step(index("filter-merge")).unwrap();
    assert!(r.info.rolled_back);
    assert_eq!(r.reward, -0.1);
    assert_eq!(e.graph().dump(), before);
    assert!(!r.done);
}

#[test]
fn horizon_ends_episode() {
    let cfg = EnvConfig {
        horizon: 2,
        ..EnvConfig::default()
    };
    let mut e = Env::new(&nested(), two_filter_catalog(), cfg).unwrap();
    assert!(!e.step(RESET).unwrap().done);
    assert!(e.step(RESET).unwrap().done);
    assert!(matches!(e.step(RESET), Err(EnvError::EpisodeFinished)));
}

#[test]
fn invalid_action() {
    assert!(matches!(env().step(NUM_ACTIONS), Err(EnvError::InvalidAction(35))));
}

#[test]
fn cost_terms_telescope() {
    let mut e = env();
    let first = e.cost();
    let mut sum = 0.0;
    for name in ["filter-split", "filter-merge", "and-commute", "projection-pushdown", "filter-below-project"] {
        let size = e.graph().size();
        let (r, info) = e.advance(index(name)).unwrap();
        let penalty = if info.saturated_action { 0.1 } else { 0.0 }
            + 0.1 * info.size.saturating_sub(size) as f64 / 1000.0;
        sum += r + penalty;
    }
    assert!((sum - (first.ln_1p() - e.cost().ln_1p())).abs() < 1e-9);
}

#[test]
fn observations_are_deterministic() {
    let run = || {
        let mut e = env();
        let mut out = vec![e.observe().unwrap()];
        for a in [0, 1, 23, 5, RESET, 6] {
            out.push(e.step(a).unwrap().observation);
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn small_vocabulary_is_rejected() {
    let cfg = EnvConfig {
        vocab: 10,
        ..EnvConfig::default()
    };
    assert!(matches!(
        Env::new(&nested(), two_filter_catalog(), cfg),
        Err(EnvError::VocabularyOverflow { .. })
    ));
}

#[test]
fn rule_lookup_matches_index() {
    assert_eq!(catalog()[index("filter-merge")].name, rule("filter-merge").unwrap().name);
}
