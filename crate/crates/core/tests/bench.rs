mod common;

use std::time::Duration;

use qrewrite::bench::{fixture, run_bench, Agent, BenchSpec, Equivalence};

fn small_spec() -> BenchSpec {
    BenchSpec {
        queries: ["nested_filter", "renamed_redundant_filter", "join3", "in_subquery"]
            .iter()
            .map(|q| *fixture(q).unwrap())
            .collect(),
        seeds: 2,
        rollouts: 6,
        scale: 200,
        ilp_budget: Duration::from_secs(30),
        ..BenchSpec::mini()
    }
}

fn csv(spec: &BenchSpec) -> String {
    let mut out = Vec::new();
    run_bench(spec).write_csv(&mut out, false).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn small_bench_matches_golden_csv() {
    let spec = small_spec();
    let first = csv(&spec);
    assert_eq!(first, csv(&spec), "bench output is not deterministic");
    common::check_golden("bench_small.csv", first.as_bytes());
}

#[test]
fn single_query_egg_gives_one_row() {
    let spec = BenchSpec {
        queries: vec![*fixture("nested_filter").unwrap()],
        agents: vec![Agent::Egg],
        seeds: 1,
        scale: 200,
        ..BenchSpec::mini()
    };
    let report = run_bench(&spec);
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.equivalence, Equivalence::Pass);
    assert!(row.best_cost < row.input_cost);
    assert_eq!(csv(&spec), csv(&spec));
}

#[test]
fn every_supported_row_is_equivalent() {
    let report = run_bench(&small_spec());
    assert_eq!(report.rows.len(), 4 * 3 * 2);
    for r in &report.rows {
        let want = if r.query == "in_subquery" { Equivalence::Unsupported } else { Equivalence::Pass };
        assert_eq!(r.equivalence, want, "{} {} seed {}: {}", r.query, r.agent.name(), r.seed, r.error);
        if want == Equivalence::Pass {
            assert!(r.best_cost <= r.median_cost && r.median_cost <= r.max_cost);
            assert!(r.best_cost <= r.input_cost);
            assert!(r.ilp_optimal);
        }
    }
}
