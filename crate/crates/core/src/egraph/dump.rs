use std::fmt::Write;

use super::EGraph;
use crate::cost::Sort;

/// Deterministic text form: one header line, then each class in id order
/// with its analysis, followed by its nodes sorted by their printed form.
pub(super) fn dump(g: &EGraph) -> String {
    let mut out = String::new();
    writeln!(out, "egraph classes={} nodes={}", g.class_count(), g.node_count()).unwrap();
    for class in g.classes() {
        let a = &class.data;
        let sort = match a.sort {
            Sort::Relation => "rel",
            Sort::Scalar => "scalar",
            Sort::List => "list",
            Sort::Table => "table",
            Sort::Alias => "alias",
        };
        write!(
            out,
            "{} {sort} card={} width={} bytes={} cost={}",
            class.id, a.cardinality, a.width, a.width_bytes, a.best_cost
        )
        .unwrap();
        if let Some(s) = a.selectivity {
            write!(out, " sel={s}").unwrap();
        }
        if let Some(c) = &a.constant {
            write!(out, " const={c}").unwrap();
        }
        if !a.provenance.is_empty() {
            let cols: Vec<String> = a.provenance.iter().map(|c| c.qualified()).collect();
            write!(out, " cols=[{}]", cols.join(",")).unwrap();
        }
        out.push('\n');
        let mut nodes: Vec<String> = class.nodes.iter().map(|n| n.to_string()).collect();
        nodes.sort();
        for n in nodes {
            writeln!(out, "  {n}").unwrap();
        }
    }
    out
}
