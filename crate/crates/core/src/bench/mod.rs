//! Desk-scale benchmark: generated data, query fixtures, the agent
//! comparison, and saturation traces.

pub mod datagen;
pub mod fixtures;
pub mod runner;

use std::io::Write;
use std::sync::Arc;

use crate::agents::{egg_loop, EggConfig, StopReason, TracePoint};
use crate::env::EnvError;
use crate::ra::{Catalog, RaExpr};
use crate::rules::RewriteRule;

pub use datagen::{catalog_from_data, gen_data, gen_database, write_data, DataError, Sizes};
pub use fixtures::{fixture, fixtures, Fixture, ORDERING_SUITE};
pub use runner::{run_bench, Agent, BenchReport, BenchRow, BenchSpec, Equivalence, CSV_VERSION};

/// Saturation trace sampled after every rule application.
pub fn trace_egg(
    query: &RaExpr,
    catalog: Arc<Catalog>,
    rules: &[RewriteRule],
    node_limit: usize,
    max_sweeps: usize,
) -> Result<(Vec<TracePoint>, StopReason), EnvError> {
    let r = egg_loop(query, catalog, rules, &EggConfig { node_limit, max_sweeps })?;
    Ok((r.trace, r.stop))
}

pub fn write_trace_csv<W: Write>(trace: &[TracePoint], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["application", "sweep", "rule", "size", "node_count", "cost"])?;
    for p in trace {
        out.write_record([
            p.applications.to_string(),
            p.sweep.to_string(),
            p.rule.to_string(),
            p.size.to_string(),
            p.node_count.to_string(),
            p.cost.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
