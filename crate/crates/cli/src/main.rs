use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use qrewrite::agents::{egg_loop_all, run_episode, EggConfig, Policy};
use qrewrite::bench::{self, fixture, run_bench, Agent, BenchSpec, Equivalence};
use qrewrite::bridge::{serve_stdio, serve_tcp, BridgeConfig};
use qrewrite::egraph::EGraph;
use qrewrite::env::{Env, EnvConfig};
use qrewrite::extract::{build_instance, greedy_extract, ilp_extract, ExtractResult, DEFAULT_ILP_CAP};
use qrewrite::ra::{emit_sql, interpret, parse_sql, Catalog, Database, Dialect, RaExpr};
use qrewrite::rules::catalog;

const EXIT_USAGE: u8 = 1;
const EXIT_OPTIMIZE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "qrewrite", version, about = "Guided equality saturation for SQL query rewriting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentArg {
    Random,
    Heuristic,
    Egg,
    /// Driven over the bridge; use `serve`.
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExtractorArg {
    Greedy,
    Ilp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Plan,
    Sql,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one query.
    Optimize {
        /// File holding the SQL text.
        #[arg(long)]
        sql: PathBuf,
        /// Catalog TOML file.
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, value_enum, default_value = "heuristic")]
        agent: AgentArg,
        #[arg(long, default_value_t = 1000)]
        node_limit: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, value_enum, default_value = "ilp")]
        extractor: ExtractorArg,
        #[arg(long, value_enum, default_value = "sql")]
        emit: Emit,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sweeps cap of the egg agent.
        #[arg(long, default_value_t = 30)]
        max_sweeps: usize,
        /// Seconds the exact extractor may spend.
        #[arg(long, default_value_t = 10.0)]
        ilp_budget: f64,
        /// Directory of `<table>.csv` files; if given, the plan is checked
        /// against the input query on this data.
        #[arg(long)]
        verify_data: Option<PathBuf>,
        #[arg(long)]
        dump_egraph: Option<PathBuf>,
        #[arg(long)]
        dump_ilp: Option<PathBuf>,
    },
    /// Compare agents over a fixture suite.
    Bench {
        #[arg(long, default_value = "mini")]
        suite: String,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 100)]
        rollouts: usize,
        #[arg(long, default_value_t = 1000)]
        node_limit: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 30)]
        max_sweeps: usize,
        /// Comma-separated agents.
        #[arg(long, default_value = "egg,heuristic,random")]
        agents: String,
        /// Comma-separated fixture names; all by default.
        #[arg(long)]
        queries: Option<String>,
        /// Orders rows of the generated data.
        #[arg(long, default_value_t = 1000)]
        scale: usize,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        #[arg(long, default_value_t = 2.0)]
        ilp_budget: f64,
        /// Exploration rate of the last heuristic rollout.
        #[arg(long, default_value_t = BenchSpec::mini().explore)]
        explore: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the wall-clock columns out of the CSV.
        #[arg(long)]
        no_timings: bool,
    },
    /// Per-application node count and cost of the saturating loop.
    TraceEgg {
        /// Fixture name.
        #[arg(long, conflicts_with = "sql")]
        query: Option<String>,
        /// File holding the SQL text, with `--catalog`.
        #[arg(long, requires = "catalog")]
        sql: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 3500)]
        node_limit: usize,
        #[arg(long, default_value_t = 30)]
        max_sweeps: usize,
        #[arg(long, default_value_t = 1000)]
        scale: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rule catalog.
    Rules {
        #[command(subcommand)]
        what: RulesCommand,
    },
    /// Environment service for external agents.
    Serve {
        #[arg(long, conflicts_with = "port")]
        stdio: bool,
        #[arg(long)]
        port: Option<u16>,
        /// Catalog TOML; defaults to the generated mini catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        node_limit: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 1000)]
        scale: usize,
    },
    /// Write the mini database as CSV plus catalog.toml.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        scale: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum RulesCommand {
    List,
}

/// Errors mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Optimize(anyhow::Error),
    Verify(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Optimize(e.into())
    }
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_catalog(path: &PathBuf) -> Result<Catalog, Failure> {
    Catalog::load(path).map_err(|e| Failure::Usage(anyhow!("{}: {e}", path.display())))
}

fn read_sql(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(anyhow!("{}: {e}", path.display())))
}

struct Optimized {
    graph: EGraph,
    root: qrewrite::egraph::Id,
    input_cost: f64,
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    sql: &PathBuf,
    catalog_path: &PathBuf,
    agent: AgentArg,
    node_limit: usize,
    horizon: usize,
    extractor: ExtractorArg,
    emit: Emit,
    seed: u64,
    max_sweeps: usize,
    ilp_budget: f64,
    verify_data: &Option<PathBuf>,
    dump_egraph: &Option<PathBuf>,
    dump_ilp: &Option<PathBuf>,
) -> Result<(), Failure> {
    let cat = Arc::new(load_catalog(catalog_path)?);
    let text = read_sql(sql)?;
    let query = parse_sql(&text, &cat).map_err(|e| Failure::Optimize(anyhow!("{e}")))?;
    let cfg = EnvConfig {
        node_limit,
        horizon,
        seed,
        ..EnvConfig::default()
    };
    let opt = match agent {
        AgentArg::External => {
            return Err(Failure::Usage(anyhow!("the external agent drives the environment through `serve`")))
        }
        AgentArg::Egg => {
            let r = egg_loop_all(&query, cat.clone(), &EggConfig { node_limit, max_sweeps })?;
            let input_cost = Env::new(&query, cat.clone(), cfg)?.cost();
            Optimized {
                root: r.graph.find(r.extraction.root),
                graph: r.graph,
                input_cost,
            }
        }
        AgentArg::Random | AgentArg::Heuristic => {
            use rand::SeedableRng;
            let mut env = Env::new(&query, cat.clone(), cfg)?;
            let input_cost = env.cost();
            let policy = if agent == AgentArg::Random { Policy::Random } else { Policy::Heuristic };
            run_episode(&mut env, policy, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))?;
            Optimized {
                root: env.root(),
                graph: env.graph().clone(),
                input_cost,
            }
        }
    };
    if let Some(p) = dump_egraph {
        std::fs::write(p, opt.graph.dump()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = dump_ilp {
        let (inst, _) = build_instance(&opt.graph, opt.root);
        std::fs::write(p, inst.to_lp()).with_context(|| format!("writing {}", p.display()))?;
    }
    let result: ExtractResult = match extractor {
        ExtractorArg::Greedy => greedy_extract(&opt.graph, opt.root)?,
        ExtractorArg::Ilp => ilp_extract(
            &opt.graph,
            opt.root,
            Duration::from_secs_f64(ilp_budget.max(0.0)),
            DEFAULT_ILP_CAP,
        )?,
    };
    log::info!(
        "cost {} -> {} with {} e-nodes",
        opt.input_cost,
        result.total_cost,
        opt.graph.node_count()
    );
    let sql_text = emit_sql(&result.expr, &cat, Dialect::Generic)?;
    let mut out = io::stdout().lock();
    match emit {
        Emit::Plan => writeln!(out, "{}", result.expr)?,
        Emit::Sql => writeln!(out, "{sql_text}")?,
        Emit::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["input_cost", "cost", "nodes", "optimal", "sql"])?;
            w.write_record([
                opt.input_cost.to_string(),
                result.total_cost.to_string(),
                opt.graph.node_count().to_string(),
                result.optimal.to_string(),
                sql_text,
            ])?;
            w.flush()?;
        }
    }
    if let Some(dir) = verify_data {
        verify(&query, &result.expr, &cat, dir)?;
    }
    Ok(())
}

fn verify(query: &RaExpr, plan: &RaExpr, cat: &Catalog, dir: &PathBuf) -> Result<(), Failure> {
    let db = Database::load_csv_dir(dir, cat).map_err(|e| Failure::Usage(anyhow!("{}: {e}", dir.display())))?;
    let expected = interpret(query, &db).map_err(|e| Failure::Verify(anyhow!("input query: {e}")))?;
    let got = interpret(plan, &db).map_err(|e| Failure::Verify(anyhow!("rewritten plan: {e}")))?;
    if !got.bag_eq(&expected) {
        return Err(Failure::Verify(anyhow!(
            "rewritten plan returns {} rows, the input query {}",
            got.len(),
            expected.len()
        )));
    }
    Ok(())
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| f(x).ok_or_else(|| Failure::Usage(anyhow!("unknown {what} `{x}`"))))
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Optimize {
            sql,
            catalog,
            agent,
            node_limit,
            horizon,
            extractor,
            emit,
            seed,
            max_sweeps,
            ilp_budget,
            verify_data,
            dump_egraph,
            dump_ilp,
        } => optimize(
            &sql,
            &catalog,
            agent,
            node_limit,
            horizon,
            extractor,
            emit,
            seed,
            max_sweeps,
            ilp_budget,
            &verify_data,
            &dump_egraph,
            &dump_ilp,
        ),
        Command::Bench {
            suite,
            seeds,
            rollouts,
            node_limit,
            horizon,
            max_sweeps,
            agents,
            queries,
            scale,
            data_seed,
            ilp_budget,
            explore,
            out,
            no_timings,
        } => {
            if suite != "mini" {
                return Err(Failure::Usage(anyhow!("unknown suite `{suite}`; only `mini` exists")));
            }
            let mut spec = BenchSpec::mini();
            spec.seeds = seeds;
            spec.rollouts = rollouts;
            spec.node_limit = node_limit;
            spec.horizon = horizon;
            spec.max_sweeps = max_sweeps;
            spec.agents = parse_list(&agents, Agent::from_name, "agent")?;
            if let Some(q) = queries {
                spec.queries = parse_list(&q, |n| fixture(n).copied(), "query")?;
            }
            spec.scale = scale;
            spec.data_seed = data_seed;
            spec.ilp_budget = Duration::from_secs_f64(ilp_budget.max(0.0));
            spec.explore = explore;
            let report = run_bench(&spec);
            report.write_csv(output(&out)?, !no_timings)?;
            eprint!("{}", report.summary());
            if report.rows.iter().any(|r| r.equivalence == Equivalence::Fail) {
                return Err(Failure::Verify(anyhow!("some rewritten plans differ from their input query")));
            }
            Ok(())
        }
        Command::TraceEgg {
            query,
            sql,
            catalog: catalog_path,
            node_limit,
            max_sweeps,
            scale,
            out,
        } => {
            let (cat, q) = match (query, sql, catalog_path) {
                (Some(name), None, _) => {
                    let fx = fixture(&name).ok_or_else(|| Failure::Usage(anyhow!("unknown fixture `{name}`")))?;
                    let (cat, _) = bench::gen_data(scale, 0);
                    let q = parse_sql(fx.sql, &cat).map_err(|e| Failure::Optimize(anyhow!("{e}")))?;
                    (cat, q)
                }
                (None, Some(sql), Some(c)) => {
                    let cat = load_catalog(&c)?;
                    let q = parse_sql(&read_sql(&sql)?, &cat).map_err(|e| Failure::Optimize(anyhow!("{e}")))?;
                    (cat, q)
                }
                _ => return Err(Failure::Usage(anyhow!("give either --query or --sql with --catalog"))),
            };
            let (trace, stop) = bench::trace_egg(&q, Arc::new(cat), catalog(), node_limit, max_sweeps)?;
            log::info!("stopped: {stop:?}");
            bench::write_trace_csv(&trace, output(&out)?)?;
            Ok(())
        }
        Command::Rules {
            what: RulesCommand::List,
        } => {
            let mut out = io::stdout().lock();
            for (i, r) in catalog().iter().enumerate() {
                writeln!(out, "{i:>2}  {:<22} {:<10} {}", r.name, r.category.name(), r.identity)?;
            }
            writeln!(out, "{:>2}  {:<22} {:<10} replace the e-graph by its best plan", catalog().len(), "reset", "control")?;
            Ok(())
        }
        Command::Serve {
            stdio,
            port,
            catalog: catalog_path,
            node_limit,
            horizon,
            scale,
        } => {
            let cat = match catalog_path {
                Some(p) => load_catalog(&p)?,
                None => bench::gen_data(scale, 0).0,
            };
            let env = EnvConfig {
                node_limit,
                horizon,
                ..EnvConfig::default()
            };
            let cfg = Arc::new(BridgeConfig::with_fixtures(cat, env));
            match (stdio, port) {
                (true, None) => serve_stdio(cfg)?,
                (false, Some(p)) => serve_tcp(cfg, p)?,
                _ => return Err(Failure::Usage(anyhow!("give exactly one of --stdio and --port"))),
            }
            Ok(())
        }
        Command::GenData { out, scale, seed } => {
            let cat = bench::write_data(&out, scale, seed)?;
            eprintln!("wrote {} tables to {}", cat.tables.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, e) = match f {
                Failure::Usage(e) => (EXIT_USAGE, e),
                Failure::Optimize(e) => (EXIT_OPTIMIZE, e),
                Failure::Verify(e) => (EXIT_VERIFY, e),
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
