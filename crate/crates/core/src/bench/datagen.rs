//! Seeded generator for the mini TPC-H-like schema: eight tables whose
//! sizes scale with the number of orders.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ra::{Catalog, CatalogError, ColumnDef, ColumnRef, Database, InterpError, Relation, TableDef, Type, Value};

const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];
const NATIONS: [&str; 25] = [
    "ALGERIA", "ARGENTINA", "BRAZIL", "CANADA", "EGYPT", "ETHIOPIA", "FRANCE", "GERMANY", "INDIA", "INDONESIA",
    "IRAN", "IRAQ", "JAPAN", "JORDAN", "KENYA", "MOROCCO", "MOZAMBIQUE", "PERU", "CHINA", "ROMANIA",
    "SAUDI ARABIA", "VIETNAM", "RUSSIA", "UNITED KINGDOM", "UNITED STATES",
];
const NATION_REGION: [i64; 25] = [0, 1, 1, 1, 4, 0, 3, 3, 2, 2, 4, 4, 2, 4, 0, 0, 0, 1, 2, 3, 4, 2, 3, 3, 1];
const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"];
const STATUSES: [&str; 3] = ["F", "O", "P"];
const BRANDS: [&str; 5] = ["Brand#11", "Brand#12", "Brand#23", "Brand#34", "Brand#45"];

/// Days covered by `o_orderdate` (seven years).
pub const DATE_SPAN: i64 = 2555;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Data(#[from] InterpError),
}

/// Row counts for a given number of orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub region: usize,
    pub nation: usize,
    pub customer: usize,
    pub orders: usize,
    pub lineitem: usize,
    pub part: usize,
    pub supplier: usize,
    pub partsupp: usize,
}

impl Sizes {
    pub fn for_scale(orders: usize) -> Sizes {
        let frac = |d: usize| orders.div_ceil(d);
        Sizes {
            region: orders.min(5),
            nation: orders.min(25),
            customer: frac(10),
            orders,
            lineitem: 3 * orders,
            part: frac(5),
            supplier: frac(20),
            partsupp: 2 * frac(5),
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    /// Uniform key in `0..n`, or 0 when the referenced table is empty.
    fn key(&mut self, n: usize) -> Value {
        Value::Int(if n == 0 { 0 } else { self.rng.gen_range(0..n as i64) })
    }

    fn int(&mut self, lo: i64, hi: i64) -> Value {
        Value::Int(self.rng.gen_range(lo..=hi))
    }

    fn pick(&mut self, xs: &[&str]) -> Value {
        Value::Str(xs[self.rng.gen_range(0..xs.len())].to_string())
    }
}

fn relation(table: &str, columns: &[&str], rows: Vec<Vec<Value>>) -> Relation {
    Relation::new(columns.iter().map(|c| ColumnRef::new(table, *c)).collect(), rows)
}

/// Generates every table. Prices are whole currency units and dates are
/// day numbers, since the dialect has no decimals or dates.
pub fn gen_database(scale: usize, seed: u64) -> Database {
    let n = Sizes::for_scale(scale);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut db = Database::new();

    let rows = (0..n.region)
        .map(|i| vec![Value::Int(i as i64), Value::Str(REGIONS[i].into())])
        .collect();
    db.insert("region", relation("region", &["r_regionkey", "r_name"], rows));

    let rows = (0..n.nation)
        .map(|i| {
            let region = if n.region == 0 { 0 } else { NATION_REGION[i] % n.region as i64 };
            vec![Value::Int(i as i64), Value::Str(NATIONS[i].into()), Value::Int(region)]
        })
        .collect();
    db.insert("nation", relation("nation", &["n_nationkey", "n_name", "n_regionkey"], rows));

    let rows = (0..n.customer)
        .map(|i| {
            vec![
                Value::Int(i as i64),
                Value::Str(format!("Customer#{i:06}")),
                g.key(n.nation),
                g.pick(&SEGMENTS),
                g.int(-999, 9999),
            ]
        })
        .collect();
    db.insert(
        "customer",
        relation("customer", &["c_custkey", "c_name", "c_nationkey", "c_mktsegment", "c_acctbal"], rows),
    );

    let rows = (0..n.orders)
        .map(|i| {
            vec![
                Value::Int(i as i64),
                g.key(n.customer),
                g.pick(&STATUSES),
                g.int(1000, 100_000),
                g.int(0, DATE_SPAN - 1),
            ]
        })
        .collect();
    db.insert(
        "orders",
        relation("orders", &["o_orderkey", "o_custkey", "o_orderstatus", "o_totalprice", "o_orderdate"], rows),
    );

    let rows = (0..n.lineitem)
        .map(|i| {
            let order = if n.orders == 0 { 0 } else { (i % n.orders) as i64 };
            vec![
                Value::Int(order),
                g.key(n.part),
                g.key(n.supplier),
                g.int(1, 50),
                g.int(900, 50_000),
                g.int(0, 10),
            ]
        })
        .collect();
    db.insert(
        "lineitem",
        relation(
            "lineitem",
            &["l_orderkey", "l_partkey", "l_suppkey", "l_quantity", "l_extendedprice", "l_discount"],
            rows,
        ),
    );

    let rows = (0..n.part)
        .map(|i| {
            vec![
                Value::Int(i as i64),
                Value::Str(format!("part {i}")),
                g.pick(&BRANDS),
                g.int(1, 50),
                g.int(900, 2000),
            ]
        })
        .collect();
    db.insert(
        "part",
        relation("part", &["p_partkey", "p_name", "p_brand", "p_size", "p_retailprice"], rows),
    );

    let rows = (0..n.supplier)
        .map(|i| {
            vec![
                Value::Int(i as i64),
                Value::Str(format!("Supplier#{i:06}")),
                g.key(n.nation),
                g.int(-999, 9999),
            ]
        })
        .collect();
    db.insert(
        "supplier",
        relation("supplier", &["s_suppkey", "s_name", "s_nationkey", "s_acctbal"], rows),
    );

    let rows = (0..n.partsupp)
        .map(|i| {
            let part = if n.part == 0 { 0 } else { (i % n.part) as i64 };
            vec![Value::Int(part), g.key(n.supplier), g.int(1, 9999), g.int(1, 1000)]
        })
        .collect();
    db.insert(
        "partsupp",
        relation("partsupp", &["ps_partkey", "ps_suppkey", "ps_availqty", "ps_supplycost"], rows),
    );
    db
}

/// Catalog whose row counts, distinct counts and widths are measured on
/// `db`. Strings are as wide as their longest value; tables keep the
/// database's (alphabetical) order.
pub fn catalog_from_data(db: &Database) -> Catalog {
    let tables = db
        .tables
        .iter()
        .map(|(name, rel)| {
            let columns = rel
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let distinct: BTreeSet<&Value> = rel.rows.iter().map(|r| &r[i]).collect();
                    let ty = rel
                        .rows
                        .first()
                        .map(|r| r[i].ty())
                        .unwrap_or_else(|| column_type(&c.column));
                    let width_bytes = match ty {
                        Type::Int => 8,
                        Type::Bool => 1,
                        Type::Str => distinct
                            .iter()
                            .map(|v| match v {
                                Value::Str(s) => s.len() as u32,
                                _ => 0,
                            })
                            .max()
                            .unwrap_or(0)
                            .max(1),
                    };
                    ColumnDef {
                        name: c.column.clone(),
                        ty,
                        width_bytes,
                        ndv: distinct.len() as u64,
                    }
                })
                .collect();
            TableDef {
                name: name.clone(),
                row_count: rel.len() as u64,
                columns,
            }
        })
        .collect();
    Catalog::new(tables).expect("generated schema is valid")
}

// Types of the string columns, for empty tables.
fn column_type(column: &str) -> Type {
    match column {
        "r_name" | "n_name" | "c_name" | "c_mktsegment" | "o_orderstatus" | "p_name" | "p_brand" | "s_name" => {
            Type::Str
        }
        _ => Type::Int,
    }
}

/// Database plus its measured catalog.
pub fn gen_data(scale: usize, seed: u64) -> (Catalog, Database) {
    let db = gen_database(scale, seed);
    (catalog_from_data(&db), db)
}

/// Writes `<table>.csv` for every table and `catalog.toml` into `dir`.
pub fn write_data(dir: impl AsRef<Path>, scale: usize, seed: u64) -> Result<Catalog, DataError> {
    let (cat, db) = gen_data(scale, seed);
    db.write_csv_dir(dir.as_ref())?;
    cat.save(dir.as_ref().join("catalog.toml"))?;
    Ok(cat)
}
