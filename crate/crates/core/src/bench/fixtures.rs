//! Named SQL fixtures over the mini schema. Each is matched to a rewrite
//! motif rather than to a particular TPC-H query number.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub motif: &'static str,
    pub sql: &'static str,
}

const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "nested_filter",
        motif: "filter over a filtering subquery",
        sql: "select * from (select * from orders where o_orderstatus = 'F') as f \
              where f.o_totalprice > 40000",
    },
    Fixture {
        name: "subquery_pullup",
        motif: "outer condition over a joining subquery",
        sql: "select c_name, sub.o_totalprice from customer \
              join (select o_custkey, o_totalprice from orders join lineitem on l_orderkey = o_orderkey \
                    where l_discount > 5) as sub on c_custkey = sub.o_custkey \
              where sub.o_totalprice > 40000 and c_mktsegment = 'BUILDING'",
    },
    Fixture {
        name: "in_subquery",
        motif: "IN over a subquery (unsupported)",
        sql: "select o_orderkey from orders where o_orderstatus = 'F' and o_orderkey in \
              (select o_orderkey from orders where o_totalprice > 40000)",
    },
    Fixture {
        name: "single_filter",
        motif: "already optimal single filter",
        sql: "select o_orderkey from orders where o_orderstatus = 'F' and o_totalprice > 40000",
    },
    Fixture {
        name: "renamed_redundant_filter",
        motif: "redundant filter across a renaming subquery",
        sql: "select key from (select o_orderkey as key, o_orderstatus as status, o_totalprice as price \
              from orders where o_totalprice > 40000) as inter where status = 'F' and price > 40000",
    },
    Fixture {
        name: "join3",
        motif: "three-table join with filters on both ends",
        sql: "select c_name, o_orderkey, n_name from customer \
              join orders on c_custkey = o_custkey \
              join nation on c_nationkey = n_nationkey \
              where o_orderstatus = 'F' and n_regionkey = 3",
    },
    Fixture {
        name: "join4",
        motif: "four-table join through lineitem",
        sql: "select n_name, l_extendedprice from customer \
              join orders on c_custkey = o_custkey \
              join lineitem on l_orderkey = o_orderkey \
              join nation on c_nationkey = n_nationkey \
              where l_discount > 5 and n_regionkey = 0",
    },
    Fixture {
        name: "join6",
        motif: "six-table join in the shape of TPC-H Q5",
        sql: "select n_name, l_extendedprice, l_discount \
              from customer, orders, lineitem, supplier, nation, region \
              where c_custkey = o_custkey and l_orderkey = o_orderkey and l_suppkey = s_suppkey \
              and c_nationkey = s_nationkey and s_nationkey = n_nationkey and n_regionkey = r_regionkey \
              and r_name = 'ASIA' and o_orderdate >= 365 and o_orderdate < 365 + 1095 \
              and l_extendedprice * (10 - l_discount) > 50000",
    },
];

/// Every fixture of the mini suite, including the unsupported one.
pub fn fixtures() -> &'static [Fixture] {
    FIXTURES
}

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

/// The six queries the agent comparison is scored on.
pub const ORDERING_SUITE: [&str; 6] = [
    "nested_filter",
    "subquery_pullup",
    "renamed_redundant_filter",
    "join3",
    "join4",
    "join6",
];
