pub mod agents;
pub mod bench;
pub mod bridge;
pub mod cost;
pub mod egraph;
pub mod env;
pub mod extract;
pub mod ra;
pub mod rules;
