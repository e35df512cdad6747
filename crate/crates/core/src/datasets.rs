//! Small real-world graphs bundled with the crate (see `data/` at the
//! repository root). Both are undirected.

use crate::graph::{load_edge_list, Graph};

pub const KARATE_EDGES: &str = include_str!("../../../data/karate.edges");
pub const LESMIS_EDGES: &str = include_str!("../../../data/lesmis.edges");

/// Zachary's karate club: 34 nodes, 78 unit-weight edges.
pub fn karate() -> Graph {
    load_edge_list(KARATE_EDGES.as_bytes(), false).expect("bundled karate graph parses")
}

/// Les Miserables co-occurrence network: 77 nodes, 254 weighted edges.
pub fn lesmis() -> Graph {
    load_edge_list(LESMIS_EDGES.as_bytes(), false).expect("bundled lesmis graph parses")
}
