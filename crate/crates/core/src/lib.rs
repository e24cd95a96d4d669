//! Dynamic graph-algorithms toolkit built around minimum spanning forest
//! maintenance under edge deletions and batched insertions: local
//! push-relabel flow routines, locally balanced sparse cuts, expander
//! pruning, MSF decomposition, contraction reductions and the recursive
//! dynamic MSF engine, with brute-force oracles for desk-scale validation.

pub mod contraction;
pub mod flow;
pub mod lbs;
pub mod forest;
pub mod graph;
pub mod meter;
pub mod msf;
pub mod oracle;
pub mod pruning;

pub use graph::{degree_reduce, parse_edge_list, write_edge_list, EdgeId, Frac, Graph, NodeId, WKey};
