//! Exact multi-context causal graph objects for finite categorical SCMs with
//! a context variable `R`: ground-truth graphs, law checks, CSI-aware
//! skeleton discovery, edge-change classification and a transfer test.

pub mod classify;
pub mod corpus;
pub mod discovery;
pub mod error;
pub mod exact;
pub mod graph;
pub mod independence;
pub mod laws;
pub mod objects;
pub mod scm;
pub mod transfer;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, NodeSet, UndirectedSkeleton};
pub use scm::{load_scm, validate_scm, Model, Scm};
