//! Entanglement routing on physical network topologies.
//!
//! The crate simulates five routing protocols (BSM routing, three GHZ
//! measurement variants and hybrid GHZ-BSM routing) over square grids,
//! Waxman graphs, spatial scale-free graphs and real topologies read from
//! Topology Zoo GML files, and estimates their end-to-end rates by Monte
//! Carlo. The [`analytics`] module holds the closed-form path-count and
//! connectivity-threshold machinery for Waxman networks.

pub mod analytics;
pub mod graph;
pub mod generate;
pub mod io;
pub mod link;
pub mod montecarlo;
pub mod strategy;

pub use graph::{NodeId, NodePair, NodeSet, PhysicalTopology, Point, VirtualTopology};
pub use link::LinkParams;
pub use strategy::{CycleOutcome, Strategy, StrategyParams};
