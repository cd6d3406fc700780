//! AMR concept identification with derivation actions.

pub mod actions;
pub mod align;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod graph;
pub mod pipeline;
pub mod relations;
