//! Specification frontend, synthesis and analysis for automaton-guided generative agents.

pub mod abstraction;
pub mod causality;
pub mod codegen;
pub mod corpus;
pub mod formula;
pub mod frontend;
pub mod graph;
pub mod nba;
pub mod sat;
pub mod mealy;
pub mod monitor;
pub mod synthesis;
