//! Vulnerability classification of C functions from bags of AST
//! path-contexts with a path-attention network.

pub mod cli;
pub mod corpus;
pub mod cparse;
pub mod harness;
pub mod model;
pub mod pathmine;
