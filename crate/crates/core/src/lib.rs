//! Toolkit for building GPU-kernel performance-counter datasets, serving
//! counter predictions from pluggable backends and scoring them by relative
//! error.

pub mod chat;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod ingest;
pub mod predict;
pub mod prompt;
pub mod roofline;
pub mod server;
pub mod synth;
