//! Kernel synthesis: the restricted source grammar, structural fingerprints,
//! alpha-renaming, the random kernel generator and its analytic oracle.

pub mod ast;
pub mod fingerprint;
pub mod generate;
pub mod lexer;
pub mod oracle;
pub mod parse;
pub mod rename;
pub mod reserved;

pub use fingerprint::{canonical_form, fingerprint};
pub use generate::{generate, ComputeOp, Dtype, GeneratedKernel, KernelGenSpec, KernelMetadata, BLOCK_SIZES};
pub use oracle::{
    embedded_metadata, oracle_counters, streaming_hit_rates, HitRates, MetadataStore, OracleModel, Sidecar,
};
pub use parse::{dependency_report, validate_restricted, DependencyReport, ParsedSource};
pub use rename::{rename_source, RenameMap};

use crate::roofline::RooflineError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsatisfiable kernel spec: {0}")]
    Spec(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("invalid oracle input: {0}")]
    Oracle(String),
    #[error(transparent)]
    Roofline(#[from] RooflineError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed metadata in {path}: {message}")]
    Metadata { path: String, message: String },
    #[error("internal generator fault: {0}")]
    Internal(String),
}
