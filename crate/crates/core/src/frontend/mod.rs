//! Source loading, parsing, lowering and SSA fact extraction.

pub mod core_ast;
pub mod desugar;
pub mod facts;
pub mod parse;
pub mod source;
pub mod ssa;

use std::path::PathBuf;

pub use core_ast::CoreModule;
pub use desugar::desugar;
pub use facts::{
    CallArg, CallFact, CallId, Callee, CombineKind, ContainerShape, Context, Def, FactBase,
    IndexFact, IndexKind, LiteralKind, SliceBound, UpdateAccess, VarId, Variable,
};
pub use parse::{parse, parse_str, Ast, SyntaxError};
pub use source::{load_source, CellLine, SourceKind, SourceUnit};
pub use ssa::{to_ssa, SsaOptions};

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed notebook {path}: {message}")]
    NotebookFormat { path: PathBuf, message: String },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// A statement the lowering could not express, replaced by a no-op.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostic {
    pub line: u32,
    pub message: String,
}
