//! Points-to analysis, call resolution and the labeled flow graph.

pub mod graph;
pub mod pointer;
pub mod resolve;

pub use graph::{build_flow_graph, EdgeKind, FlowEdge, FlowGraph, SplitAnnotation, UnknownApiNote};
pub use pointer::{
    pointer_analysis, AbstractObject, AllocSite, AnalysisBudgetExceeded, ObjId, ObjKind, PointsTo,
    DEFAULT_BUDGET,
};
pub use resolve::{resolve_call, Target};
