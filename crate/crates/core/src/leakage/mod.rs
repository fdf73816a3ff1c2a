//! Related data, model/data tuples and the three leakage rules.

mod detect;
mod model_data;
mod reldata;

pub use detect::{
    detect_multi_test, detect_overlap, detect_preprocessing, Finding, LeakageKind, Witness,
};
pub use model_data::{compute_model_data, EvalSite, ModelDataTuple};
pub use reldata::{compute_reldata, Derivation, RelData};

use crate::dataflow::{FlowGraph, PointsTo};
use crate::frontend::FactBase;
use crate::specs::SpecDb;

/// Everything the rules derived for one program.
#[derive(Debug, Clone)]
pub struct Leakage {
    pub rel: RelData,
    pub tuples: Vec<ModelDataTuple>,
    /// Undeduplicated, in rule order.
    pub findings: Vec<Finding>,
}

pub fn detect_leakage(g: &FlowGraph, facts: &FactBase, pts: &PointsTo, db: &SpecDb) -> Leakage {
    let rel = compute_reldata(g);
    let tuples = compute_model_data(g, &rel, facts, pts, db);
    let mut findings = detect_preprocessing(&tuples, &rel, g);
    findings.extend(detect_overlap(&tuples, &rel));
    findings.extend(detect_multi_test(&tuples));
    Leakage {
        rel,
        tuples,
        findings,
    }
}
