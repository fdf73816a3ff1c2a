use crate::dataflow::{EdgeKind, FlowGraph};
use crate::frontend::VarId;

use super::model_data::ModelDataTuple;
use super::reldata::RelData;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum LeakageKind {
    Preprocessing,
    Overlap,
    MultiTest,
}

impl LeakageKind {
    pub const ALL: [LeakageKind; 3] = [
        LeakageKind::Preprocessing,
        LeakageKind::Overlap,
        LeakageKind::MultiTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LeakageKind::Preprocessing => "preprocessing",
            LeakageKind::Overlap => "overlap",
            LeakageKind::MultiTest => "multi_test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// `reduce` is an edge index; `path` leads from its target to `train`.
    Preprocessing {
        tuple: usize,
        reduce: usize,
        eval: VarId,
        path: Vec<usize>,
    },
    Overlap {
        tuple: usize,
    },
    MultiTest {
        tuples: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub kind: LeakageKind,
    pub witness: Witness,
}

pub fn detect_preprocessing(
    tuples: &[ModelDataTuple],
    rel: &RelData,
    g: &FlowGraph,
) -> Vec<Finding> {
    let mut out = Vec::new();
    for (r, e) in g.edges().iter().enumerate() {
        if e.kind != EdgeKind::Reduce || !g.is_dataset(e.src) {
            continue;
        }
        let reach = g.data_flow_from(e.dst);
        for (ti, t) in tuples.iter().enumerate() {
            if !reach[t.train.index()] {
                continue;
            }
            for d in t.evaluated() {
                if rel.contains(d, e.src) {
                    let path = g.path(e.dst, t.train).unwrap_or_default();
                    out.push(Finding {
                        kind: LeakageKind::Preprocessing,
                        witness: Witness::Preprocessing {
                            tuple: ti,
                            reduce: r,
                            eval: d,
                            path,
                        },
                    });
                }
            }
        }
    }
    out
}

/// Fires only for tuples that were evaluated at all.
pub fn detect_overlap(tuples: &[ModelDataTuple], rel: &RelData) -> Vec<Finding> {
    tuples
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let mut evaluated = t.evaluated().peekable();
            evaluated.peek().is_some() && evaluated.all(|d| rel.contains(d, t.train))
        })
        .map(|(ti, _)| Finding {
            kind: LeakageKind::Overlap,
            witness: Witness::Overlap { tuple: ti },
        })
        .collect()
}

/// Whole-program: some model has validation data and no model has test data.
pub fn detect_multi_test(tuples: &[ModelDataTuple]) -> Option<Finding> {
    let some_validation = tuples.iter().any(|t| !t.validation.is_empty());
    let no_test = tuples.iter().all(|t| t.test.is_empty());
    (some_validation && no_test).then(|| Finding {
        kind: LeakageKind::MultiTest,
        witness: Witness::MultiTest {
            tuples: (0..tuples.len())
                .filter(|&i| !tuples[i].validation.is_empty())
                .collect(),
        },
    })
}

impl Finding {
    /// Re-checks the rule body this finding claims against the relations.
    pub fn holds(&self, tuples: &[ModelDataTuple], rel: &RelData, g: &FlowGraph) -> bool {
        match &self.witness {
            Witness::Preprocessing {
                tuple,
                reduce,
                eval,
                path,
            } => {
                let (Some(t), Some(e)) = (tuples.get(*tuple), g.edges().get(*reduce)) else {
                    return false;
                };
                let chained = path
                    .windows(2)
                    .all(|w| g.edges()[w[0]].dst == g.edges()[w[1]].src);
                let ends = match (path.first(), path.last()) {
                    (Some(&a), Some(&b)) => {
                        g.edges()[a].src == e.dst && g.edges()[b].dst == t.train
                    }
                    _ => e.dst == t.train,
                };
                e.kind == EdgeKind::Reduce
                    && t.evaluated().any(|d| d == *eval)
                    && rel.contains(*eval, e.src)
                    && chained
                    && ends
            }
            Witness::Overlap { tuple } => tuples.get(*tuple).is_some_and(|t| {
                t.evaluated().next().is_some() && t.evaluated().all(|d| rel.contains(d, t.train))
            }),
            Witness::MultiTest { tuples: ids } => {
                !ids.is_empty()
                    && ids
                        .iter()
                        .all(|&i| tuples.get(i).is_some_and(|t| !t.validation.is_empty()))
                    && tuples.iter().all(|t| t.test.is_empty())
            }
        }
    }
}
