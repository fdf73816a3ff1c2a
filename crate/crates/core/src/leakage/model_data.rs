//! Grouping training events with the evaluations that follow them.

use std::collections::{BTreeMap, BTreeSet};

use crate::dataflow::{resolve_call, FlowGraph, ObjId, PointsTo};
use crate::frontend::{CallId, FactBase, VarId};
use crate::specs::{SpecDb, SpecKind};

use super::reldata::RelData;

/// One dataset handed to an evaluation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EvalSite {
    pub call: CallId,
    pub line: u32,
    pub data: VarId,
    pub in_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDataTuple {
    pub object: ObjId,
    /// Variable name or class used to talk about the model.
    pub model: String,
    pub train: VarId,
    pub train_call: CallId,
    pub train_site: u32,
    pub validation: BTreeSet<VarId>,
    pub test: BTreeSet<VarId>,
    pub eval_sites: Vec<EvalSite>,
}

impl ModelDataTuple {
    pub fn evaluated(&self) -> impl Iterator<Item = VarId> + '_ {
        self.validation.iter().chain(&self.test).copied()
    }
}

enum Event {
    Train(VarId),
    Eval(Vec<VarId>),
}

pub fn compute_model_data(
    g: &FlowGraph,
    rel: &RelData,
    facts: &FactBase,
    pts: &PointsTo,
    db: &SpecDb,
) -> Vec<ModelDataTuple> {
    // per object, the train and eval events in call order
    let mut events: BTreeMap<ObjId, Vec<(CallId, Event)>> = BTreeMap::new();
    let is_dataset = |v: VarId| g.is_dataset(v);
    for call in &facts.calls {
        for t in resolve_call(facts, pts, db, call, &is_dataset) {
            let Some(o) = t.object else { continue };
            let data: Vec<VarId> = t
                .spec
                .data_args(call)
                .into_iter()
                .filter(|&v| g.is_dataset(v))
                .collect();
            let event = match t.spec.kind {
                SpecKind::Train | SpecKind::PipelineFit => match data.first() {
                    Some(&d) => Event::Train(d),
                    None => continue,
                },
                SpecKind::Eval => Event::Eval(
                    data.into_iter()
                        .filter(|&v| !g.is_single_sample(v))
                        .collect(),
                ),
                _ => continue,
            };
            events.entry(o).or_default().push((call.id, event));
        }
    }

    let mut tuples = Vec::new();
    for (o, mut evs) in events {
        evs.sort_by_key(|(c, _)| *c);
        let mut current: Option<ModelDataTuple> = None;
        for (c, ev) in evs {
            let call = facts.call(c);
            match ev {
                Event::Train(d) => {
                    tuples.extend(current.take());
                    current = Some(ModelDataTuple {
                        object: o,
                        model: model_name(facts, pts, o, call.receiver()),
                        train: d,
                        train_call: c,
                        train_site: call.line,
                        validation: BTreeSet::new(),
                        test: BTreeSet::new(),
                        eval_sites: Vec::new(),
                    });
                }
                Event::Eval(data) => {
                    if let Some(t) = current.as_mut() {
                        for d in data {
                            let site = EvalSite {
                                call: c,
                                line: call.line,
                                data: d,
                                in_loop: call.in_loop,
                            };
                            if !t.eval_sites.contains(&site) {
                                t.eval_sites.push(site);
                            }
                        }
                    }
                }
            }
        }
        tuples.extend(current);
    }

    classify(&mut tuples, rel);
    tuples.sort_by_key(|t| (t.train_call, t.object));
    tuples
}

/// Validation data is evaluated in a loop or at more than one call site
/// (counting related data); everything else evaluated is test data.
fn classify(tuples: &mut [ModelDataTuple], rel: &RelData) {
    let sites: BTreeSet<(CallId, VarId)> = tuples
        .iter()
        .flat_map(|t| t.eval_sites.iter().map(|s| (s.call, s.data)))
        .collect();
    let repeated = |s: &EvalSite| {
        s.in_loop
            || sites
                .iter()
                .any(|&(c, d)| c != s.call && (d == s.data || rel.contains(d, s.data)))
    };
    for t in tuples {
        for s in &t.eval_sites {
            if repeated(s) {
                t.validation.insert(s.data);
            }
        }
        for s in &t.eval_sites {
            if !t.validation.contains(&s.data) {
                t.test.insert(s.data);
            }
        }
    }
}

fn model_name(facts: &FactBase, pts: &PointsTo, o: ObjId, receiver: Option<VarId>) -> String {
    let named = |v: VarId| !facts.var(v).synthetic;
    if let Some(r) = receiver.filter(|&r| named(r)) {
        return facts.var(r).name.clone();
    }
    if let Some(v) = facts
        .var_ids()
        .find(|&v| named(v) && pts.pts(v).contains(&o))
    {
        return facts.var(v).name.clone();
    }
    let class = pts.object(o).class.as_deref().unwrap_or("model");
    class.rsplit('.').next().unwrap_or(class).to_string()
}
