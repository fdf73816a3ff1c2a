//! Labeled data-flow graph over SSA variables.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::frontend::{CallFact, CallId, Callee, Def, FactBase, IndexKind, VarId};
use crate::specs::{ReceiverReq, ResultRole, SpecDb, SpecKind, SplitPart};
use crate::typeinf::{TypeClass, TypeMap};

use super::pointer::{ObjKind, PointsTo};
use super::resolve::{function_path, resolve_call, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Flow,
    Map,
    Reduce,
    Dup,
    Filter,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 5] = [
        EdgeKind::Flow,
        EdgeKind::Map,
        EdgeKind::Reduce,
        EdgeKind::Dup,
        EdgeKind::Filter,
    ];

    /// Kinds that must join two datasets.
    pub fn needs_datasets(self) -> bool {
        matches!(self, EdgeKind::Map | EdgeKind::Dup | EdgeKind::Filter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitAnnotation {
    pub part: SplitPart,
    /// Position of the part in the splitter's result tuple.
    pub position: usize,
    pub call: CallId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowEdge {
    pub src: VarId,
    pub dst: VarId,
    pub kind: EdgeKind,
    pub line: u32,
    pub call: Option<CallId>,
    /// Index of the spec that produced the edge.
    pub spec: Option<usize>,
    pub api: Option<String>,
    pub split: Option<SplitAnnotation>,
}

impl FlowEdge {
    pub fn new(src: VarId, dst: VarId, kind: EdgeKind, line: u32) -> Self {
        FlowEdge {
            src,
            dst,
            kind,
            line,
            call: None,
            spec: None,
            api: None,
            split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownApiNote {
    pub call: CallId,
    pub line: u32,
    pub result: VarId,
}

#[derive(Debug, Clone, Default)]
pub struct FlowGraph {
    classes: Vec<TypeClass>,
    single_sample: Vec<bool>,
    edges: Vec<FlowEdge>,
    keys: HashSet<(VarId, VarId, EdgeKind)>,
    succ: Vec<Vec<usize>>,
    pub notes: Vec<UnknownApiNote>,
}

impl FlowGraph {
    /// Graph over `classes.len()` nodes without edges.
    pub fn with_nodes(classes: Vec<TypeClass>, single_sample: Vec<bool>) -> Self {
        let n = classes.len();
        FlowGraph {
            single_sample: if single_sample.len() == n {
                single_sample
            } else {
                vec![false; n]
            },
            classes,
            succ: vec![Vec::new(); n],
            ..Default::default()
        }
    }

    /// Adds the edge unless one with the same endpoints and kind exists.
    pub fn add_edge(&mut self, edge: FlowEdge) -> bool {
        if edge.src == edge.dst || !self.keys.insert((edge.src, edge.dst, edge.kind)) {
            return false;
        }
        self.succ[edge.src.index()].push(self.edges.len());
        self.edges.push(edge);
        true
    }

    pub fn node_count(&self) -> usize {
        self.classes.len()
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &FlowEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn class(&self, v: VarId) -> TypeClass {
        self.classes[v.index()]
    }

    pub fn is_dataset(&self, v: VarId) -> bool {
        self.class(v) == TypeClass::Dataset
    }

    pub fn is_single_sample(&self, v: VarId) -> bool {
        self.single_sample[v.index()]
    }

    pub fn datasets(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.classes.len() as u32)
            .map(VarId)
            .filter(|&v| self.is_dataset(v))
    }

    pub fn successors(&self, v: VarId) -> impl Iterator<Item = &FlowEdge> {
        self.succ[v.index()].iter().map(|&i| &self.edges[i])
    }

    /// Nodes reachable from `src` over any edges, `src` included.
    pub fn data_flow_from(&self, src: VarId) -> Vec<bool> {
        self.reach(src, false)
    }

    /// Datasets reachable from the dataset `src` along dataset-only paths,
    /// `src` included.
    pub fn dataset_flow_from(&self, src: VarId) -> Vec<bool> {
        if !self.is_dataset(src) {
            return vec![false; self.node_count()];
        }
        self.reach(src, true)
    }

    fn reach(&self, src: VarId, datasets_only: bool) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        seen[src.index()] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for e in self.successors(v) {
                let d = e.dst;
                if !seen[d.index()] && (!datasets_only || self.is_dataset(d)) {
                    seen[d.index()] = true;
                    queue.push_back(d);
                }
            }
        }
        seen
    }

    /// Reflexive-transitive reachability.
    pub fn data_flow(&self, a: VarId, b: VarId) -> bool {
        a == b || self.data_flow_from(a)[b.index()]
    }

    /// Shortest edge path from `a` to `b`, as edge indices.
    pub fn path(&self, a: VarId, b: VarId) -> Option<Vec<usize>> {
        if a == b {
            return Some(Vec::new());
        }
        let mut parent: HashMap<VarId, usize> = HashMap::new();
        let mut queue = VecDeque::from([a]);
        while let Some(v) = queue.pop_front() {
            for &i in &self.succ[v.index()] {
                let d = self.edges[i].dst;
                if d != a && !parent.contains_key(&d) {
                    parent.insert(d, i);
                    if d == b {
                        let mut out = Vec::new();
                        let mut cur = b;
                        while cur != a {
                            let i = parent[&cur];
                            out.push(i);
                            cur = self.edges[i].src;
                        }
                        out.reverse();
                        return Some(out);
                    }
                    queue.push_back(d);
                }
            }
        }
        None
    }
}

struct Builder<'a> {
    facts: &'a FactBase,
    pts: &'a PointsTo,
    types: &'a TypeMap,
    db: &'a SpecDb,
    g: FlowGraph,
}

pub fn build_flow_graph(
    facts: &FactBase,
    pts: &PointsTo,
    types: &TypeMap,
    db: &SpecDb,
) -> FlowGraph {
    let mut b = Builder {
        facts,
        pts,
        types,
        db,
        g: FlowGraph::with_nodes(
            types.classes().to_vec(),
            types.single_sample_flags().to_vec(),
        ),
    };
    for v in facts.var_ids() {
        b.def(v);
    }
    for call in &facts.calls {
        b.call(call);
    }
    b.receiver_aliases();
    b.g
}

impl<'a> Builder<'a> {
    fn d(&self, v: VarId) -> bool {
        self.types.is_dataset(v)
    }

    fn line(&self, v: VarId) -> u32 {
        self.facts.var(v).line
    }

    /// Adds an edge, degrading dataset-only kinds to plain flow when an
    /// endpoint is not a dataset.
    fn edge(
        &mut self,
        src: VarId,
        dst: VarId,
        kind: EdgeKind,
        line: u32,
        origin: Option<(&CallFact, &Target<'_>)>,
    ) {
        let kind = if kind.needs_datasets() && !(self.d(src) && self.d(dst)) {
            EdgeKind::Flow
        } else {
            kind
        };
        let mut e = FlowEdge::new(src, dst, kind, line);
        if let Some((call, t)) = origin {
            e.call = Some(call.id);
            e.spec = Some(t.spec_index);
            e.api = Some(t.api.clone());
        }
        self.g.add_edge(e);
    }

    fn def(&mut self, v: VarId) {
        let line = self.line(v);
        match self.facts.def(v) {
            Def::Copy(s) => self.edge(*s, v, EdgeKind::Flow, line, None),
            Def::Phi(ops) => {
                for &o in ops {
                    self.edge(o, v, EdgeKind::Flow, line, None);
                }
            }
            Def::Attr { base, .. } => self.edge(*base, v, EdgeKind::Map, line, None),
            Def::Index { base, index } => {
                if self.split_part(*base, &index.kind, v) {
                    return;
                }
                let kind = match &index.kind {
                    IndexKind::Key(_) => EdgeKind::Map,
                    k if k.is_full_slice() => EdgeKind::Map,
                    IndexKind::Var | IndexKind::Slice { .. } => EdgeKind::Filter,
                    _ => EdgeKind::Flow,
                };
                self.edge(*base, v, kind, line, None);
            }
            Def::Combine { operands, .. } => {
                for &o in operands {
                    self.edge(o, v, EdgeKind::Map, line, None);
                }
            }
            Def::Container { elems, .. } => {
                for &e in elems {
                    self.edge(e, v, EdgeKind::Flow, line, None);
                }
            }
            Def::IterElem { iter } => self.edge(*iter, v, EdgeKind::Flow, line, None),
            Def::Update { base, value, .. } => {
                self.edge(*base, v, EdgeKind::Map, line, None);
                self.edge(*value, v, EdgeKind::Flow, line, None);
            }
            Def::Literal(_)
            | Def::CallResult(_)
            | Def::Param { .. }
            | Def::Free
            | Def::Module(_)
            | Def::Function(_) => {}
        }
    }

    /// `part = split_result[k]`: an annotated flow edge from the input the
    /// part was cut from.
    fn split_part(&mut self, base: VarId, index: &IndexKind, v: VarId) -> bool {
        let Def::CallResult(c) = self.facts.def(base) else {
            return false;
        };
        let call = self.facts.call(*c);
        let targets = self.targets(call);
        let Some(t) = targets.iter().find(|t| t.spec.kind == SpecKind::Split) else {
            return false;
        };
        let (Some(arity), IndexKind::Int(k)) = (&t.spec.split_arity, index) else {
            return false;
        };
        let inputs = t.spec.data_args(call);
        let total = arity.arity(inputs.len()) as i64;
        let pos = if *k < 0 { total + k } else { *k };
        let Some((input, part)) = (pos >= 0)
            .then(|| arity.part(pos as usize, inputs.len()))
            .flatten()
        else {
            return false;
        };
        let mut e = FlowEdge::new(inputs[input], v, EdgeKind::Flow, call.line);
        e.call = Some(call.id);
        e.spec = Some(t.spec_index);
        e.api = Some(t.api.clone());
        e.split = Some(SplitAnnotation {
            part,
            position: pos as usize,
            call: call.id,
        });
        self.g.add_edge(e);
        true
    }

    fn targets(&self, call: &CallFact) -> Vec<Target<'a>> {
        let types = self.types;
        resolve_call(self.facts, self.pts, self.db, call, &|v| {
            types.is_dataset(v)
        })
    }

    fn call(&mut self, call: &CallFact) {
        let targets = self.targets(call);
        let r = call.result;
        let line = call.line;
        if targets.is_empty() {
            let mut inputs = call.inputs();
            let module_call = function_path(self.facts, self.db, call).is_some();
            match call.callee {
                Callee::Function(f) => inputs.retain(|&v| v != f),
                Callee::Method { receiver, .. } if module_call => inputs.retain(|&v| v != receiver),
                Callee::Method { .. } => {}
            }
            let touches_data = inputs.iter().any(|&v| self.d(v));
            for v in inputs {
                self.edge(v, r, EdgeKind::Flow, line, None);
            }
            if touches_data {
                self.g.notes.push(UnknownApiNote {
                    call: call.id,
                    line,
                    result: r,
                });
            }
            return;
        }
        for t in &targets {
            let spec = t.spec;
            let data = spec.data_args(call);
            let labels = spec.label_args(call);
            let mut fitted_inputs = data.clone();
            fitted_inputs.extend(labels.iter().copied().filter(|l| !data.contains(l)));
            let recv = call.receiver().filter(|rv| {
                spec.method && spec.receiver != ReceiverReq::Dataset && !data.contains(rv)
            });
            let o = Some((call, t));
            match spec.kind {
                SpecKind::MapTransform
                | SpecKind::FilterTransform
                | SpecKind::DuplicateTransform => {
                    let kind = match spec.kind {
                        SpecKind::MapTransform => EdgeKind::Map,
                        SpecKind::FilterTransform => EdgeKind::Filter,
                        _ => EdgeKind::Dup,
                    };
                    if spec.result != ResultRole::Fitted {
                        for &d in &data {
                            self.edge(d, r, kind, line, o);
                        }
                    }
                    if let Some(rv) = recv {
                        self.edge(rv, r, EdgeKind::Flow, line, o);
                    }
                    // fill values and the like are carried into the result
                    for v in call
                        .args
                        .iter()
                        .map(|a| a.value)
                        .chain(call.kwargs.iter().map(|k| k.1))
                    {
                        if !fitted_inputs.contains(&v) {
                            self.edge(v, r, EdgeKind::Flow, line, o);
                        }
                    }
                }
                SpecKind::ReduceTransform => match (spec.result, recv) {
                    (ResultRole::Fitted, Some(rv)) => {
                        for &d in &fitted_inputs {
                            self.edge(d, rv, EdgeKind::Reduce, line, o);
                        }
                        self.edge(rv, r, EdgeKind::Flow, line, o);
                    }
                    (ResultRole::Transformed, Some(rv)) => {
                        for &d in &fitted_inputs {
                            self.edge(d, rv, EdgeKind::Reduce, line, o);
                        }
                        self.edge(rv, r, EdgeKind::Flow, line, o);
                        for &d in &data {
                            self.edge(d, r, EdgeKind::Map, line, o);
                        }
                    }
                    (ResultRole::Transformed, None) => {
                        for &d in &data {
                            self.edge(d, r, EdgeKind::Reduce, line, o);
                            self.edge(d, r, EdgeKind::Map, line, o);
                        }
                    }
                    _ => {
                        for &d in &fitted_inputs {
                            self.edge(d, r, EdgeKind::Reduce, line, o);
                        }
                    }
                },
                SpecKind::Train | SpecKind::PipelineFit => {
                    let kind = if spec.kind == SpecKind::PipelineFit {
                        EdgeKind::Reduce
                    } else {
                        EdgeKind::Flow
                    };
                    match recv {
                        Some(rv) => {
                            for &d in &fitted_inputs {
                                self.edge(d, rv, kind, line, o);
                            }
                            self.edge(rv, r, EdgeKind::Flow, line, o);
                        }
                        None => {
                            for &d in &fitted_inputs {
                                self.edge(d, r, kind, line, o);
                            }
                        }
                    }
                    if spec.result == ResultRole::Transformed {
                        for &d in &data {
                            self.edge(d, r, EdgeKind::Map, line, o);
                        }
                    }
                }
                SpecKind::Eval | SpecKind::Metric | SpecKind::DatasetSource => {
                    if let Some(rv) = recv {
                        self.edge(rv, r, EdgeKind::Flow, line, o);
                    }
                    for &d in &fitted_inputs {
                        self.edge(d, r, EdgeKind::Flow, line, o);
                    }
                }
                SpecKind::Split | SpecKind::ModelSource => {}
            }
        }
    }

    /// A later method call on an object that was fitted through a
    /// different variable still sees the fitted state.
    fn receiver_aliases(&mut self) {
        let mut fitted: Vec<(VarId, Vec<_>)> = Vec::new();
        for call in &self.facts.calls {
            let Some(rv) = call.receiver() else { continue };
            let objects: Vec<_> = self
                .pts
                .pts(rv)
                .iter()
                .copied()
                .filter(|&o| self.pts.object(o).kind != ObjKind::Container)
                .collect();
            if objects.is_empty() {
                continue;
            }
            for (src, objs) in &fitted {
                if *src != rv && objs.iter().any(|o| objects.contains(o)) {
                    self.edge(*src, rv, EdgeKind::Flow, call.line, None);
                }
            }
            let mutates = self.targets(call).iter().any(|t| {
                matches!(
                    t.spec.kind,
                    SpecKind::Train | SpecKind::PipelineFit | SpecKind::ReduceTransform
                ) && t.spec.receiver == ReceiverReq::Object
            });
            if mutates && !fitted.iter().any(|(v, _)| *v == rv) {
                fitted.push((rv, objects));
            }
        }
    }
}
