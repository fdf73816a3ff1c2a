//! Dataset/model/scalar classification of SSA variables.
//!
//! Evidence for each class is collected separately and only ever grows;
//! the final class is read off the evidence once the fixpoint is reached.
//! A variable with both dataset and model evidence is left `Unknown`.

use serde::Serialize;

use crate::dataflow::pointer::{PointsTo, SELF_ATTRS};
use crate::dataflow::resolve::{resolve_call, Target};
use crate::frontend::{
    CallFact, CombineKind, ContainerShape, Def, Diagnostic, FactBase, IndexKind, LiteralKind, VarId,
};
use crate::specs::{ReceiverReq, ResultRole, SpecDb, SpecKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeClass {
    Dataset,
    Model,
    Scalar,
    Unknown,
}

/// Why a variable got its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Seed(&'static str),
    From(VarId, &'static str),
    Conflict,
}

/// Attributes of a dataset that describe it rather than hold rows.
const SCALAR_ATTRS: &[&str] = &[
    "shape", "size", "ndim", "dtype", "dtypes", "columns", "nbytes", "name",
];
/// Positional indexers whose integer subscript picks one row.
const ROW_INDEXERS: &[&str] = &["iloc", "loc", "iat", "at"];

#[derive(Debug, Clone, Default)]
pub struct TypeMap {
    classes: Vec<TypeClass>,
    provenance: Vec<Option<Provenance>>,
    single_sample: Vec<bool>,
    pub diagnostics: Vec<Diagnostic>,
}

impl TypeMap {
    pub fn class(&self, v: VarId) -> TypeClass {
        self.classes
            .get(v.index())
            .copied()
            .unwrap_or(TypeClass::Unknown)
    }

    pub fn is_dataset(&self, v: VarId) -> bool {
        self.class(v) == TypeClass::Dataset
    }

    pub fn is_model(&self, v: VarId) -> bool {
        self.class(v) == TypeClass::Model
    }

    pub fn provenance(&self, v: VarId) -> Option<&Provenance> {
        self.provenance.get(v.index()).and_then(Option::as_ref)
    }

    /// Dataset holding a single hand-built or hand-picked row.
    pub fn is_single_sample(&self, v: VarId) -> bool {
        self.single_sample.get(v.index()).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[TypeClass] {
        &self.classes
    }

    pub fn single_sample_flags(&self) -> &[bool] {
        &self.single_sample
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bit {
    D,
    M,
    S,
}

#[derive(Debug, Clone, Default)]
struct Evidence {
    d: Option<Provenance>,
    m: Option<Provenance>,
    s: Option<Provenance>,
}

impl Evidence {
    fn slot(&mut self, bit: Bit) -> &mut Option<Provenance> {
        match bit {
            Bit::D => &mut self.d,
            Bit::M => &mut self.m,
            Bit::S => &mut self.s,
        }
    }

    fn has(&self, bit: Bit) -> bool {
        match bit {
            Bit::D => self.d.is_some(),
            Bit::M => self.m.is_some(),
            Bit::S => self.s.is_some(),
        }
    }
}

struct Inference<'a> {
    facts: &'a FactBase,
    db: &'a SpecDb,
    pts: &'a PointsTo,
    ev: Vec<Evidence>,
    changed: bool,
}

pub fn infer(facts: &FactBase, db: &SpecDb, pts: &PointsTo) -> TypeMap {
    infer_ordered(facts, db, pts, false)
}

/// `reverse` visits facts back to front; the result must not depend on it.
pub(crate) fn infer_ordered(
    facts: &FactBase,
    db: &SpecDb,
    pts: &PointsTo,
    reverse: bool,
) -> TypeMap {
    let mut inf = Inference {
        facts,
        db,
        pts,
        ev: vec![Evidence::default(); facts.len()],
        changed: false,
    };
    let mut vars: Vec<VarId> = facts.var_ids().collect();
    let mut calls: Vec<&CallFact> = facts.calls.iter().collect();
    if reverse {
        vars.reverse();
        calls.reverse();
    }
    loop {
        inf.changed = false;
        for &v in &vars {
            inf.def(v);
        }
        for call in &calls {
            inf.call(call);
        }
        if !inf.changed {
            break;
        }
    }
    inf.finish()
}

impl Inference<'_> {
    fn mark(&mut self, v: VarId, bit: Bit, why: Provenance) {
        let slot = self.ev[v.index()].slot(bit);
        if slot.is_none() {
            *slot = Some(why);
            self.changed = true;
        }
    }

    fn has(&self, v: VarId, bit: Bit) -> bool {
        self.ev[v.index()].has(bit)
    }

    fn copy_bits(&mut self, from: VarId, to: VarId, rule: &'static str) {
        for bit in [Bit::D, Bit::M, Bit::S] {
            if self.has(from, bit) {
                self.mark(to, bit, Provenance::From(from, rule));
            }
        }
    }

    fn def(&mut self, v: VarId) {
        if self.pts.points_to_model(v) {
            self.mark(v, Bit::M, Provenance::Seed("model object"));
        }
        match self.facts.def(v) {
            Def::Literal(kind) if kind.is_scalar() => {
                self.mark(v, Bit::S, Provenance::Seed("literal"))
            }
            Def::Copy(src) => self.copy_bits(*src, v, "assign"),
            Def::Phi(ops) => {
                for op in ops.clone() {
                    self.copy_bits(op, v, "phi");
                }
            }
            Def::Attr { base, attr } => {
                if self.has(*base, Bit::D) {
                    if SCALAR_ATTRS.contains(&attr.as_str()) {
                        self.mark(v, Bit::S, Provenance::From(*base, "attribute"));
                    } else {
                        self.mark(v, Bit::D, Provenance::From(*base, "attribute"));
                    }
                }
                if self.has(*base, Bit::M) && SELF_ATTRS.contains(&attr.as_str()) {
                    self.mark(v, Bit::M, Provenance::From(*base, "attribute"));
                }
            }
            Def::Index { base, .. } => {
                if self.has(*base, Bit::D) {
                    self.mark(v, Bit::D, Provenance::From(*base, "subscript"));
                }
            }
            Def::IterElem { iter } => {
                if self.has(*iter, Bit::D) {
                    self.mark(v, Bit::D, Provenance::From(*iter, "iteration"));
                }
            }
            Def::Combine { kind, operands } => {
                let operands = operands.clone();
                if *kind == CombineKind::Format {
                    self.mark(v, Bit::S, Provenance::Seed("format"));
                } else if let Some(&d) = operands.iter().find(|&&o| self.has(o, Bit::D)) {
                    self.mark(v, Bit::D, Provenance::From(d, "operator"));
                } else if !operands.is_empty() && operands.iter().all(|&o| self.has(o, Bit::S)) {
                    self.mark(v, Bit::S, Provenance::From(operands[0], "operator"));
                }
            }
            Def::Container { elems, .. } => {
                if let Some(&d) = elems.iter().find(|&&e| self.has(e, Bit::D)) {
                    self.mark(v, Bit::D, Provenance::From(d, "container"));
                }
            }
            Def::Update { base, .. } if self.has(*base, Bit::D) => {
                self.mark(v, Bit::D, Provenance::From(*base, "update"));
            }
            _ => {}
        }
    }

    fn seed_args(&mut self, vars: &[VarId], bit: Bit, why: &'static str) {
        for &a in vars {
            if !matches!(self.facts.def(a), Def::Literal(_)) {
                self.mark(a, bit, Provenance::Seed(why));
            }
        }
    }

    fn call(&mut self, call: &CallFact) {
        let ev = &self.ev;
        let is_dataset = |v: VarId| ev[v.index()].d.is_some();
        let targets: Vec<Target<'_>> =
            resolve_call(self.facts, self.pts, self.db, call, &is_dataset);
        let r = call.result;
        for t in targets {
            let spec = t.spec;
            let data = spec.data_args(call);
            let labels = spec.label_args(call);
            let object_receiver = spec.receiver == ReceiverReq::Object;
            let seeds_args = matches!(
                spec.kind,
                SpecKind::Train
                    | SpecKind::Eval
                    | SpecKind::PipelineFit
                    | SpecKind::Split
                    | SpecKind::MapTransform
                    | SpecKind::ReduceTransform
                    | SpecKind::FilterTransform
                    | SpecKind::DuplicateTransform
            );
            if seeds_args {
                self.seed_args(&data, Bit::D, "data argument");
                self.seed_args(&labels, Bit::D, "label argument");
            }
            if object_receiver {
                if let Some(recv) = call.receiver() {
                    if !data.contains(&recv) {
                        self.mark(recv, Bit::M, Provenance::Seed("estimator receiver"));
                    }
                }
            }
            let why = match spec.kind {
                SpecKind::Split => Some((Bit::D, "split result")),
                SpecKind::ModelSource => Some((Bit::M, "constructor")),
                SpecKind::Metric => Some((Bit::S, "metric")),
                _ => match spec.result {
                    ResultRole::Dataset | ResultRole::Transformed => Some((Bit::D, "api result")),
                    ResultRole::Scalar => Some((Bit::S, "api result")),
                    ResultRole::Model | ResultRole::Fitted => Some((Bit::M, "api result")),
                    ResultRole::None => None,
                },
            };
            if let Some((bit, why)) = why {
                self.mark(r, bit, Provenance::Seed(why));
            }
        }
    }

    fn finish(self) -> TypeMap {
        let n = self.ev.len();
        let mut classes = Vec::with_capacity(n);
        let mut provenance = Vec::with_capacity(n);
        let mut diagnostics = Vec::new();
        for (i, e) in self.ev.into_iter().enumerate() {
            let (class, why) = match (e.d, e.m, e.s) {
                (Some(_), Some(_), _) => {
                    let v = VarId(i as u32);
                    diagnostics.push(Diagnostic {
                        line: self.facts.var(v).line,
                        message: format!(
                            "{} has both dataset and model evidence; left unclassified",
                            self.facts.display_name(v)
                        ),
                    });
                    (TypeClass::Unknown, Some(Provenance::Conflict))
                }
                (Some(p), None, _) => (TypeClass::Dataset, Some(p)),
                (None, Some(p), _) => (TypeClass::Model, Some(p)),
                (None, None, Some(p)) => (TypeClass::Scalar, Some(p)),
                (None, None, None) => (TypeClass::Unknown, None),
            };
            classes.push(class);
            provenance.push(why);
        }
        let single_sample = single_sample(self.facts, self.db, self.pts, &classes);
        TypeMap {
            classes,
            provenance,
            single_sample,
            diagnostics,
        }
    }
}

/// Least fixpoint of the single-row heuristic over datasets.
fn single_sample(
    facts: &FactBase,
    db: &SpecDb,
    pts: &PointsTo,
    classes: &[TypeClass],
) -> Vec<bool> {
    let n = facts.len();
    let mut ss = vec![false; n];
    let is_d = |v: VarId| classes[v.index()] == TypeClass::Dataset;
    let scalar_literal = |v: VarId| matches!(facts.def(v), Def::Literal(k) if k.is_scalar() || *k == LiteralKind::None);
    let tuple_like = |v: VarId| match facts.def(v) {
        Def::CallResult(c) => {
            let call = facts.call(*c);
            let targets = resolve_call(facts, pts, db, call, &is_d);
            targets.is_empty()
                || targets
                    .iter()
                    .any(|t| t.spec.kind == SpecKind::Split || t.spec.data_args(call).len() > 1)
        }
        Def::Container {
            shape: ContainerShape::Tuple,
            ..
        } => true,
        _ => false,
    };
    // Containers built only from scalar literals, at any nesting depth.
    let mut literal_rows = vec![false; n];
    for v in facts.var_ids() {
        if let Def::Container { elems, .. } = facts.def(v) {
            literal_rows[v.index()] = !elems.is_empty()
                && elems
                    .iter()
                    .all(|&e| scalar_literal(e) || literal_rows[e.index()]);
        }
    }
    loop {
        let mut changed = false;
        for v in facts.var_ids() {
            if ss[v.index()] || !is_d(v) {
                continue;
            }
            let hit = match facts.def(v) {
                Def::Index { base, index } => {
                    let row_indexer = matches!(facts.def(*base), Def::Attr { attr, .. } if ROW_INDEXERS.contains(&attr.as_str()));
                    // `x.iloc[[3]]`: a one-position list on a row indexer
                    let one_position = row_indexer
                        && index.kind == IndexKind::Var
                        && index.operands.first().is_some_and(|&o| {
                            matches!(facts.def(o), Def::Container { elems, .. }
                                if elems.len() == 1 && matches!(facts.def(elems[0]), Def::Literal(LiteralKind::Int)))
                        });
                    ss[base.index()]
                        || one_position
                        || index.kind.is_single_row_slice()
                        || (matches!(index.kind, IndexKind::Int(_))
                            && (row_indexer || !tuple_like(*base)))
                }
                Def::Container { elems, .. } => {
                    literal_rows[v.index()]
                        || (!elems.is_empty() && elems.iter().all(|&e| ss[e.index()]))
                }
                Def::Copy(src) => ss[src.index()],
                Def::Phi(ops) => ops.iter().all(|o| ss[o.index()]),
                Def::Attr { base, .. } => ss[base.index()],
                Def::CallResult(c) => {
                    let call = facts.call(*c);
                    let targets = resolve_call(facts, pts, db, call, &is_d);
                    targets.iter().any(|t| {
                        matches!(
                            t.spec.kind,
                            SpecKind::MapTransform
                                | SpecKind::FilterTransform
                                | SpecKind::DatasetSource
                                | SpecKind::DuplicateTransform
                        ) && {
                            let data = t.spec.data_args(call);
                            !data.is_empty() && data.iter().all(|d| ss[d.index()])
                        }
                    })
                }
                _ => false,
            };
            if hit {
                ss[v.index()] = true;
                changed = true;
            }
        }
        if !changed {
            return ss;
        }
    }
}
