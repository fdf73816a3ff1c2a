//! Inclusion-based points-to analysis.
//!
//! Context sensitivity comes from the frontend: every inlined copy of a
//! function body has its own call facts tagged with the inlining call
//! string, so one allocation fact is one (site, context) object.

use std::collections::{BTreeSet, HashMap};

use crate::frontend::{CallFact, CallId, Callee, Context, Def, FactBase, UpdateAccess, VarId};
use crate::specs::{CalleeName, ReceiverKind, ResultRole, SpecDb, SpecKind};

use super::resolve::function_path;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct ObjId(pub u32);

impl ObjId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllocSite {
    Call(CallId),
    /// Secondary objects built by container helpers (`zip`, `items`).
    Helper(CallId, u8),
    Container(VarId),
    Free(VarId),
    Param(VarId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjKind {
    /// Built by a `model_source` constructor.
    Model,
    Container,
    /// Anything else we cannot see into (unknown call results, free names).
    Opaque,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractObject {
    pub site: AllocSite,
    pub kind: ObjKind,
    pub class: Option<String>,
    pub context: Context,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("analysis budget of {budget} constraints exceeded")]
pub struct AnalysisBudgetExceeded {
    pub budget: u64,
}

pub const DEFAULT_BUDGET: u64 = 5_000_000;

/// Attributes that hand back the estimator itself (or one trained like it).
pub(crate) const SELF_ATTRS: &[&str] = &["best_estimator_", "estimator_", "estimator"];

#[derive(Debug, Clone, Default)]
pub struct PointsTo {
    objects: Vec<AbstractObject>,
    vars: Vec<BTreeSet<ObjId>>,
    elems: HashMap<ObjId, BTreeSet<ObjId>>,
    fields: HashMap<(ObjId, String), BTreeSet<ObjId>>,
    sites: HashMap<AllocSite, ObjId>,
    constraints: u64,
}

static EMPTY: BTreeSet<ObjId> = BTreeSet::new();

impl PointsTo {
    pub fn pts(&self, v: VarId) -> &BTreeSet<ObjId> {
        self.vars.get(v.index()).unwrap_or(&EMPTY)
    }

    pub fn object(&self, o: ObjId) -> &AbstractObject {
        &self.objects[o.index()]
    }

    pub fn objects(&self) -> impl Iterator<Item = (ObjId, &AbstractObject)> {
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| (ObjId(i as u32), o))
    }

    pub fn elems(&self, o: ObjId) -> &BTreeSet<ObjId> {
        self.elems.get(&o).unwrap_or(&EMPTY)
    }

    pub fn may_alias(&self, a: VarId, b: VarId) -> bool {
        !self.pts(a).is_disjoint(self.pts(b))
    }

    pub fn points_to_model(&self, v: VarId) -> bool {
        self.pts(v)
            .iter()
            .any(|&o| self.object(o).kind == ObjKind::Model)
    }

    /// Constraint evaluations spent reaching the fixpoint.
    pub fn constraints(&self) -> u64 {
        self.constraints
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    Var(VarId),
    Elem(ObjId),
    Field(ObjId, String),
}

struct Solver<'a> {
    facts: &'a FactBase,
    db: &'a SpecDb,
    budget: u64,
    /// Unmatched method calls fall back to opaque results only once the
    /// receivers have settled, so a late-arriving model is not shadowed.
    settled: bool,
    out: PointsTo,
}

pub fn pointer_analysis(
    facts: &FactBase,
    db: &SpecDb,
    budget: u64,
) -> Result<PointsTo, AnalysisBudgetExceeded> {
    let mut solver = Solver {
        facts,
        db,
        budget,
        settled: false,
        out: PointsTo {
            vars: vec![BTreeSet::new(); facts.len()],
            ..Default::default()
        },
    };
    loop {
        let mut changed = false;
        for v in facts.var_ids() {
            changed |= solver.def(v)?;
        }
        for call in &facts.calls {
            changed |= solver.call(call)?;
        }
        if !changed {
            if solver.settled {
                return Ok(solver.out);
            }
            solver.settled = true;
        }
    }
}

impl Solver<'_> {
    fn tick(&mut self, n: u64) -> Result<(), AnalysisBudgetExceeded> {
        self.out.constraints += n;
        if self.out.constraints > self.budget {
            Err(AnalysisBudgetExceeded {
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    fn alloc(
        &mut self,
        site: AllocSite,
        kind: ObjKind,
        class: Option<String>,
        context: &Context,
        line: u32,
    ) -> ObjId {
        if let Some(&o) = self.out.sites.get(&site) {
            return o;
        }
        let o = ObjId(self.out.objects.len() as u32);
        self.out.objects.push(AbstractObject {
            site: site.clone(),
            kind,
            class,
            context: context.clone(),
            line,
        });
        self.out.sites.insert(site, o);
        o
    }

    fn set(&self, node: &Node) -> &BTreeSet<ObjId> {
        match node {
            Node::Var(v) => self.out.pts(*v),
            Node::Elem(o) => self.out.elems(*o),
            Node::Field(o, f) => self.out.fields.get(&(*o, f.clone())).unwrap_or(&EMPTY),
        }
    }

    fn add(&mut self, node: Node, objs: &BTreeSet<ObjId>) -> Result<bool, AnalysisBudgetExceeded> {
        if objs.is_empty() {
            return Ok(false);
        }
        let target = match node {
            Node::Var(v) => &mut self.out.vars[v.index()],
            Node::Elem(o) => self.out.elems.entry(o).or_default(),
            Node::Field(o, f) => self.out.fields.entry((o, f)).or_default(),
        };
        let before = target.len();
        target.extend(objs.iter().copied());
        let added = (target.len() - before) as u64;
        self.tick(1 + added)?;
        Ok(added > 0)
    }

    fn add_one(&mut self, node: Node, o: ObjId) -> Result<bool, AnalysisBudgetExceeded> {
        self.add(node, &BTreeSet::from([o]))
    }

    /// `dst ⊇ src`.
    fn flow(&mut self, src: Node, dst: Node) -> Result<bool, AnalysisBudgetExceeded> {
        let objs = self.set(&src).clone();
        self.add(dst, &objs)
    }

    fn objects_of(&self, v: VarId) -> Vec<ObjId> {
        self.out.pts(v).iter().copied().collect()
    }

    fn is_container(&self, o: ObjId) -> bool {
        self.out.object(o).kind == ObjKind::Container
    }

    fn def(&mut self, v: VarId) -> Result<bool, AnalysisBudgetExceeded> {
        let facts = self.facts;
        let var = facts.var(v);
        let mut changed = false;
        match facts.def(v) {
            Def::Copy(src) => changed |= self.flow(Node::Var(*src), Node::Var(v))?,
            Def::Phi(ops) => {
                for op in ops {
                    changed |= self.flow(Node::Var(*op), Node::Var(v))?;
                }
            }
            Def::Container { elems, .. } => {
                let o = self.alloc(
                    AllocSite::Container(v),
                    ObjKind::Container,
                    None,
                    &var.context,
                    var.line,
                );
                changed |= self.add_one(Node::Var(v), o)?;
                for e in elems {
                    changed |= self.flow(Node::Var(*e), Node::Elem(o))?;
                }
            }
            Def::IterElem { iter: base } | Def::Index { base, .. } => {
                for o in self.objects_of(*base) {
                    if self.is_container(o) {
                        changed |= self.flow(Node::Elem(o), Node::Var(v))?;
                    }
                }
            }
            Def::Attr { base, attr } => {
                for o in self.objects_of(*base) {
                    if SELF_ATTRS.contains(&attr.as_str()) && !self.is_container(o) {
                        changed |= self.add_one(Node::Var(v), o)?;
                    }
                    changed |= self.flow(Node::Field(o, attr.clone()), Node::Var(v))?;
                }
            }
            Def::Update {
                base,
                value,
                access,
            } => {
                changed |= self.flow(Node::Var(*base), Node::Var(v))?;
                for o in self.objects_of(*base) {
                    match access {
                        UpdateAccess::Attr(a) => {
                            changed |= self.flow(Node::Var(*value), Node::Field(o, a.clone()))?;
                        }
                        UpdateAccess::Index(_) if self.is_container(o) => {
                            changed |= self.flow(Node::Var(*value), Node::Elem(o))?;
                        }
                        _ => {}
                    }
                }
            }
            Def::Free => {
                let o = self.alloc(
                    AllocSite::Free(v),
                    ObjKind::Opaque,
                    None,
                    &var.context,
                    var.line,
                );
                changed |= self.add_one(Node::Var(v), o)?;
            }
            Def::Param { .. } => {
                let o = self.alloc(
                    AllocSite::Param(v),
                    ObjKind::Opaque,
                    None,
                    &var.context,
                    var.line,
                );
                changed |= self.add_one(Node::Var(v), o)?;
            }
            Def::Literal(_)
            | Def::CallResult(_)
            | Def::Module(_)
            | Def::Function(_)
            | Def::Combine { .. } => {}
        }
        Ok(changed)
    }

    fn call(&mut self, call: &CallFact) -> Result<bool, AnalysisBudgetExceeded> {
        if let Some(path) = function_path(self.facts, self.db, call) {
            return self.function_call(call, &path);
        }
        match &call.callee {
            Callee::Function(_) => self.opaque_result(call),
            Callee::Method { receiver, name } => self.method_call(call, *receiver, name),
        }
    }

    fn opaque_result(&mut self, call: &CallFact) -> Result<bool, AnalysisBudgetExceeded> {
        let o = self.alloc(
            AllocSite::Call(call.id),
            ObjKind::Opaque,
            None,
            &call.context,
            call.line,
        );
        self.add_one(Node::Var(call.result), o)
    }

    /// Result is a fresh container whose slot holds the slots of `sources`
    /// (or, with `pair`, a tuple of them, as `zip`/`enumerate`/`items` do).
    fn helper_container(
        &mut self,
        call: &CallFact,
        sources: &[ObjId],
        pair: bool,
    ) -> Result<bool, AnalysisBudgetExceeded> {
        let outer = self.alloc(
            AllocSite::Helper(call.id, 0),
            ObjKind::Container,
            None,
            &call.context,
            call.line,
        );
        let mut changed = self.add_one(Node::Var(call.result), outer)?;
        let slot = if pair {
            let inner = self.alloc(
                AllocSite::Helper(call.id, 1),
                ObjKind::Container,
                None,
                &call.context,
                call.line,
            );
            changed |= self.add_one(Node::Elem(outer), inner)?;
            inner
        } else {
            outer
        };
        for &s in sources {
            if self.is_container(s) {
                changed |= self.flow(Node::Elem(s), Node::Elem(slot))?;
            }
        }
        Ok(changed)
    }

    fn function_call(
        &mut self,
        call: &CallFact,
        path: &str,
    ) -> Result<bool, AnalysisBudgetExceeded> {
        let arg_objects: Vec<ObjId> = call
            .args
            .iter()
            .flat_map(|a| self.objects_of(a.value))
            .collect();
        match path {
            "zip" | "enumerate" => return self.helper_container(call, &arg_objects, true),
            "list" | "tuple" | "set" | "sorted" | "reversed" | "iter" => {
                return self.helper_container(call, &arg_objects, false)
            }
            "copy.copy" | "copy.deepcopy" | "sklearn.base.clone" | "clone" => {
                return match call.args.first() {
                    Some(a) => self.flow(Node::Var(a.value), Node::Var(call.result)),
                    None => Ok(false),
                }
            }
            _ => {}
        }
        let hit = self.db.lookup_match(CalleeName::Function(path), None);
        match hit {
            Some(m) if m.spec.kind == SpecKind::ModelSource => {
                let class = m.canonical_class(path);
                let o = self.alloc(
                    AllocSite::Call(call.id),
                    ObjKind::Model,
                    Some(class),
                    &call.context,
                    call.line,
                );
                self.add_one(Node::Var(call.result), o)
            }
            Some(m) if m.spec.result == ResultRole::None => self.opaque_result(call),
            Some(_) => Ok(false),
            None => self.opaque_result(call),
        }
    }

    fn method_call(
        &mut self,
        call: &CallFact,
        receiver: VarId,
        name: &str,
    ) -> Result<bool, AnalysisBudgetExceeded> {
        let mut changed = false;
        let mut matched = false;
        for o in self.objects_of(receiver) {
            if self.is_container(o) {
                matched = true;
                changed |= self.container_method(call, o, name)?;
                continue;
            }
            let class = self.out.object(o).class.clone();
            let hit = self.db.lookup(
                CalleeName::Method {
                    class: class.as_deref(),
                    method: name,
                },
                Some(ReceiverKind::Object),
            );
            if let Some(spec) = hit {
                matched = true;
                if spec.result == ResultRole::Fitted {
                    changed |= self.add_one(Node::Var(call.result), o)?;
                }
            }
        }
        let dataset_method = self
            .db
            .lookup(
                CalleeName::Method {
                    class: None,
                    method: name,
                },
                Some(ReceiverKind::Dataset),
            )
            .is_some();
        if self.settled && !matched && !dataset_method {
            changed |= self.opaque_result(call)?;
        }
        Ok(changed)
    }

    fn container_method(
        &mut self,
        call: &CallFact,
        o: ObjId,
        name: &str,
    ) -> Result<bool, AnalysisBudgetExceeded> {
        let r = call.result;
        match name {
            "append" | "add" | "insert" | "setdefault" => match call.args.last() {
                Some(a) => self.flow(Node::Var(a.value), Node::Elem(o)),
                None => Ok(false),
            },
            "extend" | "update" => {
                let mut changed = false;
                for a in &call.args {
                    for s in self.objects_of(a.value) {
                        if self.is_container(s) {
                            changed |= self.flow(Node::Elem(s), Node::Elem(o))?;
                        }
                    }
                }
                Ok(changed)
            }
            "pop" | "get" | "popitem" => self.flow(Node::Elem(o), Node::Var(r)),
            "items" => self.helper_container(call, &[o], true),
            "values" | "keys" | "copy" => self.add_one(Node::Var(r), o),
            _ => Ok(false),
        }
    }
}
