//! Matching call sites to API specs.

use crate::frontend::{CallFact, Callee, Def, FactBase, VarId};
use crate::specs::{ApiSpec, CalleeName, ReceiverKind, SpecDb};

use super::pointer::{ObjId, ObjKind, PointsTo};

/// One way a call site may behave. Method calls on receivers that may
/// point to several objects get one target per object.
#[derive(Debug, Clone)]
pub struct Target<'a> {
    pub spec_index: usize,
    pub spec: &'a ApiSpec,
    /// Receiver object the target applies to.
    pub object: Option<ObjId>,
    /// Short human label such as `SelectKBest.fit_transform`.
    pub api: String,
}

fn short(class: &str) -> &str {
    class.rsplit('.').next().unwrap_or(class)
}

/// Resolution order for methods: receiver objects of known class, then
/// dataset methods when the receiver is a dataset, then class-agnostic
/// object patterns, then receiver-agnostic patterns.
pub fn resolve_call<'a>(
    facts: &FactBase,
    pts: &PointsTo,
    db: &'a SpecDb,
    call: &CallFact,
    is_dataset: &dyn Fn(VarId) -> bool,
) -> Vec<Target<'a>> {
    if let Some(path) = function_path(facts, db, call) {
        return db
            .lookup_match(CalleeName::Function(&path), None)
            .map(|m| Target {
                spec_index: m.index,
                spec: m.spec,
                object: None,
                api: path.clone(),
            })
            .into_iter()
            .collect();
    }
    match &call.callee {
        Callee::Function(_) => Vec::new(),
        Callee::Method { receiver, name } => {
            resolve_method(facts, pts, db, *receiver, name, is_dataset)
        }
    }
}

/// Dotted path of the called function. Method calls on module-like
/// receivers (`pd.read_csv`, `metrics.accuracy_score`) count as function
/// calls when the path names a known function or the receiver is rooted
/// in an import.
pub fn function_path(facts: &FactBase, db: &SpecDb, call: &CallFact) -> Option<String> {
    match &call.callee {
        Callee::Function(f) => facts.module_path(*f),
        Callee::Method { receiver, name } => {
            let path = format!("{}.{name}", facts.module_path(*receiver)?);
            let known = db.lookup_match(CalleeName::Function(&path), None).is_some();
            (known || imported(facts, *receiver)).then_some(path)
        }
    }
}

fn imported(facts: &FactBase, mut v: VarId) -> bool {
    loop {
        match facts.def(v) {
            Def::Module(_) => return true,
            Def::Copy(src) | Def::Attr { base: src, .. } => v = *src,
            _ => return false,
        }
    }
}

fn resolve_method<'a>(
    facts: &FactBase,
    pts: &PointsTo,
    db: &'a SpecDb,
    receiver: VarId,
    name: &str,
    is_dataset: &dyn Fn(VarId) -> bool,
) -> Vec<Target<'a>> {
    let objects: Vec<ObjId> = pts
        .pts(receiver)
        .iter()
        .copied()
        .filter(|&o| pts.object(o).kind != ObjKind::Container)
        .collect();
    let lookup = |class: Option<&str>, kind| {
        db.lookup_match(
            CalleeName::Method {
                class,
                method: name,
            },
            Some(kind),
        )
    };

    let mut out = Vec::new();
    for &o in &objects {
        if let Some(class) = pts.object(o).class.as_deref() {
            if let Some(m) = lookup(Some(class), ReceiverKind::Object) {
                out.push(Target {
                    spec_index: m.index,
                    spec: m.spec,
                    object: Some(o),
                    api: format!("{}.{name}", short(class)),
                });
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    if is_dataset(receiver) {
        if let Some(m) = lookup(None, ReceiverKind::Dataset) {
            return vec![Target {
                spec_index: m.index,
                spec: m.spec,
                object: None,
                api: format!("{}.{name}", facts.display_name(receiver)),
            }];
        }
    }
    for &o in &objects {
        if pts.object(o).class.is_none() {
            if let Some(m) = lookup(None, ReceiverKind::Object) {
                out.push(Target {
                    spec_index: m.index,
                    spec: m.spec,
                    object: Some(o),
                    api: format!("{}.{name}", facts.display_name(receiver)),
                });
            }
        }
    }
    if out.is_empty() {
        let kind = if objects.is_empty() {
            ReceiverKind::Unknown
        } else {
            ReceiverKind::Object
        };
        if let Some(m) = lookup(None, kind) {
            out.push(Target {
                spec_index: m.index,
                spec: m.spec,
                object: None,
                api: format!("{}.{name}", facts.display_name(receiver)),
            });
        }
    }
    out
}

/// Distinct specs among targets, in first-seen order.
pub fn distinct_specs<'a>(targets: &[Target<'a>]) -> Vec<&'a ApiSpec> {
    let mut seen: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for t in targets {
        if !seen.contains(&t.spec_index) {
            seen.push(t.spec_index);
            out.push(t.spec);
        }
    }
    out
}
