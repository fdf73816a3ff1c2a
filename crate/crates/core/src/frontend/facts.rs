//! SSA facts for one source unit.

use std::collections::HashMap;

use super::Diagnostic;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct VarId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct CallId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CallId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Inlining call string: statement ids of the enclosing inlined call sites,
/// outermost first.
pub type Context = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub version: u32,
    pub line: u32,
    /// Lexical scope instance: 0 for module level, one per inlined or
    /// standalone function body otherwise.
    pub scope: u32,
    pub context: Context,
    pub in_loop: bool,
    /// Introduced by lowering (temporaries and materialized constants).
    pub synthetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralKind {
    Int,
    Float,
    Str,
    Bytes,
    Bool,
    None,
    Opaque,
}

impl LiteralKind {
    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            LiteralKind::Int
                | LiteralKind::Float
                | LiteralKind::Str
                | LiteralKind::Bytes
                | LiteralKind::Bool
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexKind {
    Int(i64),
    Key(String),
    Slice {
        lower: SliceBound,
        upper: SliceBound,
    },
    /// Index by a variable (mask, list of positions, computed key).
    Var,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceBound {
    Open,
    Int(i64),
    Dynamic,
}

impl IndexKind {
    /// Selects exactly one row (`x[3:4]`, `x[-1:]`, `x[:1]`).
    pub fn is_single_row_slice(&self) -> bool {
        match self {
            IndexKind::Slice { lower, upper } => match (lower, upper) {
                (SliceBound::Int(a), SliceBound::Int(b)) => (*a >= 0) == (*b > 0) && b - a == 1,
                (SliceBound::Open, SliceBound::Int(1)) => true,
                (SliceBound::Int(-1), SliceBound::Open) => true,
                _ => false,
            },
            _ => false,
        }
    }

    pub fn is_full_slice(&self) -> bool {
        matches!(
            self,
            IndexKind::Slice {
                lower: SliceBound::Open,
                upper: SliceBound::Open
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexFact {
    /// Row selector (first component of a tuple index).
    pub kind: IndexKind,
    /// True for `x[rows, cols]` style indexes.
    pub has_columns: bool,
    pub operands: Vec<VarId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineKind {
    Arith,
    Compare,
    Bool,
    Unary,
    Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerShape {
    List,
    Tuple,
    Set,
    Dict,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateAccess {
    Attr(String),
    Index(IndexFact),
    /// Store through a longer chain (`a.b.c = v`, `df.loc[m] = v`).
    Nested(Vec<String>),
}

/// The single defining fact of an SSA variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Def {
    Copy(VarId),
    Literal(LiteralKind),
    CallResult(CallId),
    Phi(Vec<VarId>),
    /// Parameter of a function body analyzed without a call site.
    Param {
        index: usize,
    },
    /// Name read before any binding (free in this unit).
    Free,
    Module(String),
    Function(String),
    Attr {
        base: VarId,
        attr: String,
    },
    Index {
        base: VarId,
        index: IndexFact,
    },
    Combine {
        kind: CombineKind,
        operands: Vec<VarId>,
    },
    Container {
        shape: ContainerShape,
        elems: Vec<VarId>,
    },
    IterElem {
        iter: VarId,
    },
    Update {
        base: VarId,
        value: VarId,
        access: UpdateAccess,
    },
}

impl Def {
    /// Variables read by this definition.
    pub fn uses(&self) -> Vec<VarId> {
        match self {
            Def::Copy(v) => vec![*v],
            Def::Phi(ops) => ops.clone(),
            Def::Attr { base, .. } => vec![*base],
            Def::Index { base, index } => {
                let mut v = vec![*base];
                v.extend(&index.operands);
                v
            }
            Def::Combine { operands, .. } => operands.clone(),
            Def::Container { elems, .. } => elems.clone(),
            Def::IterElem { iter } => vec![*iter],
            Def::Update {
                base,
                value,
                access,
            } => {
                let mut v = vec![*base, *value];
                if let UpdateAccess::Index(i) = access {
                    v.extend(&i.operands);
                }
                v
            }
            Def::Literal(_)
            | Def::CallResult(_)
            | Def::Param { .. }
            | Def::Free
            | Def::Module(_)
            | Def::Function(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    Function(VarId),
    Method { receiver: VarId, name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallArg {
    pub value: VarId,
    pub starred: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallFact {
    pub id: CallId,
    pub callee: Callee,
    pub args: Vec<CallArg>,
    /// `None` name for `**mapping`.
    pub kwargs: Vec<(Option<String>, VarId)>,
    pub result: VarId,
    pub line: u32,
    pub in_loop: bool,
    /// Core statement id of the call; distinct per syntactic site.
    pub site: u32,
    pub context: Context,
}

impl CallFact {
    pub fn receiver(&self) -> Option<VarId> {
        match &self.callee {
            Callee::Method { receiver, .. } => Some(*receiver),
            Callee::Function(_) => None,
        }
    }

    pub fn method_name(&self) -> Option<&str> {
        match &self.callee {
            Callee::Method { name, .. } => Some(name),
            Callee::Function(_) => None,
        }
    }

    pub fn kwarg(&self, name: &str) -> Option<VarId> {
        self.kwargs
            .iter()
            .find(|(k, _)| k.as_deref() == Some(name))
            .map(|(_, v)| *v)
    }

    /// Every variable the call reads, receiver first.
    pub fn inputs(&self) -> Vec<VarId> {
        let mut v = Vec::new();
        match &self.callee {
            Callee::Method { receiver, .. } => v.push(*receiver),
            Callee::Function(f) => v.push(*f),
        }
        v.extend(self.args.iter().map(|a| a.value));
        v.extend(self.kwargs.iter().map(|(_, k)| *k));
        v
    }
}

#[derive(Debug, Clone, Default)]
pub struct FactBase {
    pub vars: Vec<Variable>,
    /// Parallel to `vars`.
    pub defs: Vec<Def>,
    pub calls: Vec<CallFact>,
    pub line_count: u32,
    pub diagnostics: Vec<Diagnostic>,
    latest: HashMap<(u32, String), u32>,
}

impl FactBase {
    pub fn new(line_count: u32) -> Self {
        FactBase {
            line_count,
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, var: Variable, def: Def) -> VarId {
        let id = VarId(self.vars.len() as u32);
        let key = (var.scope, var.name.clone());
        let latest = self.latest.entry(key).or_insert(var.version);
        *latest = (*latest).max(var.version);
        self.vars.push(var);
        self.defs.push(def);
        id
    }

    pub fn add_call(&mut self, mut call: CallFact) -> CallId {
        let id = CallId(self.calls.len() as u32);
        call.id = id;
        self.calls.push(call);
        id
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.index()]
    }

    pub fn def(&self, v: VarId) -> &Def {
        &self.defs[v.index()]
    }

    pub fn call(&self, c: CallId) -> &CallFact {
        &self.calls[c.index()]
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len() as u32).map(VarId)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Name as shown to users: the newest version of a name is shown bare,
    /// earlier ones as `name_<version>`.
    pub fn display_name(&self, v: VarId) -> String {
        let var = self.var(v);
        let latest = self.latest.get(&(var.scope, var.name.clone())).copied();
        if latest == Some(var.version) {
            var.name.clone()
        } else {
            format!("{}_{}", var.name, var.version)
        }
    }

    /// Look up a variable by display name (first match, module scope first).
    pub fn find(&self, display: &str) -> Option<VarId> {
        let mut ids: Vec<VarId> = self
            .var_ids()
            .filter(|&v| self.display_name(v) == display)
            .collect();
        ids.sort_by_key(|&v| (self.var(v).scope, v));
        ids.first().copied()
    }

    pub fn assigns(&self) -> impl Iterator<Item = (VarId, VarId)> + '_ {
        self.var_ids().filter_map(|v| match self.def(v) {
            Def::Copy(src) => Some((v, *src)),
            _ => None,
        })
    }

    pub fn phis(&self) -> impl Iterator<Item = (VarId, &[VarId])> + '_ {
        self.var_ids().filter_map(|v| match self.def(v) {
            Def::Phi(ops) => Some((v, ops.as_slice())),
            _ => None,
        })
    }

    pub fn literals(&self) -> impl Iterator<Item = (VarId, LiteralKind)> + '_ {
        self.var_ids().filter_map(|v| match self.def(v) {
            Def::Literal(k) => Some((v, *k)),
            _ => None,
        })
    }

    /// Dotted module path for variables bound by imports, or for attribute
    /// chains rooted at one. Free names resolve to themselves so that
    /// unimported references can still match specs by suffix.
    pub fn module_path(&self, v: VarId) -> Option<String> {
        self.module_path_depth(v, 0)
    }

    fn module_path_depth(&self, v: VarId, depth: u32) -> Option<String> {
        if depth > 32 {
            return None;
        }
        match self.def(v) {
            Def::Module(path) => Some(path.clone()),
            Def::Free => Some(free_alias(&self.var(v).name).to_string()),
            Def::Copy(src) => self.module_path_depth(*src, depth + 1),
            Def::Attr { base, attr } => self
                .module_path_depth(*base, depth + 1)
                .map(|p| format!("{p}.{attr}")),
            Def::Phi(ops) => {
                let mut paths = ops.iter().map(|o| self.module_path_depth(*o, depth + 1));
                let first = paths.next()??;
                paths
                    .all(|p| p.as_deref() == Some(first.as_str()))
                    .then_some(first)
            }
            _ => None,
        }
    }
}

/// Conventional aliases for notebooks whose import cell was removed.
fn free_alias(name: &str) -> &str {
    match name {
        "np" => "numpy",
        "pd" => "pandas",
        other => other,
    }
}
