//! SSA construction over the structured core language.
//!
//! Control flow is structured, so phis are placed directly: at the join of
//! `if`/`try` branches, and at loop headers for every name the loop body
//! may rebind (operands patched once the back edges are known). Calls to
//! user functions bound exactly once at module level are inlined up to the
//! configured depth; the chain of inlined call sites is the context
//! recorded on every variable and call.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::core_ast::*;
use super::facts::*;

#[derive(Debug, Clone)]
pub struct SsaOptions {
    /// Maximum inlining depth, which is also the call-string length.
    pub context_depth: usize,
}

impl Default for SsaOptions {
    fn default() -> Self {
        SsaOptions { context_depth: 2 }
    }
}

pub fn to_ssa(core: &CoreModule, opts: &SsaOptions) -> FactBase {
    let mut builder = Builder::new(core, opts);
    builder.block(&core.body);
    builder.drain_standalone();
    let mut facts = builder.facts;
    facts.line_count = max_line(&core.body);
    facts.diagnostics = core.diagnostics.clone();
    facts
}

fn max_line(block: &[Stmt]) -> u32 {
    block
        .iter()
        .map(|s| s.line.max(s.children().map(max_line).max().unwrap_or(0)))
        .max()
        .unwrap_or(0)
}

type Env = HashMap<String, VarId>;

struct Scope {
    id: u32,
    env: Env,
    /// `None` at module level.
    locals: Option<HashSet<String>>,
    globals: HashSet<String>,
}

struct FuncInfo<'a> {
    params: &'a [Param],
    body: &'a [Stmt],
    locals: HashSet<String>,
    globals: HashSet<String>,
}

struct LoopFrame {
    breaks: Vec<Env>,
    continues: Vec<Env>,
}

struct InlineFrame {
    name: String,
    returns: Vec<VarId>,
}

struct Builder<'a> {
    facts: FactBase,
    opts: &'a SsaOptions,
    unique_functions: HashMap<String, FuncInfo<'a>>,
    scopes: Vec<Scope>,
    next_scope: u32,
    versions: HashMap<(u32, String), u32>,
    loop_depth: u32,
    loops: Vec<LoopFrame>,
    inline_stack: Vec<InlineFrame>,
    inlined: HashSet<String>,
    pending: Vec<&'a Stmt>,
    walked_standalone: HashSet<u32>,
    /// One free variable per (scope, name), shared by all branches.
    frees: HashMap<(u32, String), VarId>,
    context: Context,
}

impl<'a> Builder<'a> {
    fn new(core: &'a CoreModule, opts: &'a SsaOptions) -> Self {
        let mut bindings: HashMap<&str, usize> = HashMap::new();
        let mut defs = Vec::new();
        count_module_bindings(&core.body, &mut bindings, &mut defs);
        let unique_functions = defs
            .into_iter()
            .filter(|s| match &s.kind {
                StmtKind::FuncDef { name, .. } => bindings.get(name.as_str()) == Some(&1),
                _ => false,
            })
            .filter_map(|s| match &s.kind {
                StmtKind::FuncDef { name, params, body } => {
                    Some((name.clone(), func_info(params, body)))
                }
                _ => None,
            })
            .collect();
        Builder {
            facts: FactBase::new(0),
            opts,
            unique_functions,
            scopes: vec![Scope {
                id: 0,
                env: Env::new(),
                locals: None,
                globals: HashSet::new(),
            }],
            next_scope: 1,
            versions: HashMap::new(),
            loop_depth: 0,
            loops: Vec::new(),
            inline_stack: Vec::new(),
            inlined: HashSet::new(),
            pending: Vec::new(),
            walked_standalone: HashSet::new(),
            frees: HashMap::new(),
            context: Vec::new(),
        }
    }

    fn top(&self) -> usize {
        self.scopes.len() - 1
    }

    /// Scope index a name lives in when read or written from the top scope.
    fn scope_for(&self, name: &str) -> usize {
        let top = self.top();
        let scope = &self.scopes[top];
        match &scope.locals {
            Some(locals) if locals.contains(name) && !scope.globals.contains(name) => top,
            Some(_) => 0,
            None => top,
        }
    }

    fn new_version(&mut self, scope: usize, name: &str, def: Def, line: u32) -> VarId {
        let scope_id = self.scopes[scope].id;
        let counter = self
            .versions
            .entry((scope_id, name.to_string()))
            .or_insert(0);
        let version = *counter;
        *counter += 1;
        let var = Variable {
            name: name.to_string(),
            version,
            line,
            scope: scope_id,
            context: self.context.clone(),
            in_loop: self.loop_depth > 0,
            synthetic: name.starts_with('_'),
        };
        self.facts.add_var(var, def)
    }

    fn define(&mut self, name: &str, def: Def, line: u32) -> VarId {
        let scope = self.scope_for(name);
        let v = self.new_version(scope, name, def, line);
        self.scopes[scope].env.insert(name.to_string(), v);
        v
    }

    fn lookup(&mut self, name: &str, line: u32) -> VarId {
        let scope = self.scope_for(name);
        if let Some(&v) = self.scopes[scope].env.get(name) {
            return v;
        }
        let key = (self.scopes[scope].id, name.to_string());
        let v = match self.frees.get(&key) {
            Some(&v) => v,
            None => {
                let v = self.new_version(scope, name, Def::Free, line);
                self.frees.insert(key, v);
                v
            }
        };
        self.scopes[scope].env.insert(name.to_string(), v);
        v
    }

    fn literal_var(&mut self, lit: &Literal, line: u32) -> VarId {
        let top = self.top();
        self.new_version(top, "_lit", Def::Literal(literal_kind(lit)), line)
    }

    fn operand(&mut self, op: &Operand, line: u32) -> VarId {
        match op {
            Operand::Var(name) => self.lookup(name, line),
            Operand::Const(lit) => self.literal_var(lit, line),
        }
    }

    fn operand_vars(&mut self, ops: &[Operand], line: u32) -> Vec<VarId> {
        ops.iter()
            .filter_map(|op| op.var().map(|n| self.lookup(n, line)))
            .collect()
    }

    fn snapshot(&self) -> Env {
        self.scopes[self.top()].env.clone()
    }

    fn restore(&mut self, env: Env) {
        let top = self.top();
        self.scopes[top].env = env;
    }

    /// Join environments from several predecessors into the top scope.
    fn merge(&mut self, envs: Vec<Env>, line: u32) {
        let top = self.top();
        let names: BTreeSet<&String> = envs.iter().flat_map(|e| e.keys()).collect();
        let mut merged = Env::new();
        let mut phis = Vec::new();
        for name in names {
            let mut ops: Vec<VarId> = Vec::new();
            for env in &envs {
                if let Some(&v) = env.get(name) {
                    if !ops.contains(&v) {
                        ops.push(v);
                    }
                }
            }
            if ops.len() == 1 {
                merged.insert(name.clone(), ops[0]);
            } else {
                phis.push((name.clone(), ops));
            }
        }
        for (name, ops) in phis {
            let v = self.new_version(top, &name, Def::Phi(ops), line);
            merged.insert(name, v);
        }
        self.scopes[top].env = merged;
    }

    fn block(&mut self, stmts: &'a [Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &'a Stmt) {
        let line = s.line;
        match &s.kind {
            StmtKind::Assign { target, value } => self.cexpr(value, Some(target), s),
            StmtKind::Expr(value) => self.cexpr(value, None, s),
            StmtKind::Update { root, path, value } => {
                let base = self.lookup(root, line);
                let value = self.operand(value, line);
                let access = match path.as_slice() {
                    [Access::Attr(a)] => UpdateAccess::Attr(a.clone()),
                    [Access::Index(i)] => UpdateAccess::Index(self.index_fact(i, line)),
                    chain => UpdateAccess::Nested(
                        chain
                            .iter()
                            .map(|a| match a {
                                Access::Attr(a) => a.clone(),
                                Access::Index(_) => "[]".into(),
                            })
                            .collect(),
                    ),
                };
                self.define(
                    root,
                    Def::Update {
                        base,
                        value,
                        access,
                    },
                    line,
                );
            }
            StmtKind::Import { target, module } => {
                self.define(target, Def::Module(module.clone()), line);
            }
            StmtKind::If { test, body, orelse } => {
                self.operand(test, line);
                let before = self.snapshot();
                self.block(body);
                let after_body = self.snapshot();
                self.restore(before);
                self.block(orelse);
                let after_else = self.snapshot();
                self.merge(vec![after_body, after_else], line);
            }
            StmtKind::For {
                target,
                iter,
                body,
                orelse,
            } => {
                let iter = self.operand(iter, line);
                let name = target.clone();
                self.loop_stmt(
                    line,
                    Some(target),
                    move |b| {
                        b.define(&name, Def::IterElem { iter }, line);
                    },
                    body,
                    orelse,
                );
            }
            StmtKind::While { test, body, orelse } => {
                self.operand(test, line);
                self.loop_stmt(line, None, |_| {}, body, orelse);
            }
            StmtKind::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                let before = self.snapshot();
                self.block(body);
                let after_body = self.snapshot();
                let mut exits = Vec::new();
                for h in handlers {
                    // An exception may be raised anywhere in the body.
                    let mut entry = after_body.clone();
                    for (k, v) in &before {
                        entry.entry(k.clone()).or_insert(*v);
                    }
                    self.restore(entry);
                    if let Some(name) = &h.name {
                        self.define(name, Def::Literal(LiteralKind::Opaque), line);
                    }
                    self.block(&h.body);
                    exits.push(self.snapshot());
                }
                self.restore(after_body);
                self.block(orelse);
                exits.insert(0, self.snapshot());
                self.merge(exits, line);
                self.block(finalbody);
            }
            StmtKind::FuncDef { name, .. } => {
                self.define(name, Def::Function(name.clone()), line);
                self.pending.push(s);
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(op) => self.operand(op, line),
                    None => self.literal_var(&Literal::None, line),
                };
                if let Some(frame) = self.inline_stack.last_mut() {
                    if self.scopes.len() > 1 {
                        frame.returns.push(v);
                    }
                }
            }
            StmtKind::Global(names) => {
                let top = self.top();
                if self.scopes[top].locals.is_some() {
                    self.scopes[top].globals.extend(names.iter().cloned());
                }
            }
            StmtKind::Break => {
                let env = self.snapshot();
                if let Some(frame) = self.loops.last_mut() {
                    frame.breaks.push(env);
                }
            }
            StmtKind::Continue => {
                let env = self.snapshot();
                if let Some(frame) = self.loops.last_mut() {
                    frame.continues.push(env);
                }
            }
        }
    }

    fn loop_stmt(
        &mut self,
        line: u32,
        target: Option<&str>,
        head: impl FnOnce(&mut Self),
        body: &'a [Stmt],
        orelse: &'a [Stmt],
    ) {
        let mut assigned = BTreeSet::new();
        collect_assigned(body, &mut assigned);
        if let Some(t) = target {
            assigned.insert(t.to_string());
        }
        let top = self.top();
        // Only names living in the current scope get header phis; stores to
        // globals from inside a function body are not merged.
        let assigned: Vec<String> = assigned
            .into_iter()
            .filter(|n| self.scope_for(n) == top)
            .collect();

        self.loop_depth += 1;
        let mut header = Vec::new();
        for name in &assigned {
            let entry = match self.scopes[top].env.get(name) {
                Some(&v) => v,
                None => self.new_version(top, name, Def::Literal(LiteralKind::None), line),
            };
            let phi = self.new_version(top, name, Def::Phi(vec![entry]), line);
            self.scopes[top].env.insert(name.clone(), phi);
            header.push((name.clone(), phi));
        }
        let header_env = self.snapshot();

        self.loops.push(LoopFrame {
            breaks: Vec::new(),
            continues: Vec::new(),
        });
        head(self);
        self.block(body);
        let end = self.snapshot();
        let frame = self.loops.pop().expect("loop frame");

        for (name, phi) in &header {
            for env in std::iter::once(&end).chain(&frame.continues) {
                if let Some(&v) = env.get(name) {
                    if let Def::Phi(ops) = &mut self.facts.defs[phi.index()] {
                        if v != *phi && !ops.contains(&v) {
                            ops.push(v);
                        }
                    }
                }
            }
        }
        self.loop_depth -= 1;

        // Normal exit leaves through the header test.
        self.restore(header_env);
        self.block(orelse);
        let mut exits = vec![self.snapshot()];
        exits.extend(frame.breaks);
        if exits.len() > 1 {
            self.merge(exits, line);
        }
    }

    fn index_fact(&mut self, index: &IndexExpr, line: u32) -> IndexFact {
        let mut operands = Vec::new();
        let (kind, has_columns) = match index {
            IndexExpr::Tuple(items) => {
                let kind = items
                    .first()
                    .map(|i| self.index_kind(i, line, &mut operands))
                    .unwrap_or(IndexKind::Other);
                for item in items.iter().skip(1) {
                    self.index_kind(item, line, &mut operands);
                }
                (kind, items.len() > 1)
            }
            single => (self.index_kind(single, line, &mut operands), false),
        };
        IndexFact {
            kind,
            has_columns,
            operands,
        }
    }

    fn index_kind(&mut self, index: &IndexExpr, line: u32, operands: &mut Vec<VarId>) -> IndexKind {
        let mut bound = |b: &Option<Operand>, this: &mut Self| match b {
            None => SliceBound::Open,
            Some(Operand::Const(Literal::Int(t))) => t
                .parse()
                .map(SliceBound::Int)
                .unwrap_or(SliceBound::Dynamic),
            Some(Operand::Const(Literal::None)) => SliceBound::Open,
            Some(Operand::Var(n)) => {
                operands.push(this.lookup(n, line));
                SliceBound::Dynamic
            }
            Some(Operand::Const(_)) => SliceBound::Dynamic,
        };
        match index {
            IndexExpr::Single(Operand::Const(Literal::Int(t))) => {
                t.parse().map(IndexKind::Int).unwrap_or(IndexKind::Other)
            }
            IndexExpr::Single(Operand::Const(Literal::Str(s))) => IndexKind::Key(s.clone()),
            IndexExpr::Single(Operand::Var(n)) => {
                operands.push(self.lookup(n, line));
                IndexKind::Var
            }
            IndexExpr::Single(Operand::Const(_)) => IndexKind::Other,
            IndexExpr::Slice { lower, upper, step } => {
                let lower = bound(lower, self);
                let upper = bound(upper, self);
                bound(step, self);
                IndexKind::Slice { lower, upper }
            }
            IndexExpr::Tuple(_) => IndexKind::Other,
        }
    }

    fn cexpr(&mut self, value: &CExpr, target: Option<&String>, s: &'a Stmt) {
        let line = s.line;
        let def = match value {
            CExpr::Use(Operand::Const(lit)) => Def::Literal(literal_kind(lit)),
            CExpr::Use(Operand::Var(n)) => Def::Copy(self.lookup(n, line)),
            CExpr::Call { func, args, kwargs } => {
                let fv = self.lookup(func, line);
                let args = self.call_args(args, line);
                let kwargs = self.call_kwargs(kwargs, line);
                if let Some(def) = self.try_inline(fv, &args, &kwargs, s) {
                    def
                } else {
                    self.emit_call(Callee::Function(fv), args, kwargs, target, s);
                    return;
                }
            }
            CExpr::MethodCall {
                receiver,
                method,
                args,
                kwargs,
            } => {
                let rv = self.lookup(receiver, line);
                let args = self.call_args(args, line);
                let kwargs = self.call_kwargs(kwargs, line);
                let callee = Callee::Method {
                    receiver: rv,
                    name: method.clone(),
                };
                self.emit_call(callee, args, kwargs, target, s);
                return;
            }
            CExpr::Attr { base, attr } => Def::Attr {
                base: self.lookup(base, line),
                attr: attr.clone(),
            },
            CExpr::Index { base, index } => {
                let base = self.lookup(base, line);
                let index = self.index_fact(index, line);
                Def::Index { base, index }
            }
            CExpr::Binary { left, right, .. } => Def::Combine {
                kind: CombineKind::Arith,
                operands: self.operand_vars(&[left.clone(), right.clone()], line),
            },
            CExpr::Unary { operand, .. } => Def::Combine {
                kind: CombineKind::Unary,
                operands: self.operand_vars(std::slice::from_ref(operand), line),
            },
            CExpr::Compare { left, rights, .. } => {
                let mut ops = vec![left.clone()];
                ops.extend(rights.iter().cloned());
                Def::Combine {
                    kind: CombineKind::Compare,
                    operands: self.operand_vars(&ops, line),
                }
            }
            CExpr::BoolOp { values, .. } => Def::Combine {
                kind: CombineKind::Bool,
                operands: self.operand_vars(values, line),
            },
            CExpr::Format(values) => Def::Combine {
                kind: CombineKind::Format,
                operands: self.operand_vars(values, line),
            },
            CExpr::Container { kind, elems } => {
                let elems = elems.iter().map(|e| self.operand(e, line)).collect();
                let shape = match kind {
                    ContainerKind::List => ContainerShape::List,
                    ContainerKind::Tuple => ContainerShape::Tuple,
                    ContainerKind::Set => ContainerShape::Set,
                };
                Def::Container { shape, elems }
            }
            CExpr::Dict(entries) => {
                let elems = entries.iter().map(|(_, v)| self.operand(v, line)).collect();
                Def::Container {
                    shape: ContainerShape::Dict,
                    elems,
                }
            }
        };
        if let Some(t) = target {
            self.define(t, def, line);
        }
    }

    fn call_args(&mut self, args: &[Arg], line: u32) -> Vec<CallArg> {
        args.iter()
            .map(|a| CallArg {
                value: self.operand(&a.value, line),
                starred: a.starred,
            })
            .collect()
    }

    fn call_kwargs(&mut self, kwargs: &[Kwarg], line: u32) -> Vec<(Option<String>, VarId)> {
        kwargs
            .iter()
            .map(|k| (k.name.clone(), self.operand(&k.value, line)))
            .collect()
    }

    fn emit_call(
        &mut self,
        callee: Callee,
        args: Vec<CallArg>,
        kwargs: Vec<(Option<String>, VarId)>,
        target: Option<&String>,
        s: &Stmt,
    ) {
        let id = CallId(self.facts.calls.len() as u32);
        let def = Def::CallResult(id);
        let result = match target {
            Some(t) => self.define(t, def, s.line),
            None => {
                let top = self.top();
                self.new_version(top, "_r", def, s.line)
            }
        };
        self.facts.add_call(CallFact {
            id,
            callee,
            args,
            kwargs,
            result,
            line: s.line,
            in_loop: self.loop_depth > 0,
            site: s.id,
            context: self.context.clone(),
        });
    }

    fn try_inline(
        &mut self,
        func: VarId,
        args: &[CallArg],
        kwargs: &[(Option<String>, VarId)],
        s: &'a Stmt,
    ) -> Option<Def> {
        let Def::Function(name) = self.facts.def(func) else {
            return None;
        };
        let name = name.clone();
        if self.context.len() >= self.opts.context_depth
            || self.inline_stack.iter().any(|f| f.name == name)
            || args.iter().any(|a| a.starred)
        {
            return None;
        }
        let info = self.unique_functions.get(&name)?;
        let (params, body) = (info.params, info.body);
        let locals = info.locals.clone();
        let globals = info.globals.clone();
        self.inlined.insert(name.clone());

        let line = s.line;
        self.scopes.push(Scope {
            id: self.next_scope,
            env: Env::new(),
            locals: Some(locals),
            globals,
        });
        self.next_scope += 1;
        self.context.push(s.id);
        self.inline_stack.push(InlineFrame {
            name,
            returns: Vec::new(),
        });

        let mut positional = args.iter().map(|a| a.value);
        let mut used_kw = HashSet::new();
        for p in params {
            let def = match p.kind {
                ParamKind::Positional => match positional.next() {
                    Some(v) => Def::Copy(v),
                    None => keyword(kwargs, &p.name, &mut used_kw)
                        .map(Def::Copy)
                        .unwrap_or(Def::Literal(LiteralKind::Opaque)),
                },
                ParamKind::VarArgs => Def::Container {
                    shape: ContainerShape::Tuple,
                    elems: positional.by_ref().collect(),
                },
                ParamKind::KeywordOnly => keyword(kwargs, &p.name, &mut used_kw)
                    .map(Def::Copy)
                    .unwrap_or(Def::Literal(LiteralKind::Opaque)),
                ParamKind::KwArgs => Def::Container {
                    shape: ContainerShape::Dict,
                    elems: kwargs
                        .iter()
                        .filter(|(k, _)| !k.as_ref().is_some_and(|k| used_kw.contains(k)))
                        .map(|(_, v)| *v)
                        .collect(),
                },
            };
            self.define(&p.name, def, line);
        }
        self.block(body);

        let frame = self.inline_stack.pop().expect("inline frame");
        self.context.pop();
        self.scopes.pop();
        Some(match frame.returns.as_slice() {
            [] => Def::Literal(LiteralKind::None),
            [single] => Def::Copy(*single),
            many => Def::Phi(many.to_vec()),
        })
    }

    /// Analyze bodies of functions that were never inlined, once each, with
    /// opaque parameters.
    fn drain_standalone(&mut self) {
        while let Some(s) = self.pending.pop() {
            let StmtKind::FuncDef { name, params, body } = &s.kind else {
                continue;
            };
            let unique = self.unique_functions.contains_key(name);
            if (unique && self.inlined.contains(name)) || !self.walked_standalone.insert(s.id) {
                continue;
            }
            let info = func_info(params, body);
            self.scopes.push(Scope {
                id: self.next_scope,
                env: Env::new(),
                locals: Some(info.locals),
                globals: info.globals,
            });
            self.next_scope += 1;
            let saved_depth = std::mem::take(&mut self.loop_depth);
            for (index, p) in params.iter().enumerate() {
                self.define(&p.name, Def::Param { index }, s.line);
            }
            self.block(body);
            self.loop_depth = saved_depth;
            self.scopes.pop();
        }
    }
}

fn keyword(
    kwargs: &[(Option<String>, VarId)],
    name: &str,
    used: &mut HashSet<String>,
) -> Option<VarId> {
    let found = kwargs
        .iter()
        .find(|(k, _)| k.as_deref() == Some(name))
        .map(|(_, v)| *v);
    if found.is_some() {
        used.insert(name.to_string());
    }
    found
}

fn func_info<'a>(params: &'a [Param], body: &'a [Stmt]) -> FuncInfo<'a> {
    let mut assigned = BTreeSet::new();
    collect_assigned(body, &mut assigned);
    let mut globals = HashSet::new();
    collect_globals(body, &mut globals);
    let mut locals: HashSet<String> = assigned.into_iter().collect();
    locals.extend(params.iter().map(|p| p.name.clone()));
    for g in &globals {
        locals.remove(g);
    }
    FuncInfo {
        params,
        body,
        locals,
        globals,
    }
}

fn literal_kind(lit: &Literal) -> LiteralKind {
    match lit {
        Literal::Int(_) => LiteralKind::Int,
        Literal::Float(_) => LiteralKind::Float,
        Literal::Str(_) => LiteralKind::Str,
        Literal::Bytes(_) => LiteralKind::Bytes,
        Literal::Bool(_) => LiteralKind::Bool,
        Literal::None => LiteralKind::None,
        Literal::Opaque => LiteralKind::Opaque,
    }
}

/// Names bound anywhere in a block, not descending into nested functions.
fn collect_assigned(block: &[Stmt], out: &mut BTreeSet<String>) {
    for s in block {
        match &s.kind {
            StmtKind::Assign { target, .. } => {
                out.insert(target.clone());
            }
            StmtKind::Update { root, .. } => {
                out.insert(root.clone());
            }
            StmtKind::Import { target, .. } => {
                out.insert(target.clone());
            }
            StmtKind::FuncDef { name, .. } => {
                out.insert(name.clone());
                continue;
            }
            StmtKind::For { target, .. } => {
                out.insert(target.clone());
            }
            StmtKind::Try { handlers, .. } => {
                out.extend(handlers.iter().filter_map(|h| h.name.clone()));
            }
            _ => {}
        }
        for child in s.children() {
            collect_assigned(child, out);
        }
    }
}

fn collect_globals(block: &[Stmt], out: &mut HashSet<String>) {
    for s in block {
        match &s.kind {
            StmtKind::Global(names) => out.extend(names.iter().cloned()),
            StmtKind::FuncDef { .. } => continue,
            _ => {}
        }
        for child in s.children() {
            collect_globals(child, out);
        }
    }
}

fn count_module_bindings<'a>(
    block: &'a [Stmt],
    counts: &mut HashMap<&'a str, usize>,
    defs: &mut Vec<&'a Stmt>,
) {
    for s in block {
        let bound: Vec<&str> = match &s.kind {
            StmtKind::Assign { target, .. } => vec![target],
            StmtKind::Import { target, .. } => vec![target],
            StmtKind::For { target, .. } => vec![target],
            StmtKind::FuncDef { name, .. } => {
                defs.push(s);
                *counts.entry(name).or_insert(0) += 1;
                continue;
            }
            StmtKind::Try { handlers, .. } => {
                handlers.iter().filter_map(|h| h.name.as_deref()).collect()
            }
            _ => Vec::new(),
        };
        for name in bound {
            *counts.entry(name).or_insert(0) += 1;
        }
        for child in s.children() {
            count_module_bindings(child, counts, defs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{desugar, parse::parse_str};

    fn facts(src: &str) -> FactBase {
        let core = desugar(&parse_str(src).unwrap());
        to_ssa(&core, &SsaOptions::default())
    }

    fn def_of<'f>(f: &'f FactBase, display: &str) -> &'f Def {
        f.def(
            f.find(display)
                .unwrap_or_else(|| panic!("no variable {display}")),
        )
    }

    #[test]
    fn if_else_join_gets_phi() {
        let f = facts("if c:\n    x = 1\nelse:\n    x = 2\ny = x\n");
        let xs: Vec<VarId> = f.var_ids().filter(|&v| f.var(v).name == "x").collect();
        assert_eq!(xs.len(), 3);
        let Def::Phi(ops) = f.def(xs[2]) else {
            panic!("expected phi, got {:?}", f.def(xs[2]))
        };
        assert_eq!(ops, &vec![xs[0], xs[1]]);
        assert!(matches!(f.def(xs[0]), Def::Literal(LiteralKind::Int)));
        assert_eq!(def_of(&f, "y"), &Def::Copy(xs[2]));
    }

    #[test]
    fn reassignment_versions() {
        let f = facts("X = load()\nX = sel.transform(X)\n");
        let x0 = f.find("X_0").unwrap();
        let x = f.find("X").unwrap();
        assert_eq!(f.var(x0).version, 0);
        assert_eq!(f.var(x).version, 1);
        let call = &f.calls[1];
        assert_eq!(call.args[0].value, x0);
        assert_eq!(call.result, x);
    }

    #[test]
    fn loop_header_phi_and_in_loop() {
        let f = facts("acc = 0\nfor i in xs:\n    acc = acc + i\nprint(acc)\n");
        let loop_phi = f
            .var_ids()
            .find(|&v| f.var(v).name == "acc" && matches!(f.def(v), Def::Phi(_)))
            .unwrap();
        let Def::Phi(ops) = f.def(loop_phi) else {
            unreachable!()
        };
        assert_eq!(ops.len(), 2);
        let print = f.calls.iter().find(|c| !c.in_loop).unwrap();
        assert_eq!(print.args[0].value, loop_phi);
        let i = f.find("i").unwrap();
        assert!(f.var(i).in_loop);
    }

    #[test]
    fn free_names_are_defined_once() {
        let f = facts("a = X_train\nb = X_train\n");
        let frees: Vec<_> = f.var_ids().filter(|&v| f.def(v) == &Def::Free).collect();
        assert_eq!(frees.len(), 1);
    }

    #[test]
    fn user_function_is_inlined_with_context() {
        let f = facts("def g(a):\n    return a.mean()\nm = g(X)\n");
        assert_eq!(f.calls.len(), 1);
        let call = &f.calls[0];
        assert_eq!(call.context.len(), 1);
        let m = f.find("m").unwrap();
        assert_eq!(f.def(m), &Def::Copy(call.result));
    }

    #[test]
    fn recursion_and_depth_are_bounded() {
        let f = facts("def r(x):\n    return r(x)\ny = r(1)\n");
        assert!(f
            .calls
            .iter()
            .any(|c| matches!(c.callee, Callee::Function(_))));
        let f = facts(
            "def a(x):\n    return b(x)\ndef b(x):\n    return c(x)\ndef c(x):\n    return x.sum()\ny = a(1)\n",
        );
        assert!(f.calls.iter().all(|c| c.context.len() <= 2));
    }

    #[test]
    fn uninlined_function_analyzed_with_params() {
        let f = facts("def cb(d):\n    return d.fit(q)\n");
        assert!(f.defs.iter().any(|d| matches!(d, Def::Param { index: 0 })));
        assert_eq!(f.calls.len(), 1);
    }

    #[test]
    fn field_store_versions_root() {
        let f = facts("df = load()\ndf['a'] = 1\nz = df\n");
        let z = f.find("z").unwrap();
        let Def::Copy(src) = f.def(z) else { panic!() };
        assert!(matches!(f.def(*src), Def::Update { .. }));
    }

    #[test]
    fn every_use_has_a_definition() {
        let f = facts(
            "import numpy as np\nfor a in range(3):\n    if a:\n        continue\n    b = a\n    break\nelse:\n    b = 0\nprint(b)\ntry:\n    q = 1\nexcept ValueError as e:\n    q = e\n",
        );
        for v in f.var_ids() {
            for u in f.def(v).uses() {
                assert!(u.index() < f.len());
            }
        }
        assert_eq!(f.vars.len(), f.defs.len());
    }
}
