//! Lowering from the parser's AST to the core language.

use rustpython_parser::ast::{self, Ranged};

use super::core_ast::*;
use super::parse::Ast;
use super::Diagnostic;

/// Expression nesting beyond this depth is treated as unsupported, which
/// keeps lowering recursion bounded on adversarial input.
const MAX_DEPTH: u32 = 100;

struct Unsupported(String);

type Lowered<T> = Result<T, Unsupported>;

pub fn desugar(ast: &Ast) -> CoreModule {
    let mut lowerer = Lowerer {
        ast,
        next_temp: 0,
        next_id: 0,
        depth: 0,
        line: 1,
        diagnostics: Vec::new(),
    };
    let body = lowerer.block(&ast.body);
    CoreModule {
        body,
        diagnostics: lowerer.diagnostics,
    }
}

struct Lowerer<'a> {
    ast: &'a Ast,
    next_temp: u32,
    next_id: u32,
    depth: u32,
    line: u32,
    diagnostics: Vec<Diagnostic>,
}

/// One level of a comprehension: a `for` clause or one of its `if` filters.
enum CompLevel<'e> {
    For(&'e ast::Comprehension),
    If(&'e ast::Expr),
}

impl<'a> Lowerer<'a> {
    fn fresh(&mut self) -> String {
        self.next_temp += 1;
        format!("_t{}", self.next_temp)
    }

    fn push(&mut self, out: &mut Vec<Stmt>, kind: StmtKind) {
        self.push_at(out, self.line, kind);
    }

    fn push_at(&mut self, out: &mut Vec<Stmt>, line: u32, kind: StmtKind) {
        self.next_id += 1;
        out.push(Stmt {
            id: self.next_id,
            line,
            kind,
        });
    }

    fn line_of(&self, node: &impl Ranged) -> u32 {
        self.ast.line_of(node)
    }

    fn block(&mut self, stmts: &[ast::Stmt]) -> Vec<Stmt> {
        let mut out = Vec::new();
        for stmt in stmts {
            let mark = out.len();
            let line = self.line_of(stmt);
            self.line = line;
            self.depth = 0;
            if let Err(Unsupported(message)) = self.stmt(stmt, &mut out) {
                out.truncate(mark);
                self.diagnostics.push(Diagnostic { line, message });
            }
        }
        out
    }

    fn nested_block(&mut self, stmts: &[ast::Stmt]) -> Vec<Stmt> {
        let saved = (self.line, self.depth);
        let body = self.block(stmts);
        (self.line, self.depth) = saved;
        body
    }

    fn stmt(&mut self, stmt: &ast::Stmt, out: &mut Vec<Stmt>) -> Lowered<()> {
        use ast::Stmt as S;
        match stmt {
            S::FunctionDef(f) => {
                let body = self.nested_block(&f.body);
                let params = lower_params(&f.args);
                self.push(
                    out,
                    StmtKind::FuncDef {
                        name: f.name.to_string(),
                        params,
                        body,
                    },
                );
            }
            S::AsyncFunctionDef(f) => {
                let body = self.nested_block(&f.body);
                let params = lower_params(&f.args);
                self.push(
                    out,
                    StmtKind::FuncDef {
                        name: f.name.to_string(),
                        params,
                        body,
                    },
                );
            }
            S::ClassDef(c) => self.push(
                out,
                StmtKind::Assign {
                    target: c.name.to_string(),
                    value: CExpr::Use(Operand::Const(Literal::Opaque)),
                },
            ),
            S::Return(r) => {
                let value = match &r.value {
                    Some(v) => Some(self.operand(v, out)?),
                    None => None,
                };
                self.push(out, StmtKind::Return(value));
            }
            S::Assign(a) => {
                if let [target] = a.targets.as_slice() {
                    self.assign_expr(target, &a.value, out)?;
                } else {
                    let value = self.operand(&a.value, out)?;
                    for target in &a.targets {
                        self.assign_operand(target, value.clone(), out)?;
                    }
                }
            }
            S::AnnAssign(a) => {
                if let Some(value) = &a.value {
                    self.assign_expr(&a.target, value, out)?;
                }
            }
            S::AugAssign(a) => self.aug_assign(a, out)?,
            S::For(f) => self.for_loop(&f.target, &f.iter, &f.body, &f.orelse, out)?,
            S::AsyncFor(f) => self.for_loop(&f.target, &f.iter, &f.body, &f.orelse, out)?,
            S::While(w) => {
                let test = self.operand(&w.test, out)?;
                let body = self.nested_block(&w.body);
                let orelse = self.nested_block(&w.orelse);
                self.push(out, StmtKind::While { test, body, orelse });
            }
            S::If(i) => {
                let test = self.operand(&i.test, out)?;
                let body = self.nested_block(&i.body);
                let orelse = self.nested_block(&i.orelse);
                self.push(out, StmtKind::If { test, body, orelse });
            }
            S::With(w) => self.with(&w.items, &w.body, out)?,
            S::AsyncWith(w) => self.with(&w.items, &w.body, out)?,
            S::Match(_) => return Err(Unsupported("match statement".into())),
            S::Try(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, out),
            S::TryStar(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, out),
            S::Import(i) => {
                for alias in &i.names {
                    let module = alias.name.to_string();
                    let target = match &alias.asname {
                        Some(a) => a.to_string(),
                        None => module.split('.').next().unwrap_or_default().to_string(),
                    };
                    let module = if alias.asname.is_some() {
                        module
                    } else {
                        target.clone()
                    };
                    self.push(out, StmtKind::Import { target, module });
                }
            }
            S::ImportFrom(i) => {
                let base = i.module.as_ref().map(|m| m.to_string()).unwrap_or_default();
                for alias in &i.names {
                    let name = alias.name.as_str();
                    if name == "*" {
                        continue;
                    }
                    let module = if base.is_empty() {
                        name.to_string()
                    } else {
                        format!("{base}.{name}")
                    };
                    let target = alias
                        .asname
                        .as_ref()
                        .map(|a| a.to_string())
                        .unwrap_or_else(|| name.to_string());
                    self.push(out, StmtKind::Import { target, module });
                }
            }
            S::Global(g) => {
                let names = g.names.iter().map(|n| n.to_string()).collect();
                self.push(out, StmtKind::Global(names));
            }
            S::Nonlocal(n) => {
                let names = n.names.iter().map(|n| n.to_string()).collect();
                self.push(out, StmtKind::Global(names));
            }
            S::Expr(e) => match &*e.value {
                ast::Expr::Constant(_) => {}
                value => {
                    let lowered = self.expr(value, out)?;
                    self.discard(lowered, out);
                }
            },
            S::Break(_) => self.push(out, StmtKind::Break),
            S::Continue(_) => self.push(out, StmtKind::Continue),
            S::Pass(_) | S::Delete(_) | S::Raise(_) | S::Assert(_) | S::TypeAlias(_) => {}
        }
        Ok(())
    }

    /// Keep a value computed only for effect; only calls have effects
    /// worth modeling.
    fn discard(&mut self, value: CExpr, out: &mut Vec<Stmt>) {
        if matches!(value, CExpr::Call { .. } | CExpr::MethodCall { .. }) {
            self.push(out, StmtKind::Expr(value));
        }
    }

    fn for_loop(
        &mut self,
        target: &ast::Expr,
        iter: &ast::Expr,
        body: &[ast::Stmt],
        orelse: &[ast::Stmt],
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        let iter = self.operand(iter, out)?;
        let mut lowered_body = Vec::new();
        let target = match target {
            ast::Expr::Name(n) => n.id.to_string(),
            other => {
                let tmp = self.fresh();
                self.assign_operand(other, Operand::Var(tmp.clone()), &mut lowered_body)?;
                tmp
            }
        };
        lowered_body.extend(self.nested_block(body));
        let orelse = self.nested_block(orelse);
        self.push(
            out,
            StmtKind::For {
                target,
                iter,
                body: lowered_body,
                orelse,
            },
        );
        Ok(())
    }

    fn with(
        &mut self,
        items: &[ast::WithItem],
        body: &[ast::Stmt],
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        for item in items {
            match &item.optional_vars {
                Some(target) => self.assign_expr(target, &item.context_expr, out)?,
                None => {
                    let value = self.expr(&item.context_expr, out)?;
                    self.discard(value, out);
                }
            }
        }
        let body = self.nested_block(body);
        out.extend(body);
        Ok(())
    }

    fn try_stmt(
        &mut self,
        body: &[ast::Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[ast::Stmt],
        finalbody: &[ast::Stmt],
        out: &mut Vec<Stmt>,
    ) {
        let body = self.nested_block(body);
        let handlers = handlers
            .iter()
            .map(|h| {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                Handler {
                    name: h.name.as_ref().map(|n| n.to_string()),
                    body: self.nested_block(&h.body),
                }
            })
            .collect();
        let orelse = self.nested_block(orelse);
        let finalbody = self.nested_block(finalbody);
        self.push(
            out,
            StmtKind::Try {
                body,
                handlers,
                orelse,
                finalbody,
            },
        );
    }

    fn aug_assign(&mut self, a: &ast::StmtAugAssign, out: &mut Vec<Stmt>) -> Lowered<()> {
        let op = binop_symbol(a.op);
        match &*a.target {
            ast::Expr::Name(n) => {
                let right = self.operand(&a.value, out)?;
                let name = n.id.to_string();
                self.push(
                    out,
                    StmtKind::Assign {
                        target: name.clone(),
                        value: CExpr::Binary {
                            op,
                            left: Operand::Var(name),
                            right,
                        },
                    },
                );
            }
            target @ (ast::Expr::Attribute(_) | ast::Expr::Subscript(_)) => {
                let current = self.operand(target, out)?;
                let right = self.operand(&a.value, out)?;
                let tmp = self.fresh();
                self.push(
                    out,
                    StmtKind::Assign {
                        target: tmp.clone(),
                        value: CExpr::Binary {
                            op,
                            left: current,
                            right,
                        },
                    },
                );
                let (root, path) = self.store_path(target, out)?;
                self.push(
                    out,
                    StmtKind::Update {
                        root,
                        path,
                        value: Operand::Var(tmp),
                    },
                );
            }
            _ => return Err(Unsupported("augmented assignment target".into())),
        }
        Ok(())
    }

    fn assign_expr(
        &mut self,
        target: &ast::Expr,
        value: &ast::Expr,
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        match target {
            ast::Expr::Name(n) => {
                let value = self.expr(value, out)?;
                self.push(
                    out,
                    StmtKind::Assign {
                        target: n.id.to_string(),
                        value,
                    },
                );
                Ok(())
            }
            ast::Expr::Tuple(_) | ast::Expr::List(_) => {
                let targets = sequence_elts(target).unwrap_or_default();
                let values = sequence_elts(value);
                match values {
                    Some(values)
                        if values.len() == targets.len()
                            && !targets.iter().chain(values).any(is_starred) =>
                    {
                        self.parallel_assign(targets, values, out)
                    }
                    _ => {
                        let value = self.operand(value, out)?;
                        self.destructure(targets, value, out)
                    }
                }
            }
            _ => {
                let value = self.operand(value, out)?;
                self.assign_operand(target, value, out)
            }
        }
    }

    /// `a, b = x, y` assigns elementwise; values that read a name bound by
    /// the same statement are copied first so swaps keep their meaning.
    fn parallel_assign(
        &mut self,
        targets: &[ast::Expr],
        values: &[ast::Expr],
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        let mut bound = Vec::new();
        for t in targets {
            collect_bound_names(t, &mut bound);
        }
        let mut operands = Vec::with_capacity(values.len());
        for v in values {
            let op = self.operand(v, out)?;
            let op = match op {
                Operand::Var(name) if bound.contains(&name) => {
                    let tmp = self.fresh();
                    self.push(
                        out,
                        StmtKind::Assign {
                            target: tmp.clone(),
                            value: CExpr::Use(Operand::Var(name)),
                        },
                    );
                    Operand::Var(tmp)
                }
                other => other,
            };
            operands.push(op);
        }
        for (t, op) in targets.iter().zip(operands) {
            self.assign_operand(t, op, out)?;
        }
        Ok(())
    }

    fn assign_operand(
        &mut self,
        target: &ast::Expr,
        value: Operand,
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        match target {
            ast::Expr::Name(n) => {
                self.push(
                    out,
                    StmtKind::Assign {
                        target: n.id.to_string(),
                        value: CExpr::Use(value),
                    },
                );
                Ok(())
            }
            ast::Expr::Tuple(_) | ast::Expr::List(_) => {
                let targets = sequence_elts(target).unwrap_or_default();
                self.destructure(targets, value, out)
            }
            ast::Expr::Attribute(_) | ast::Expr::Subscript(_) => {
                let (root, path) = self.store_path(target, out)?;
                self.push(out, StmtKind::Update { root, path, value });
                Ok(())
            }
            ast::Expr::Starred(_) => Err(Unsupported("starred assignment target".into())),
            _ => Err(Unsupported("assignment target".into())),
        }
    }

    fn destructure(
        &mut self,
        targets: &[ast::Expr],
        value: Operand,
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        let base = self.name_of_operand(value, out);
        let count = targets.len();
        let star = targets.iter().position(is_starred);
        for (i, target) in targets.iter().enumerate() {
            let (index, target) = match target {
                ast::Expr::Starred(s) => {
                    let after = count - i - 1;
                    let upper = (after > 0).then(|| int_const(-(after as i64)));
                    let index = IndexExpr::Slice {
                        lower: (i > 0).then(|| int_const(i as i64)),
                        upper,
                        step: None,
                    };
                    (index, &*s.value)
                }
                other => match star {
                    Some(pos) if i > pos => {
                        (IndexExpr::Single(int_const(i as i64 - count as i64)), other)
                    }
                    _ => (IndexExpr::Single(int_const(i as i64)), other),
                },
            };
            let load = CExpr::Index {
                base: base.clone(),
                index,
            };
            match target {
                ast::Expr::Name(n) => self.push(
                    out,
                    StmtKind::Assign {
                        target: n.id.to_string(),
                        value: load,
                    },
                ),
                other => {
                    let tmp = self.fresh();
                    self.push(
                        out,
                        StmtKind::Assign {
                            target: tmp.clone(),
                            value: load,
                        },
                    );
                    self.assign_operand(other, Operand::Var(tmp), out)?;
                }
            }
        }
        Ok(())
    }

    /// Root name and access chain of a store target such as `df.loc[m, "a"]`.
    fn store_path(
        &mut self,
        target: &ast::Expr,
        out: &mut Vec<Stmt>,
    ) -> Lowered<(String, Vec<Access>)> {
        self.enter()?;
        let result = match target {
            ast::Expr::Name(n) => Ok((n.id.to_string(), Vec::new())),
            ast::Expr::Attribute(a) => {
                let (root, mut path) = self.store_path(&a.value, out)?;
                path.push(Access::Attr(a.attr.to_string()));
                Ok((root, path))
            }
            ast::Expr::Subscript(s) => {
                let (root, mut path) = self.store_path(&s.value, out)?;
                let index = self.index(&s.slice, out)?;
                path.push(Access::Index(index));
                Ok((root, path))
            }
            other => {
                let op = self.operand(other, out)?;
                Ok((self.name_of_operand(op, out), Vec::new()))
            }
        };
        self.depth -= 1;
        result
    }

    fn enter(&mut self) -> Lowered<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return Err(Unsupported("expression nesting too deep".into()));
        }
        Ok(())
    }

    fn operand(&mut self, e: &ast::Expr, out: &mut Vec<Stmt>) -> Lowered<Operand> {
        match self.expr(e, out)? {
            CExpr::Use(op) => Ok(op),
            other => {
                let tmp = self.fresh();
                let line = self.line_of(e);
                self.push_at(
                    out,
                    line,
                    StmtKind::Assign {
                        target: tmp.clone(),
                        value: other,
                    },
                );
                Ok(Operand::Var(tmp))
            }
        }
    }

    fn name_of(&mut self, e: &ast::Expr, out: &mut Vec<Stmt>) -> Lowered<String> {
        let op = self.operand(e, out)?;
        Ok(self.name_of_operand(op, out))
    }

    fn name_of_operand(&mut self, op: Operand, out: &mut Vec<Stmt>) -> String {
        match op {
            Operand::Var(v) => v,
            Operand::Const(c) => {
                let tmp = self.fresh();
                self.push(
                    out,
                    StmtKind::Assign {
                        target: tmp.clone(),
                        value: CExpr::Use(Operand::Const(c)),
                    },
                );
                tmp
            }
        }
    }

    fn operands(&mut self, es: &[ast::Expr], out: &mut Vec<Stmt>) -> Lowered<Vec<Operand>> {
        es.iter().map(|e| self.operand(unstar(e), out)).collect()
    }

    fn expr(&mut self, e: &ast::Expr, out: &mut Vec<Stmt>) -> Lowered<CExpr> {
        self.enter()?;
        let result = self.expr_inner(e, out);
        self.depth -= 1;
        result
    }

    fn expr_inner(&mut self, e: &ast::Expr, out: &mut Vec<Stmt>) -> Lowered<CExpr> {
        use ast::Expr as E;
        Ok(match e {
            E::Name(n) => CExpr::Use(Operand::Var(n.id.to_string())),
            E::Constant(c) => CExpr::Use(Operand::Const(literal(&c.value))),
            E::Call(c) => self.call(c, out)?,
            E::Attribute(a) => CExpr::Attr {
                base: self.name_of(&a.value, out)?,
                attr: a.attr.to_string(),
            },
            E::Subscript(s) => {
                let base = self.name_of(&s.value, out)?;
                let index = self.index(&s.slice, out)?;
                CExpr::Index { base, index }
            }
            E::BinOp(b) => CExpr::Binary {
                left: self.operand(&b.left, out)?,
                op: binop_symbol(b.op),
                right: self.operand(&b.right, out)?,
            },
            E::UnaryOp(u) => {
                let operand = self.operand(&u.operand, out)?;
                match (u.op, operand) {
                    (ast::UnaryOp::USub, Operand::Const(Literal::Int(text))) => {
                        let negated = match text.strip_prefix('-') {
                            Some(rest) => rest.to_string(),
                            None => format!("-{text}"),
                        };
                        CExpr::Use(Operand::Const(Literal::Int(negated)))
                    }
                    (ast::UnaryOp::USub, Operand::Const(Literal::Float(x))) => {
                        CExpr::Use(Operand::Const(Literal::Float(-x)))
                    }
                    (op, operand) => CExpr::Unary {
                        op: unary_symbol(op),
                        operand,
                    },
                }
            }
            E::BoolOp(b) => CExpr::BoolOp {
                op: match b.op {
                    ast::BoolOp::And => "and",
                    ast::BoolOp::Or => "or",
                },
                values: self.operands(&b.values, out)?,
            },
            E::Compare(c) => CExpr::Compare {
                left: self.operand(&c.left, out)?,
                ops: c.ops.iter().map(|op| cmp_symbol(*op)).collect(),
                rights: self.operands(&c.comparators, out)?,
            },
            E::IfExp(i) => {
                let test = self.operand(&i.test, out)?;
                let tmp = self.fresh();
                let line = self.line_of(e);
                let mut body = Vec::new();
                let value = self.expr(&i.body, &mut body)?;
                self.push_at(
                    &mut body,
                    line,
                    StmtKind::Assign {
                        target: tmp.clone(),
                        value,
                    },
                );
                let mut orelse = Vec::new();
                let value = self.expr(&i.orelse, &mut orelse)?;
                self.push_at(
                    &mut orelse,
                    line,
                    StmtKind::Assign {
                        target: tmp.clone(),
                        value,
                    },
                );
                self.push_at(out, line, StmtKind::If { test, body, orelse });
                CExpr::Use(Operand::Var(tmp))
            }
            E::Lambda(_) => CExpr::Use(Operand::Const(Literal::Opaque)),
            E::NamedExpr(_) => return Err(Unsupported("assignment expression".into())),
            E::Dict(d) => {
                let mut entries = Vec::with_capacity(d.values.len());
                for (k, v) in d.keys.iter().zip(&d.values) {
                    let key = match k {
                        Some(k) => Some(self.operand(k, out)?),
                        None => None,
                    };
                    entries.push((key, self.operand(v, out)?));
                }
                CExpr::Dict(entries)
            }
            E::Set(s) => CExpr::Container {
                kind: ContainerKind::Set,
                elems: self.operands(&s.elts, out)?,
            },
            E::List(l) => CExpr::Container {
                kind: ContainerKind::List,
                elems: self.operands(&l.elts, out)?,
            },
            E::Tuple(t) => CExpr::Container {
                kind: ContainerKind::Tuple,
                elems: self.operands(&t.elts, out)?,
            },
            E::ListComp(c) => {
                self.comprehension(e, &c.generators, Accumulate::List(&c.elt), out)?
            }
            E::SetComp(c) => self.comprehension(e, &c.generators, Accumulate::Set(&c.elt), out)?,
            E::GeneratorExp(c) => {
                self.comprehension(e, &c.generators, Accumulate::List(&c.elt), out)?
            }
            E::DictComp(c) => {
                self.comprehension(e, &c.generators, Accumulate::Dict(&c.key, &c.value), out)?
            }
            E::Await(a) => self.expr(&a.value, out)?,
            E::Yield(y) => {
                if let Some(v) = &y.value {
                    self.operand(v, out)?;
                }
                CExpr::Use(Operand::Const(Literal::Opaque))
            }
            E::YieldFrom(y) => {
                self.operand(&y.value, out)?;
                CExpr::Use(Operand::Const(Literal::Opaque))
            }
            E::JoinedStr(j) => self.joined_str(j, out)?,
            E::FormattedValue(f) => self.expr(&f.value, out)?,
            E::Starred(s) => self.expr(&s.value, out)?,
            E::Slice(_) => CExpr::Use(Operand::Const(Literal::Opaque)),
        })
    }

    fn joined_str(&mut self, j: &ast::ExprJoinedStr, out: &mut Vec<Stmt>) -> Lowered<CExpr> {
        let mut text = String::new();
        let mut vars = Vec::new();
        for part in &j.values {
            match part {
                ast::Expr::Constant(c) => {
                    if let ast::Constant::Str(s) = &c.value {
                        text.push_str(s);
                    }
                }
                ast::Expr::FormattedValue(f) => {
                    if let op @ Operand::Var(_) = self.operand(&f.value, out)? {
                        vars.push(op);
                    }
                }
                other => {
                    if let op @ Operand::Var(_) = self.operand(other, out)? {
                        vars.push(op);
                    }
                }
            }
        }
        Ok(if vars.is_empty() {
            CExpr::Use(Operand::Const(Literal::Str(text)))
        } else {
            CExpr::Format(vars)
        })
    }

    fn call(&mut self, c: &ast::ExprCall, out: &mut Vec<Stmt>) -> Lowered<CExpr> {
        enum Target {
            Method(String, String),
            Func(String),
        }
        let target = match &*c.func {
            ast::Expr::Attribute(a) => {
                Target::Method(self.name_of(&a.value, out)?, a.attr.to_string())
            }
            ast::Expr::Name(n) => Target::Func(n.id.to_string()),
            other => Target::Func(self.name_of(other, out)?),
        };
        let mut args = Vec::with_capacity(c.args.len());
        for a in &c.args {
            let (value, starred) = match a {
                ast::Expr::Starred(s) => (&*s.value, true),
                other => (other, false),
            };
            args.push(Arg {
                value: self.operand(value, out)?,
                starred,
            });
        }
        let mut kwargs = Vec::with_capacity(c.keywords.len());
        for k in &c.keywords {
            kwargs.push(Kwarg {
                name: k.arg.as_ref().map(|a| a.to_string()),
                value: self.operand(&k.value, out)?,
            });
        }
        Ok(match target {
            Target::Method(receiver, method) => CExpr::MethodCall {
                receiver,
                method,
                args,
                kwargs,
            },
            Target::Func(func) => CExpr::Call { func, args, kwargs },
        })
    }

    fn index(&mut self, slice: &ast::Expr, out: &mut Vec<Stmt>) -> Lowered<IndexExpr> {
        match slice {
            ast::Expr::Slice(s) => self.slice(s, out),
            ast::Expr::Tuple(t) => {
                let mut items = Vec::with_capacity(t.elts.len());
                for e in &t.elts {
                    items.push(match e {
                        ast::Expr::Slice(s) => self.slice(s, out)?,
                        other => IndexExpr::Single(self.operand(unstar(other), out)?),
                    });
                }
                Ok(IndexExpr::Tuple(items))
            }
            other => Ok(IndexExpr::Single(self.operand(other, out)?)),
        }
    }

    fn slice(&mut self, s: &ast::ExprSlice, out: &mut Vec<Stmt>) -> Lowered<IndexExpr> {
        let mut bound = |e: &Option<Box<ast::Expr>>, this: &mut Self| -> Lowered<Option<Operand>> {
            match e {
                Some(e) => Ok(Some(this.operand(e, out)?)),
                None => Ok(None),
            }
        };
        let lower = bound(&s.lower, self)?;
        let upper = bound(&s.upper, self)?;
        let step = bound(&s.step, self)?;
        Ok(IndexExpr::Slice { lower, upper, step })
    }

    fn comprehension(
        &mut self,
        whole: &ast::Expr,
        generators: &[ast::Comprehension],
        acc_kind: Accumulate<'_>,
        out: &mut Vec<Stmt>,
    ) -> Lowered<CExpr> {
        let line = self.line_of(whole);
        let acc = self.fresh();
        let init = match acc_kind {
            Accumulate::List(_) => CExpr::Container {
                kind: ContainerKind::List,
                elems: Vec::new(),
            },
            Accumulate::Set(_) => CExpr::Call {
                func: "set".into(),
                args: Vec::new(),
                kwargs: Vec::new(),
            },
            Accumulate::Dict(..) => CExpr::Dict(Vec::new()),
        };
        self.push_at(
            out,
            line,
            StmtKind::Assign {
                target: acc.clone(),
                value: init,
            },
        );
        let mut levels = Vec::new();
        for g in generators {
            levels.push(CompLevel::For(g));
            levels.extend(g.ifs.iter().map(CompLevel::If));
        }
        self.comp_levels(&levels, &acc, &acc_kind, line, out)?;
        Ok(CExpr::Use(Operand::Var(acc)))
    }

    fn comp_levels(
        &mut self,
        levels: &[CompLevel<'_>],
        acc: &str,
        acc_kind: &Accumulate<'_>,
        line: u32,
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        let Some((level, rest)) = levels.split_first() else {
            return self.comp_leaf(acc, acc_kind, line, out);
        };
        match level {
            CompLevel::For(g) => {
                let iter = self.operand(&g.iter, out)?;
                let mut body = Vec::new();
                let target = match &g.target {
                    ast::Expr::Name(n) => n.id.to_string(),
                    other => {
                        let tmp = self.fresh();
                        self.assign_operand(other, Operand::Var(tmp.clone()), &mut body)?;
                        tmp
                    }
                };
                self.comp_levels(rest, acc, acc_kind, line, &mut body)?;
                self.push_at(
                    out,
                    line,
                    StmtKind::For {
                        target,
                        iter,
                        body,
                        orelse: Vec::new(),
                    },
                );
            }
            CompLevel::If(cond) => {
                let test = self.operand(cond, out)?;
                let mut body = Vec::new();
                self.comp_levels(rest, acc, acc_kind, line, &mut body)?;
                self.push_at(
                    out,
                    line,
                    StmtKind::If {
                        test,
                        body,
                        orelse: Vec::new(),
                    },
                );
            }
        }
        Ok(())
    }

    fn comp_leaf(
        &mut self,
        acc: &str,
        acc_kind: &Accumulate<'_>,
        line: u32,
        out: &mut Vec<Stmt>,
    ) -> Lowered<()> {
        let (method, elt) = match acc_kind {
            Accumulate::List(elt) => ("append", *elt),
            Accumulate::Set(elt) => ("add", *elt),
            Accumulate::Dict(key, value) => {
                let key = self.operand(key, out)?;
                let value = self.operand(value, out)?;
                self.push_at(
                    out,
                    line,
                    StmtKind::Update {
                        root: acc.to_string(),
                        path: vec![Access::Index(IndexExpr::Single(key))],
                        value,
                    },
                );
                return Ok(());
            }
        };
        let value = self.operand(elt, out)?;
        self.push_at(
            out,
            line,
            StmtKind::Expr(CExpr::MethodCall {
                receiver: acc.to_string(),
                method: method.into(),
                args: vec![Arg {
                    value,
                    starred: false,
                }],
                kwargs: Vec::new(),
            }),
        );
        Ok(())
    }
}

enum Accumulate<'e> {
    List(&'e ast::Expr),
    Set(&'e ast::Expr),
    Dict(&'e ast::Expr, &'e ast::Expr),
}

fn lower_params(args: &ast::Arguments) -> Vec<Param> {
    let mut params = Vec::new();
    for a in args.posonlyargs.iter().chain(&args.args) {
        params.push(Param {
            name: a.def.arg.to_string(),
            kind: ParamKind::Positional,
        });
    }
    if let Some(v) = &args.vararg {
        params.push(Param {
            name: v.arg.to_string(),
            kind: ParamKind::VarArgs,
        });
    }
    for a in &args.kwonlyargs {
        params.push(Param {
            name: a.def.arg.to_string(),
            kind: ParamKind::KeywordOnly,
        });
    }
    if let Some(k) = &args.kwarg {
        params.push(Param {
            name: k.arg.to_string(),
            kind: ParamKind::KwArgs,
        });
    }
    params
}

fn sequence_elts(e: &ast::Expr) -> Option<&[ast::Expr]> {
    match e {
        ast::Expr::Tuple(t) => Some(&t.elts),
        ast::Expr::List(l) => Some(&l.elts),
        _ => None,
    }
}

fn is_starred(e: &ast::Expr) -> bool {
    matches!(e, ast::Expr::Starred(_))
}

fn unstar(e: &ast::Expr) -> &ast::Expr {
    match e {
        ast::Expr::Starred(s) => &s.value,
        other => other,
    }
}

fn collect_bound_names(target: &ast::Expr, names: &mut Vec<String>) {
    match target {
        ast::Expr::Name(n) => names.push(n.id.to_string()),
        ast::Expr::Tuple(t) => t.elts.iter().for_each(|e| collect_bound_names(e, names)),
        ast::Expr::List(l) => l.elts.iter().for_each(|e| collect_bound_names(e, names)),
        ast::Expr::Starred(s) => collect_bound_names(&s.value, names),
        // Stores through a name read it as well.
        ast::Expr::Attribute(a) => collect_bound_names(&a.value, names),
        ast::Expr::Subscript(s) => collect_bound_names(&s.value, names),
        _ => {}
    }
}

fn int_const(i: i64) -> Operand {
    Operand::Const(Literal::Int(i.to_string()))
}

fn literal(c: &ast::Constant) -> Literal {
    match c {
        ast::Constant::None => Literal::None,
        ast::Constant::Bool(b) => Literal::Bool(*b),
        ast::Constant::Str(s) => Literal::Str(s.clone()),
        ast::Constant::Bytes(b) => Literal::Bytes(b.clone()),
        ast::Constant::Int(i) => Literal::Int(i.to_string()),
        ast::Constant::Float(f) => Literal::Float(*f),
        ast::Constant::Complex { .. } | ast::Constant::Ellipsis | ast::Constant::Tuple(_) => {
            Literal::Opaque
        }
    }
}

fn binop_symbol(op: ast::Operator) -> &'static str {
    use ast::Operator as O;
    match op {
        O::Add => "+",
        O::Sub => "-",
        O::Mult => "*",
        O::MatMult => "@",
        O::Div => "/",
        O::Mod => "%",
        O::Pow => "**",
        O::LShift => "<<",
        O::RShift => ">>",
        O::BitOr => "|",
        O::BitXor => "^",
        O::BitAnd => "&",
        O::FloorDiv => "//",
    }
}

fn unary_symbol(op: ast::UnaryOp) -> &'static str {
    match op {
        ast::UnaryOp::Invert => "~",
        ast::UnaryOp::Not => "not",
        ast::UnaryOp::UAdd => "+",
        ast::UnaryOp::USub => "-",
    }
}

fn cmp_symbol(op: ast::CmpOp) -> &'static str {
    use ast::CmpOp as C;
    match op {
        C::Eq => "==",
        C::NotEq => "!=",
        C::Lt => "<",
        C::LtE => "<=",
        C::Gt => ">",
        C::GtE => ">=",
        C::Is => "is",
        C::IsNot => "is not",
        C::In => "in",
        C::NotIn => "not in",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse::parse_str;

    fn lower(src: &str) -> CoreModule {
        desugar(&parse_str(src).unwrap())
    }

    fn printed(src: &str) -> String {
        lower(src).to_source()
    }

    #[test]
    fn chained_call_gets_temporary() {
        assert_eq!(
            printed("X_selected = SelectKBest(k=25).fit_transform(X, y)"),
            "_t1 = SelectKBest(k=25)\nX_selected = _t1.fit_transform(X, y)\n"
        );
    }

    #[test]
    fn tuple_unpacking_from_call() {
        assert_eq!(printed("a, b = f()"), "_t1 = f()\na = _t1[0]\nb = _t1[1]\n");
    }

    #[test]
    fn augmented_assignment() {
        assert_eq!(printed("x += 1"), "x = x + 1\n");
        assert_eq!(
            printed("d['k'] += v"),
            "_t1 = d[\"k\"]\n_t2 = _t1 + v\nd[\"k\"] = _t2\n"
        );
    }

    #[test]
    fn parallel_assignment_and_swap() {
        assert_eq!(printed("a, b = 1, 2"), "a = 1\nb = 2\n");
        assert_eq!(
            printed("a, b = b, a"),
            "_t1 = b\n_t2 = a\na = _t1\nb = _t2\n"
        );
    }

    #[test]
    fn starred_unpacking() {
        assert_eq!(
            printed("a, *rest, z = xs"),
            "a = xs[0]\nrest = xs[1:-1]\nz = xs[-1]\n"
        );
    }

    #[test]
    fn with_body_is_inlined() {
        assert_eq!(
            printed("with open(p) as fh:\n    data = fh.read()\n"),
            "fh = open(p)\ndata = fh.read()\n"
        );
    }

    #[test]
    fn comprehension_becomes_loop() {
        assert_eq!(
            printed("ys = [f(x) for x in xs if x]"),
            "_t1 = []\nfor x in xs:\n    if x:\n        _t2 = f(x)\n        _t1.append(_t2)\nys = _t1\n"
        );
    }

    #[test]
    fn conditional_expression_becomes_branch() {
        assert_eq!(
            printed("best = lr if a > b else ridge"),
            "_t1 = a > b\nif _t1:\n    _t2 = lr\nelse:\n    _t2 = ridge\nbest = _t2\n"
        );
    }

    #[test]
    fn imports_bind_expected_names() {
        assert_eq!(
            printed("import numpy as np\nimport os.path\nfrom sklearn.svm import SVC as S\n"),
            "import numpy as np\nimport os\nfrom sklearn.svm import SVC as S\n"
        );
    }

    #[test]
    fn walrus_degrades_one_statement() {
        let m = lower("a = 1\nb = (c := 2)\nd = 3\n");
        assert_eq!(m.to_source(), "a = 1\nd = 3\n");
        assert_eq!(m.diagnostics.len(), 1);
        assert_eq!(m.diagnostics[0].line, 2);
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(printed("x = X[-1:]"), "x = X[-1:]\n");
        let m = lower("x = X[-1:]");
        let StmtKind::Assign {
            value: CExpr::Index { index, .. },
            ..
        } = &m.body[0].kind
        else {
            panic!()
        };
        assert_eq!(
            index,
            &IndexExpr::Slice {
                lower: Some(Operand::Const(Literal::Int("-1".into()))),
                upper: None,
                step: None
            }
        );
    }

    #[test]
    fn mask_subscript_and_store() {
        assert_eq!(
            printed("df2 = df[df.age > 3]\ndf.loc[m, 'a'] = 0\n"),
            "_t1 = df.age\n_t2 = _t1 > 3\ndf2 = df[_t2]\ndf.loc[m, \"a\"] = 0\n"
        );
    }

    #[test]
    fn deep_nesting_is_unsupported_not_a_crash() {
        let src = format!("x = {}1{}\n", "(".repeat(150), ")".repeat(150));
        if let Ok(ast) = parse_str(&src) {
            let _ = desugar(&ast);
        }
        let src = format!("x = {}\n", "-".repeat(400) + "1");
        if let Ok(ast) = parse_str(&src) {
            let m = desugar(&ast);
            assert!(m.body.is_empty() || m.diagnostics.is_empty());
        }
    }
}
