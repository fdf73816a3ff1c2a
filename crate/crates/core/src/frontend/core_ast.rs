//! Three-address core language produced by desugaring.
//!
//! Every call sits alone in its statement, every operand is a name or a
//! constant, and the only compound statements are `if`, loops, `try` and
//! function definitions. [`CoreModule::to_source`] prints the module back
//! as valid source so lowering can be checked for idempotence.

use std::fmt::{self, Write};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoreModule {
    pub body: Vec<Stmt>,
    pub diagnostics: Vec<super::Diagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    /// Unique per module; used as the call-site label for inlining contexts.
    pub id: u32,
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign {
        target: String,
        value: CExpr,
    },
    /// Expression evaluated for effect; always a call after lowering.
    Expr(CExpr),
    /// Store through attribute/subscript chain rooted at a name.
    Update {
        root: String,
        path: Vec<Access>,
        value: Operand,
    },
    Import {
        target: String,
        module: String,
    },
    If {
        test: Operand,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: String,
        iter: Operand,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    While {
        test: Operand,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    Try {
        body: Vec<Stmt>,
        handlers: Vec<Handler>,
        orelse: Vec<Stmt>,
        finalbody: Vec<Stmt>,
    },
    FuncDef {
        name: String,
        params: Vec<Param>,
        body: Vec<Stmt>,
    },
    Return(Option<Operand>),
    Global(Vec<String>),
    Break,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handler {
    pub name: Option<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Positional,
    VarArgs,
    KeywordOnly,
    KwArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Access {
    Attr(String),
    Index(IndexExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(String),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    Bool(bool),
    None,
    /// Anything the analysis does not look into (lambdas, class bodies,
    /// ellipsis, complex numbers).
    Opaque,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Var(String),
    Const(Literal),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexExpr {
    Single(Operand),
    Slice {
        lower: Option<Operand>,
        upper: Option<Operand>,
        step: Option<Operand>,
    },
    Tuple(Vec<IndexExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub value: Operand,
    pub starred: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kwarg {
    /// `None` for `**mapping` splats.
    pub name: Option<String>,
    pub value: Operand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    List,
    Tuple,
    Set,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Use(Operand),
    Call {
        func: String,
        args: Vec<Arg>,
        kwargs: Vec<Kwarg>,
    },
    MethodCall {
        receiver: String,
        method: String,
        args: Vec<Arg>,
        kwargs: Vec<Kwarg>,
    },
    Attr {
        base: String,
        attr: String,
    },
    Index {
        base: String,
        index: IndexExpr,
    },
    Binary {
        op: &'static str,
        left: Operand,
        right: Operand,
    },
    Unary {
        op: &'static str,
        operand: Operand,
    },
    Compare {
        left: Operand,
        ops: Vec<&'static str>,
        rights: Vec<Operand>,
    },
    BoolOp {
        op: &'static str,
        values: Vec<Operand>,
    },
    Format(Vec<Operand>),
    Container {
        kind: ContainerKind,
        elems: Vec<Operand>,
    },
    Dict(Vec<(Option<Operand>, Operand)>),
}

impl Operand {
    pub fn var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            Operand::Const(_) => None,
        }
    }
}

impl CoreModule {
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        print_block(&mut out, &self.body, 0);
        out
    }

    /// Copy with ids and lines cleared, for structural comparison.
    pub fn without_positions(&self) -> CoreModule {
        CoreModule {
            body: strip_block(&self.body),
            diagnostics: Vec::new(),
        }
    }

    pub fn statement_count(&self) -> usize {
        fn count(block: &[Stmt]) -> usize {
            block
                .iter()
                .map(|s| 1 + s.children().map(count).sum::<usize>())
                .sum()
        }
        count(&self.body)
    }
}

impl Stmt {
    /// Nested statement blocks, in source order.
    pub fn children(&self) -> impl Iterator<Item = &[Stmt]> {
        let blocks: Vec<&[Stmt]> = match &self.kind {
            StmtKind::If { body, orelse, .. }
            | StmtKind::For { body, orelse, .. }
            | StmtKind::While { body, orelse, .. } => vec![body, orelse],
            StmtKind::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                let mut v: Vec<&[Stmt]> = vec![body];
                v.extend(handlers.iter().map(|h| h.body.as_slice()));
                v.push(orelse);
                v.push(finalbody);
                v
            }
            StmtKind::FuncDef { body, .. } => vec![body],
            _ => Vec::new(),
        };
        blocks.into_iter()
    }
}

fn strip_block(block: &[Stmt]) -> Vec<Stmt> {
    block
        .iter()
        .map(|s| {
            let kind = match &s.kind {
                StmtKind::If { test, body, orelse } => StmtKind::If {
                    test: test.clone(),
                    body: strip_block(body),
                    orelse: strip_block(orelse),
                },
                StmtKind::For {
                    target,
                    iter,
                    body,
                    orelse,
                } => StmtKind::For {
                    target: target.clone(),
                    iter: iter.clone(),
                    body: strip_block(body),
                    orelse: strip_block(orelse),
                },
                StmtKind::While { test, body, orelse } => StmtKind::While {
                    test: test.clone(),
                    body: strip_block(body),
                    orelse: strip_block(orelse),
                },
                StmtKind::Try {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                } => StmtKind::Try {
                    body: strip_block(body),
                    handlers: handlers
                        .iter()
                        .map(|h| Handler {
                            name: h.name.clone(),
                            body: strip_block(&h.body),
                        })
                        .collect(),
                    orelse: strip_block(orelse),
                    finalbody: strip_block(finalbody),
                },
                StmtKind::FuncDef { name, params, body } => StmtKind::FuncDef {
                    name: name.clone(),
                    params: params.clone(),
                    body: strip_block(body),
                },
                other => other.clone(),
            };
            Stmt {
                id: 0,
                line: 0,
                kind,
            }
        })
        .collect()
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_block(out: &mut String, block: &[Stmt], depth: usize) {
    if block.is_empty() {
        indent(out, depth);
        out.push_str("pass\n");
        return;
    }
    for stmt in block {
        print_stmt(out, stmt, depth);
    }
}

fn print_else(out: &mut String, keyword: &str, block: &[Stmt], depth: usize) {
    if !block.is_empty() {
        indent(out, depth);
        out.push_str(keyword);
        out.push_str(":\n");
        print_block(out, block, depth + 1);
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match &stmt.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{target} = {value}");
        }
        StmtKind::Expr(value) => {
            let _ = writeln!(out, "{value}");
        }
        StmtKind::Update { root, path, value } => {
            out.push_str(root);
            for access in path {
                match access {
                    Access::Attr(a) => {
                        let _ = write!(out, ".{a}");
                    }
                    Access::Index(i) => {
                        let _ = write!(out, "[{i}]");
                    }
                }
            }
            let _ = writeln!(out, " = {value}");
        }
        StmtKind::Import { target, module } => {
            match module.rsplit_once('.') {
                Some((parent, leaf)) => {
                    let _ = write!(out, "from {parent} import {leaf}");
                    if leaf != target {
                        let _ = write!(out, " as {target}");
                    }
                }
                None => {
                    let _ = write!(out, "import {module}");
                    if module != target {
                        let _ = write!(out, " as {target}");
                    }
                }
            }
            out.push('\n');
        }
        StmtKind::If { test, body, orelse } => {
            let _ = writeln!(out, "if {test}:");
            print_block(out, body, depth + 1);
            print_else(out, "else", orelse, depth);
        }
        StmtKind::For {
            target,
            iter,
            body,
            orelse,
        } => {
            let _ = writeln!(out, "for {target} in {iter}:");
            print_block(out, body, depth + 1);
            print_else(out, "else", orelse, depth);
        }
        StmtKind::While { test, body, orelse } => {
            let _ = writeln!(out, "while {test}:");
            print_block(out, body, depth + 1);
            print_else(out, "else", orelse, depth);
        }
        StmtKind::Try {
            body,
            handlers,
            orelse,
            finalbody,
        } => {
            out.push_str("try:\n");
            print_block(out, body, depth + 1);
            for h in handlers {
                indent(out, depth);
                match &h.name {
                    Some(n) => {
                        let _ = writeln!(out, "except BaseException as {n}:");
                    }
                    None => out.push_str("except:\n"),
                }
                print_block(out, &h.body, depth + 1);
            }
            print_else(out, "else", orelse, depth);
            if !finalbody.is_empty() || handlers.is_empty() {
                indent(out, depth);
                out.push_str("finally:\n");
                print_block(out, finalbody, depth + 1);
            }
        }
        StmtKind::FuncDef { name, params, body } => {
            let mut rendered = Vec::new();
            let mut star_seen = false;
            for p in params {
                match p.kind {
                    ParamKind::Positional => rendered.push(p.name.clone()),
                    ParamKind::VarArgs => {
                        star_seen = true;
                        rendered.push(format!("*{}", p.name));
                    }
                    ParamKind::KeywordOnly => {
                        if !star_seen {
                            star_seen = true;
                            rendered.push("*".into());
                        }
                        rendered.push(p.name.clone());
                    }
                    ParamKind::KwArgs => rendered.push(format!("**{}", p.name)),
                }
            }
            let _ = writeln!(out, "def {name}({}):", rendered.join(", "));
            print_block(out, body, depth + 1);
        }
        StmtKind::Return(value) => match value {
            Some(v) => {
                let _ = writeln!(out, "return {v}");
            }
            None => out.push_str("return\n"),
        },
        StmtKind::Global(names) => {
            let _ = writeln!(out, "global {}", names.join(", "));
        }
        StmtKind::Break => out.push_str("break\n"),
        StmtKind::Continue => out.push_str("continue\n"),
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(text) => f.write_str(text),
            Literal::Float(x) => {
                if x.is_finite() {
                    write!(f, "{x:?}")
                } else {
                    f.write_str("1e999")
                }
            }
            Literal::Str(s) => f.write_str(&quote_str(s)),
            Literal::Bytes(bytes) => {
                f.write_str("b\"")?;
                for &b in bytes {
                    match b {
                        b'"' => f.write_str("\\\"")?,
                        b'\\' => f.write_str("\\\\")?,
                        0x20..=0x7e => f.write_char(b as char)?,
                        _ => write!(f, "\\x{b:02x}")?,
                    }
                }
                f.write_char('"')
            }
            Literal::Bool(true) => f.write_str("True"),
            Literal::Bool(false) => f.write_str("False"),
            Literal::None => f.write_str("None"),
            Literal::Opaque => f.write_str("..."),
        }
    }
}

fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => f.write_str(v),
            Operand::Const(lit) => lit.fmt(f),
        }
    }
}

impl fmt::Display for IndexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexExpr::Single(op) => op.fmt(f),
            IndexExpr::Slice { lower, upper, step } => {
                if let Some(l) = lower {
                    l.fmt(f)?;
                }
                f.write_char(':')?;
                if let Some(u) = upper {
                    u.fmt(f)?;
                }
                if let Some(s) = step {
                    write!(f, ":{s}")?;
                }
                Ok(())
            }
            IndexExpr::Tuple(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    item.fmt(f)?;
                }
                if items.len() == 1 {
                    f.write_char(',')?;
                }
                Ok(())
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Arg], kwargs: &[Kwarg]) -> fmt::Result {
    let mut first = true;
    let mut sep = |f: &mut fmt::Formatter<'_>| {
        if !std::mem::take(&mut first) {
            f.write_str(", ")
        } else {
            Ok(())
        }
    };
    for a in args {
        sep(f)?;
        if a.starred {
            f.write_char('*')?;
        }
        fmt::Display::fmt(&a.value, f)?;
    }
    for k in kwargs {
        sep(f)?;
        match &k.name {
            Some(n) => write!(f, "{n}={}", k.value)?,
            None => write!(f, "**{}", k.value)?,
        }
    }
    Ok(())
}

impl fmt::Display for CExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CExpr::Use(op) => op.fmt(f),
            CExpr::Call { func, args, kwargs } => {
                write!(f, "{func}(")?;
                write_args(f, args, kwargs)?;
                f.write_char(')')
            }
            CExpr::MethodCall {
                receiver,
                method,
                args,
                kwargs,
            } => {
                write!(f, "{receiver}.{method}(")?;
                write_args(f, args, kwargs)?;
                f.write_char(')')
            }
            CExpr::Attr { base, attr } => write!(f, "{base}.{attr}"),
            CExpr::Index { base, index } => write!(f, "{base}[{index}]"),
            CExpr::Binary { op, left, right } => write!(f, "{left} {op} {right}"),
            CExpr::Unary { op, operand } => {
                if op.chars().all(char::is_alphabetic) {
                    write!(f, "{op} {operand}")
                } else {
                    write!(f, "{op}{operand}")
                }
            }
            CExpr::Compare { left, ops, rights } => {
                left.fmt(f)?;
                for (op, r) in ops.iter().zip(rights) {
                    write!(f, " {op} {r}")?;
                }
                Ok(())
            }
            CExpr::BoolOp { op, values } => {
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, " {op} ")?;
                    }
                    v.fmt(f)?;
                }
                Ok(())
            }
            CExpr::Format(values) => {
                f.write_str("f\"")?;
                for v in values {
                    write!(f, "{{{v}}}")?;
                }
                f.write_char('"')
            }
            CExpr::Container { kind, elems } => {
                let (open, close) = match kind {
                    ContainerKind::List => ("[", "]"),
                    ContainerKind::Tuple => ("(", ")"),
                    ContainerKind::Set if elems.is_empty() => return f.write_str("set()"),
                    ContainerKind::Set => ("{", "}"),
                };
                f.write_str(open)?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    e.fmt(f)?;
                }
                if *kind == ContainerKind::Tuple && elems.len() == 1 {
                    f.write_char(',')?;
                }
                f.write_str(close)
            }
            CExpr::Dict(entries) => {
                f.write_char('{')?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match k {
                        Some(k) => write!(f, "{k}: {v}")?,
                        None => write!(f, "**{v}")?,
                    }
                }
                f.write_char('}')
            }
        }
    }
}
