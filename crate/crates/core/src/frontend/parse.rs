use rustpython_parser::ast::{self, Ranged};
use rustpython_parser::text_size::TextSize;
use rustpython_parser::Parse;

use super::source::{CellLine, SourceUnit};

/// Parsed module plus the offset→line table needed to report positions.
#[derive(Debug, Clone)]
pub struct Ast {
    pub body: Vec<ast::Stmt>,
    pub lines: LineIndex,
}

impl Ast {
    pub fn line_of(&self, node: &impl Ranged) -> u32 {
        self.lines.line_of(node.range().start())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub origin: Option<CellLine>,
}

#[derive(Debug, Clone, Default)]
pub struct LineIndex {
    starts: Vec<u32>,
}

impl LineIndex {
    pub fn new(code: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(
            code.bytes()
                .enumerate()
                .filter(|(_, b)| *b == b'\n')
                .map(|(i, _)| i as u32 + 1),
        );
        LineIndex { starts }
    }

    /// 1-based line containing the byte offset.
    pub fn line_of(&self, offset: TextSize) -> u32 {
        let offset = u32::from(offset);
        self.starts.partition_point(|&s| s <= offset) as u32
    }

    fn column_of(&self, offset: TextSize) -> u32 {
        let line = self.line_of(offset);
        u32::from(offset) - self.starts[line as usize - 1] + 1
    }
}

pub fn parse(unit: &SourceUnit) -> Result<Ast, SyntaxError> {
    let lines = LineIndex::new(&unit.code);
    let name = unit.display_name();
    match ast::Suite::parse(&unit.code, &name) {
        Ok(body) => Ok(Ast { body, lines }),
        Err(err) => {
            let line = lines.line_of(err.offset).max(1);
            Err(SyntaxError {
                line,
                column: lines.column_of(err.offset),
                message: err.error.to_string(),
                origin: unit.origin(line),
            })
        }
    }
}

/// Convenience for tests and tools: parse a bare script string.
pub fn parse_str(code: &str) -> Result<Ast, SyntaxError> {
    parse(&SourceUnit::script("<string>", code))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_assignment() {
        let ast = parse_str("x = 1").unwrap();
        assert_eq!(ast.body.len(), 1);
        let ast::Stmt::Assign(assign) = &ast.body[0] else {
            panic!("expected assignment")
        };
        assert!(matches!(&assign.targets[0], ast::Expr::Name(n) if n.id.as_str() == "x"));
        assert!(matches!(
            &*assign.value,
            ast::Expr::Constant(c) if matches!(c.value, ast::Constant::Int(_))
        ));
    }

    #[test]
    fn syntax_error_location() {
        let err = parse_str("def f(:").unwrap_err();
        assert_eq!(err.line, 1);
        let err = parse_str("a = 1\nb = (\n").unwrap_err();
        assert!(err.line >= 2, "{err:?}");
    }

    #[test]
    fn line_index() {
        let idx = LineIndex::new("a\nbc\n\nd");
        assert_eq!(idx.line_of(TextSize::from(0)), 1);
        assert_eq!(idx.line_of(TextSize::from(2)), 2);
        assert_eq!(idx.line_of(TextSize::from(5)), 3);
        assert_eq!(idx.line_of(TextSize::from(6)), 4);
    }
}
