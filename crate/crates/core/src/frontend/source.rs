use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Script,
    Notebook,
}

/// Origin of one line of concatenated code: cell index in the document
/// (counting non-code cells) and 1-based line inside that cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellLine {
    pub cell: usize,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub kind: SourceKind,
    pub code: String,
    /// Indexed by concatenated line number minus one.
    pub line_map: Vec<CellLine>,
}

impl SourceUnit {
    pub fn script(path: impl Into<PathBuf>, code: impl Into<String>) -> Self {
        let code = code.into();
        let line_map = (1..=count_lines(&code))
            .map(|line| CellLine { cell: 0, line })
            .collect();
        SourceUnit {
            path: path.into(),
            kind: SourceKind::Script,
            code,
            line_map,
        }
    }

    pub fn notebook(path: impl Into<PathBuf>, json: &str) -> Result<Self, FrontendError> {
        let path = path.into();
        let format_err = |message: String| FrontendError::NotebookFormat {
            path: path.clone(),
            message,
        };
        let doc: NotebookDoc = serde_json::from_str(json).map_err(|e| format_err(e.to_string()))?;
        if doc.nbformat != 4 {
            return Err(format_err(format!("unsupported nbformat {}", doc.nbformat)));
        }
        let cells = doc
            .cells
            .ok_or_else(|| format_err("missing cells array".into()))?;

        let mut code_lines: Vec<String> = Vec::new();
        let mut line_map = Vec::new();
        for (index, cell) in cells.into_iter().enumerate() {
            if cell.cell_type != "code" {
                continue;
            }
            let text = cell.source.map(CellSource::into_text).unwrap_or_default();
            let text = text.strip_suffix('\n').unwrap_or(&text);
            for (offset, line) in text.split('\n').enumerate() {
                code_lines.push(blank_magic(line).to_string());
                line_map.push(CellLine {
                    cell: index,
                    line: offset as u32 + 1,
                });
            }
        }
        Ok(SourceUnit {
            path,
            kind: SourceKind::Notebook,
            code: code_lines.join("\n"),
            line_map,
        })
    }

    pub fn line_count(&self) -> u32 {
        self.line_map.len() as u32
    }

    /// Map a 1-based concatenated line back to its cell position.
    pub fn origin(&self, line: u32) -> Option<CellLine> {
        line.checked_sub(1)
            .and_then(|i| self.line_map.get(i as usize))
            .copied()
    }

    pub fn display_name(&self) -> String {
        self.path.display().to_string()
    }
}

pub fn load_source(path: &Path) -> Result<SourceUnit, FrontendError> {
    let bytes = fs::read(path).map_err(|source| FrontendError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let is_notebook = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("ipynb"));
    if is_notebook {
        SourceUnit::notebook(path, &text)
    } else {
        Ok(SourceUnit::script(path, text))
    }
}

fn count_lines(code: &str) -> u32 {
    if code.is_empty() {
        return 0;
    }
    let newlines = code.matches('\n').count() as u32;
    if code.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

fn blank_magic(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('%') || trimmed.starts_with('!') {
        ""
    } else {
        line
    }
}

#[derive(Deserialize)]
struct NotebookDoc {
    nbformat: u32,
    cells: Option<Vec<NotebookCell>>,
}

#[derive(Deserialize)]
struct NotebookCell {
    cell_type: String,
    source: Option<CellSource>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CellSource {
    Text(String),
    Lines(Vec<String>),
}

impl CellSource {
    fn into_text(self) -> String {
        match self {
            CellSource::Text(s) => s,
            CellSource::Lines(lines) => lines.concat(),
        }
    }
}
