//! Declarative API behavior models.
//!
//! A spec file is JSON:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "library_versions": {"scikit-learn": "1.3"},
//!   "specs": [
//!     {"pattern": "mylib.norm", "kind": "reduce_transform",
//!      "arg_roles": {"data": ["0"]}, "result": "scalar"}
//!   ]
//! }
//! ```
//!
//! Patterns are dotted names where `*` matches any run of characters
//! (dots included) and `{a,b}` lists alternatives. Function patterns are
//! fully qualified; method patterns are `<class>.<method>`, with `*` as
//! the class part meaning "any receiver satisfying `receiver`". Argument
//! references are `"receiver"`, `"*"` (all positionals), a position
//! (`"0"`), a keyword (`"X"`), or alternatives joined by `|` (`"0|X"`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::frontend::{CallFact, VarId};

pub const SCHEMA_VERSION: u32 = 1;
pub const BUILTIN: &str = "builtin";

const BUILTIN_JSON: &str = include_str!("builtin.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    Train,
    Eval,
    MapTransform,
    ReduceTransform,
    DuplicateTransform,
    FilterTransform,
    Split,
    DatasetSource,
    ModelSource,
    PipelineFit,
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverReq {
    Dataset,
    Object,
    #[default]
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultRole {
    Dataset,
    Scalar,
    Model,
    /// The fitted receiver itself (`est.fit(X)` returns `est`).
    Fitted,
    /// A transformed dataset produced by a fitting call (`fit_transform`).
    Transformed,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    Train,
    Test,
}

/// How a receiver is known at a call site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverKind {
    Dataset,
    Object,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ArgRef {
    Receiver,
    AllPositional,
    Param {
        position: Option<usize>,
        keywords: Vec<String>,
    },
}

impl TryFrom<String> for ArgRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.as_str() {
            "receiver" => return Ok(ArgRef::Receiver),
            "*" => return Ok(ArgRef::AllPositional),
            "" => return Err("empty argument reference".into()),
            _ => {}
        }
        let mut position = None;
        let mut keywords = Vec::new();
        for part in s.split('|') {
            if part.is_empty() {
                return Err(format!("empty alternative in argument reference {s:?}"));
            }
            if let Ok(p) = part.parse::<usize>() {
                if position.replace(p).is_some() {
                    return Err(format!("two positions in argument reference {s:?}"));
                }
            } else if part.chars().all(|c| c.is_alphanumeric() || c == '_') {
                keywords.push(part.to_string());
            } else {
                return Err(format!("invalid argument reference {s:?}"));
            }
        }
        Ok(ArgRef::Param { position, keywords })
    }
}

impl From<ArgRef> for String {
    fn from(a: ArgRef) -> String {
        a.to_string()
    }
}

impl fmt::Display for ArgRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgRef::Receiver => f.write_str("receiver"),
            ArgRef::AllPositional => f.write_str("*"),
            ArgRef::Param { position, keywords } => {
                let mut parts: Vec<String> = position.iter().map(|p| p.to_string()).collect();
                parts.extend(keywords.iter().cloned());
                f.write_str(&parts.join("|"))
            }
        }
    }
}

impl ArgRef {
    /// Variables the reference selects at a call site.
    pub fn resolve(&self, call: &CallFact) -> Vec<VarId> {
        match self {
            ArgRef::Receiver => call.receiver().into_iter().collect(),
            ArgRef::AllPositional => call.args.iter().map(|a| a.value).collect(),
            ArgRef::Param { position, keywords } => {
                if let Some(v) = position.and_then(|p| call.args.get(p)) {
                    if !v.starred {
                        return vec![v.value];
                    }
                }
                keywords
                    .iter()
                    .find_map(|k| call.kwarg(k))
                    .into_iter()
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgRoles {
    #[serde(default)]
    pub data: Vec<ArgRef>,
    #[serde(default)]
    pub labels: Vec<ArgRef>,
}

/// Result layout of a splitter: with `per_input = [train, test]` and two
/// inputs, results are `[in0.train, in0.test, in1.train, in1.test]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitArity {
    pub per_input: Vec<SplitPart>,
}

impl SplitArity {
    pub fn arity(&self, inputs: usize) -> usize {
        self.per_input.len() * inputs
    }

    /// Input index and part role of result position `i`.
    pub fn part(&self, i: usize, inputs: usize) -> Option<(usize, SplitPart)> {
        let width = self.per_input.len();
        if width == 0 || i >= self.arity(inputs) {
            return None;
        }
        Some((i / width, self.per_input[i % width]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiSpec {
    pub pattern: String,
    pub kind: SpecKind,
    #[serde(default)]
    pub method: bool,
    #[serde(default)]
    pub receiver: ReceiverReq,
    #[serde(default)]
    pub arg_roles: ArgRoles,
    #[serde(default)]
    pub result: ResultRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_arity: Option<SplitArity>,
    /// Canonical class of objects built by a `model_source` spec, when it
    /// differs from the matched name (factories such as `make_pipeline`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

impl ApiSpec {
    pub fn data_args(&self, call: &CallFact) -> Vec<VarId> {
        resolve_all(&self.arg_roles.data, call)
    }

    pub fn label_args(&self, call: &CallFact) -> Vec<VarId> {
        resolve_all(&self.arg_roles.labels, call)
    }

    pub fn reads_receiver(&self) -> bool {
        self.arg_roles.data.contains(&ArgRef::Receiver)
    }
}

fn resolve_all(refs: &[ArgRef], call: &CallFact) -> Vec<VarId> {
    let mut out = Vec::new();
    for r in refs {
        for v in r.resolve(call) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    schema_version: u32,
    #[serde(default)]
    library_versions: BTreeMap<String, String>,
    #[serde(default)]
    specs: Vec<ApiSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SpecFormatError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for SpecFormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}", p.display())?,
            None => f.write_str("<specs>")?,
        }
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// A lookup hit: the spec and the brace-expanded pattern that matched.
#[derive(Debug, Clone, Copy)]
pub struct SpecMatch<'a> {
    pub index: usize,
    pub spec: &'a ApiSpec,
    pub pattern: &'a str,
}

impl SpecMatch<'_> {
    /// Class to attach to objects built by a constructor spec: the explicit
    /// override, else the matched pattern when it is a concrete name, else
    /// the name as called.
    pub fn canonical_class(&self, called: &str) -> String {
        if let Some(c) = &self.spec.class {
            c.clone()
        } else if self.pattern.contains('*') {
            called.to_string()
        } else {
            self.pattern.to_string()
        }
    }
}

/// Callee as resolved at a call site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalleeName<'a> {
    Function(&'a str),
    Method {
        class: Option<&'a str>,
        method: &'a str,
    },
}

#[derive(Debug, Clone)]
pub struct SpecDb {
    specs: Vec<ApiSpec>,
    library_versions: BTreeMap<String, String>,
    /// Brace-expanded patterns, parallel to `specs`.
    expanded: Vec<Vec<String>>,
}

impl PartialEq for SpecDb {
    fn eq(&self, other: &Self) -> bool {
        self.specs == other.specs && self.library_versions == other.library_versions
    }
}

impl SpecDb {
    pub fn specs(&self) -> &[ApiSpec] {
        &self.specs
    }

    pub fn library_versions(&self) -> &BTreeMap<String, String> {
        &self.library_versions
    }

    pub fn from_json(text: &str, path: Option<&Path>) -> Result<SpecDb, SpecFormatError> {
        let err = |line, field: Option<String>, message: String| SpecFormatError {
            path: path.map(Path::to_path_buf),
            line,
            field,
            message,
        };
        if text.trim().is_empty() {
            return Ok(SpecDb::new(Vec::new(), BTreeMap::new()));
        }
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| err(Some(e.line()), None, e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(err(
                line_of(text, "schema_version"),
                Some("schema_version".into()),
                format!("unsupported schema version {}", file.schema_version),
            ));
        }
        for (i, spec) in file.specs.iter().enumerate() {
            let line = line_of(text, &format!("\"{}\"", spec.pattern));
            let field = |name: &str| Some(format!("specs[{i}].{name}"));
            if spec.pattern.is_empty() {
                return Err(err(line, field("pattern"), "empty pattern".into()));
            }
            if let Err(message) = expand_braces(&spec.pattern) {
                return Err(err(line, field("pattern"), message));
            }
            match (&spec.split_arity, spec.kind) {
                (None, SpecKind::Split) => {
                    return Err(err(
                        line,
                        field("split_arity"),
                        "split spec needs split_arity".into(),
                    ))
                }
                (Some(a), SpecKind::Split) if a.per_input.is_empty() => {
                    return Err(err(
                        line,
                        field("split_arity"),
                        "split_arity has no parts".into(),
                    ))
                }
                (Some(_), kind) if kind != SpecKind::Split => {
                    return Err(err(
                        line,
                        field("split_arity"),
                        "split_arity is only valid on split specs".into(),
                    ))
                }
                _ => {}
            }
            if spec.class.is_some() && spec.kind != SpecKind::ModelSource {
                return Err(err(
                    line,
                    field("class"),
                    "class is only valid on model_source specs".into(),
                ));
            }
        }
        Ok(SpecDb::new(file.specs, file.library_versions))
    }

    fn new(specs: Vec<ApiSpec>, library_versions: BTreeMap<String, String>) -> SpecDb {
        let expanded = specs
            .iter()
            .map(|s| expand_braces(&s.pattern).unwrap_or_else(|_| vec![s.pattern.clone()]))
            .collect();
        SpecDb {
            specs,
            library_versions,
            expanded,
        }
    }

    /// User entries take precedence over `base` because lookup is
    /// first-match.
    pub fn layered_over(self, base: &SpecDb) -> SpecDb {
        let mut specs = self.specs;
        specs.extend(base.specs.iter().cloned());
        let mut versions = base.library_versions.clone();
        versions.extend(self.library_versions);
        SpecDb::new(specs, versions)
    }

    pub fn to_json(&self) -> String {
        let file = SpecFile {
            schema_version: SCHEMA_VERSION,
            library_versions: self.library_versions.clone(),
            specs: self.specs.clone(),
        };
        serde_json::to_string_pretty(&file).expect("spec serialization")
    }

    pub fn lookup(
        &self,
        callee: CalleeName<'_>,
        receiver: Option<ReceiverKind>,
    ) -> Option<&ApiSpec> {
        self.lookup_match(callee, receiver).map(|m| m.spec)
    }

    pub fn lookup_match(
        &self,
        callee: CalleeName<'_>,
        receiver: Option<ReceiverKind>,
    ) -> Option<SpecMatch<'_>> {
        let qualified = match callee {
            CalleeName::Method {
                class: Some(class),
                method,
            } => Some(format!("{class}.{method}")),
            _ => None,
        };
        self.specs.iter().enumerate().find_map(|(index, spec)| {
            let applies = match callee {
                CalleeName::Function(_) => !spec.method,
                CalleeName::Method { .. } => spec.method && receiver_ok(spec.receiver, receiver),
            };
            if !applies {
                return None;
            }
            let pattern = self.expanded[index]
                .iter()
                .find(|p| match (callee, &qualified) {
                    (CalleeName::Function(path), _) => name_matches(p, path),
                    (CalleeName::Method { .. }, Some(q)) => name_matches(p, q),
                    (CalleeName::Method { method, .. }, None) => {
                        p.strip_prefix("*.").is_some_and(|m| glob(m, method))
                    }
                })?;
            Some(SpecMatch {
                index,
                spec,
                pattern,
            })
        })
    }

    /// Lookup by a dotted name: a function path when `receiver` is absent,
    /// otherwise `<class>.<method>` (class may be a bare or qualified name).
    pub fn lookup_name(&self, name: &str, receiver: Option<ReceiverKind>) -> Option<&ApiSpec> {
        match receiver {
            None => self.lookup(CalleeName::Function(name), None),
            Some(kind) => {
                let (class, method) = match name.rsplit_once('.') {
                    Some((c, m)) => (Some(c), m),
                    None => (None, name),
                };
                self.lookup(CalleeName::Method { class, method }, Some(kind))
            }
        }
    }
}

fn receiver_ok(req: ReceiverReq, actual: Option<ReceiverKind>) -> bool {
    match req {
        ReceiverReq::Any => true,
        ReceiverReq::Dataset => actual == Some(ReceiverKind::Dataset),
        ReceiverReq::Object => actual == Some(ReceiverKind::Object),
    }
}

/// Full match, or a match of a dot-aligned suffix of the pattern (so that
/// `train_test_split` finds `sklearn.model_selection.train_test_split`).
/// Suffixes whose first segment holds a wildcard are skipped; they would
/// match far too broadly.
fn name_matches(pattern: &str, name: &str) -> bool {
    if glob(pattern, name) {
        return true;
    }
    pattern
        .match_indices('.')
        .map(|(i, _)| &pattern[i + 1..])
        .filter(|suffix| !suffix.split('.').next().unwrap_or("").contains('*'))
        .any(|suffix| glob(suffix, name))
}

/// `*` matches any (possibly empty) run of characters.
pub fn glob(pattern: &str, text: &str) -> bool {
    let p = pattern.as_bytes();
    let t = text.as_bytes();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == b'*' {
            star = Some((pi, ti));
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == b'*')
}

/// Expand `{a,b}` groups (not nested).
pub fn expand_braces(pattern: &str) -> Result<Vec<String>, String> {
    let Some(open) = pattern.find('{') else {
        if pattern.contains('}') {
            return Err(format!("unbalanced '}}' in {pattern:?}"));
        }
        return Ok(vec![pattern.to_string()]);
    };
    let close = pattern[open..]
        .find('}')
        .map(|c| open + c)
        .ok_or_else(|| format!("unbalanced '{{' in {pattern:?}"))?;
    let inner = &pattern[open + 1..close];
    if inner.contains('{') {
        return Err(format!("nested braces in {pattern:?}"));
    }
    let rest = expand_braces(&pattern[close + 1..])?;
    let mut out = Vec::new();
    for alt in inner.split(',') {
        let alt = alt.trim();
        for tail in &rest {
            out.push(format!("{}{alt}{tail}", &pattern[..open]));
        }
    }
    Ok(out)
}

fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.find(needle)
        .map(|offset| text[..offset].matches('\n').count() + 1)
}

pub fn builtin() -> &'static SpecDb {
    static DB: OnceLock<SpecDb> = OnceLock::new();
    DB.get_or_init(|| SpecDb::from_json(BUILTIN_JSON, None).expect("bundled specs are valid"))
}

/// Load `"builtin"`, or a user file layered over the builtin database.
pub fn load_specs(source: &str) -> Result<SpecDb, SpecFormatError> {
    if source == BUILTIN {
        return Ok(builtin().clone());
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| SpecFormatError {
        path: Some(path.to_path_buf()),
        line: None,
        field: None,
        message: e.to_string(),
    })?;
    Ok(SpecDb::from_json(&text, Some(path))?.layered_over(builtin()))
}
