use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataflow::{
    build_flow_graph, pointer_analysis, EdgeKind, FlowGraph, PointsTo, DEFAULT_BUDGET,
};
use crate::frontend::{
    desugar, load_source, parse, to_ssa, FactBase, FrontendError, SourceUnit, SsaOptions, VarId,
};
use crate::leakage::{
    detect_leakage, Derivation, Finding, Leakage, LeakageKind, ModelDataTuple, RelData, Witness,
};
use crate::specs::{builtin, SpecDb};
use crate::typeinf::infer;

/// Deep expression nesting recurses in the parser and the lowering.
const ANALYSIS_STACK: usize = 32 << 20;

#[derive(Debug, Clone)]
pub struct Config {
    pub specs: SpecDb,
    /// Points-to constraint budget per file.
    pub budget: u64,
    pub context_depth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            specs: builtin().clone(),
            budget: DEFAULT_BUDGET,
            context_depth: SsaOptions::default().context_depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    SyntaxError,
    BudgetExceeded,
    /// Unreadable file or malformed notebook.
    FormatError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::SyntaxError => "syntax_error",
            Status::BudgetExceeded => "budget_exceeded",
            Status::FormatError => "format_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRef {
    pub cell: usize,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
    pub line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatedData {
    pub dataset: String,
    pub lines: Vec<u32>,
    /// How the dataset relates to the training data.
    pub related_by: Derivation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleRef {
    pub model: String,
    pub train: String,
    pub train_line: u32,
    pub validation: Vec<String>,
    pub eval_lines: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WitnessReport {
    Preprocessing {
        source: String,
        target: String,
        reduce_line: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api: Option<String>,
        eval: String,
        train: String,
        train_line: u32,
        path: Vec<PathStep>,
    },
    Overlap {
        train: String,
        train_line: u32,
        evaluated: Vec<EvaluatedData>,
    },
    MultiTest {
        tuples: Vec<TupleRef>,
        /// Lines of evaluations on mutually related data, one group per
        /// family of related datasets.
        groups: Vec<Vec<u32>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFinding {
    pub kind: LeakageKind,
    pub line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub message: String,
    pub witness: WitnessReport,
}

impl ReportFinding {
    /// Line distance used by corpus statistics.
    pub fn distances(&self) -> Vec<u32> {
        match &self.witness {
            WitnessReport::Preprocessing {
                reduce_line,
                train_line,
                ..
            } => vec![reduce_line.abs_diff(*train_line)],
            WitnessReport::MultiTest { groups, .. } => groups
                .iter()
                .flat_map(|g| g.windows(2).map(|w| w[1] - w[0]))
                .collect(),
            WitnessReport::Overlap { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub models_trained: usize,
    pub models_evaluated: usize,
    pub eval_sites: usize,
    pub uses_pipeline: bool,
}

impl Metrics {
    fn is_zero(&self) -> bool {
        *self == Metrics::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub file: String,
    pub status: Status,
    pub findings: Vec<ReportFinding>,
    #[serde(default, skip_serializing_if = "Metrics::is_zero")]
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub line_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl AnalysisResult {
    pub fn empty(file: impl Into<String>) -> Self {
        AnalysisResult {
            file: file.into(),
            status: Status::Ok,
            findings: Vec::new(),
            metrics: Metrics::default(),
            line_count: 0,
            error: None,
        }
    }

    fn failed(file: String, status: Status, error: String, line_count: u32) -> Self {
        AnalysisResult {
            status,
            error: Some(error),
            line_count,
            ..AnalysisResult::empty(file)
        }
    }

    pub fn has(&self, kind: LeakageKind) -> bool {
        self.findings.iter().any(|f| f.kind == kind)
    }
}

pub fn analyze_file(path: &Path, config: &Config) -> AnalysisResult {
    match load_source(path) {
        Ok(unit) => analyze_unit(&unit, config),
        Err(e) => AnalysisResult::failed(
            path.display().to_string(),
            Status::FormatError,
            e.to_string(),
            0,
        ),
    }
}

/// Analyze script text under a display name.
pub fn analyze_source(file: &str, code: &str, config: &Config) -> AnalysisResult {
    analyze_unit(&SourceUnit::script(file, code), config)
}

pub fn analyze_unit(unit: &SourceUnit, config: &Config) -> AnalysisResult {
    std::thread::scope(|s| {
        let worker = std::thread::Builder::new()
            .stack_size(ANALYSIS_STACK)
            .spawn_scoped(s, || run(unit, config))
            .expect("spawn analysis thread");
        match worker.join() {
            Ok(r) => r,
            Err(panic) => std::panic::resume_unwind(panic),
        }
    })
}

/// Every intermediate product of one analysis.
pub struct Analysis {
    pub facts: FactBase,
    pub pts: PointsTo,
    pub graph: FlowGraph,
    pub leakage: Leakage,
}

pub fn run_pipeline(unit: &SourceUnit, config: &Config) -> Result<Analysis, (Status, String)> {
    let ast = parse(unit).map_err(|e| (Status::SyntaxError, FrontendError::from(e).to_string()))?;
    let opts = SsaOptions {
        context_depth: config.context_depth,
    };
    let facts = to_ssa(&desugar(&ast), &opts);
    let pts = pointer_analysis(&facts, &config.specs, config.budget)
        .map_err(|e| (Status::BudgetExceeded, e.to_string()))?;
    let types = infer(&facts, &config.specs, &pts);
    let graph = build_flow_graph(&facts, &pts, &types, &config.specs);
    let leakage = detect_leakage(&graph, &facts, &pts, &config.specs);
    Ok(Analysis {
        facts,
        pts,
        graph,
        leakage,
    })
}

fn run(unit: &SourceUnit, config: &Config) -> AnalysisResult {
    let file = unit.display_name();
    let a = match run_pipeline(unit, config) {
        Ok(a) => a,
        Err((status, msg)) => return AnalysisResult::failed(file, status, msg, unit.line_count()),
    };
    let mut findings = Renderer { unit, a: &a }.findings();
    findings.sort_by(|x, y| (x.kind, x.line, &x.message).cmp(&(y.kind, y.line, &y.message)));
    AnalysisResult {
        file,
        status: Status::Ok,
        findings,
        metrics: metrics(&a),
        line_count: unit.line_count(),
        error: None,
    }
}

fn metrics(a: &Analysis) -> Metrics {
    let tuples = &a.leakage.tuples;
    let trained: BTreeSet<_> = tuples.iter().map(|t| t.object).collect();
    let evaluated: BTreeSet<_> = tuples
        .iter()
        .filter(|t| !t.eval_sites.is_empty())
        .map(|t| t.object)
        .collect();
    let sites: BTreeSet<_> = tuples
        .iter()
        .flat_map(|t| t.eval_sites.iter().map(|s| s.call))
        .collect();
    let uses_pipeline = a.pts.objects().any(|(_, o)| {
        o.class
            .as_deref()
            .is_some_and(|c| c.rsplit('.').next() == Some("Pipeline"))
    });
    Metrics {
        models_trained: trained.len(),
        models_evaluated: evaluated.len(),
        eval_sites: sites.len(),
        uses_pipeline,
    }
}

struct Renderer<'a> {
    unit: &'a SourceUnit,
    a: &'a Analysis,
}

impl Renderer<'_> {
    fn name(&self, v: VarId) -> String {
        self.a.facts.display_name(v)
    }

    fn cell(&self, line: u32) -> Option<CellRef> {
        match self.unit.kind {
            crate::frontend::SourceKind::Notebook => self.unit.origin(line).map(|c| CellRef {
                cell: c.cell,
                line: c.line,
            }),
            crate::frontend::SourceKind::Script => None,
        }
    }

    /// One representative per reduce site, per training site, and one
    /// multi-test finding per file.
    fn findings(&self) -> Vec<ReportFinding> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let tuples = &self.a.leakage.tuples;
        let edges = self.a.graph.edges();
        for f in &self.a.leakage.findings {
            let key = match &f.witness {
                Witness::Preprocessing { reduce, .. } => {
                    let e = &edges[*reduce];
                    (f.kind, e.line, e.call.map_or(u32::MAX, |c| c.0))
                }
                Witness::Overlap { tuple } => (
                    f.kind,
                    tuples[*tuple].train_site,
                    tuples[*tuple].train_call.0,
                ),
                Witness::MultiTest { .. } => (f.kind, 0, 0),
            };
            if seen.insert(key) {
                out.push(self.finding(f));
            }
        }
        out
    }

    fn finding(&self, f: &Finding) -> ReportFinding {
        let tuples = &self.a.leakage.tuples;
        let rel = &self.a.leakage.rel;
        let g = &self.a.graph;
        let (line, model, message, witness) = match &f.witness {
            Witness::Preprocessing {
                tuple,
                reduce,
                eval,
                path,
            } => {
                let t = &tuples[*tuple];
                let e = &g.edges()[*reduce];
                let role = if t.test.contains(eval) {
                    "test"
                } else {
                    "validation"
                };
                let via = e.api.clone().unwrap_or_else(|| format!("line {}", e.line));
                let message = format!("{role} data distribution flows into training via {via}");
                let path = path
                    .iter()
                    .map(|&i| {
                        let s = &g.edges()[i];
                        PathStep {
                            src: self.name(s.src),
                            dst: self.name(s.dst),
                            kind: s.kind,
                            line: s.line,
                            api: s.api.clone(),
                        }
                    })
                    .collect();
                let witness = WitnessReport::Preprocessing {
                    source: self.name(e.src),
                    target: self.name(e.dst),
                    reduce_line: e.line,
                    api: e.api.clone(),
                    eval: self.name(*eval),
                    train: self.name(t.train),
                    train_line: t.train_site,
                    path,
                };
                (e.line, Some(t.model.clone()), message, witness)
            }
            Witness::Overlap { tuple } => {
                let t = &tuples[*tuple];
                let evaluated: Vec<EvaluatedData> = t
                    .evaluated()
                    .map(|d| EvaluatedData {
                        dataset: self.name(d),
                        lines: eval_lines(t, |s| s == d),
                        related_by: relation(rel, d, t.train),
                    })
                    .collect();
                let names: Vec<&str> = evaluated.iter().map(|e| e.dataset.as_str()).collect();
                let message = format!(
                    "{} is evaluated on {} which shares rows with its training data {}",
                    t.model,
                    names.join(", "),
                    self.name(t.train)
                );
                let witness = WitnessReport::Overlap {
                    train: self.name(t.train),
                    train_line: t.train_site,
                    evaluated,
                };
                (t.train_site, Some(t.model.clone()), message, witness)
            }
            Witness::MultiTest { tuples: ids } => {
                let refs: Vec<TupleRef> = ids
                    .iter()
                    .map(|&i| {
                        let t = &tuples[i];
                        TupleRef {
                            model: t.model.clone(),
                            train: self.name(t.train),
                            train_line: t.train_site,
                            validation: t.validation.iter().map(|&v| self.name(v)).collect(),
                            eval_lines: eval_lines(t, |d| t.validation.contains(&d)),
                        }
                    })
                    .collect();
                let mut refs = refs;
                refs.dedup();
                let groups = related_groups(ids.iter().map(|&i| &tuples[i]), rel);
                let first = groups.iter().flatten().min().copied().unwrap_or(0);
                let mut data: Vec<String> = refs
                    .iter()
                    .flat_map(|r| r.validation.iter().cloned())
                    .collect();
                data.sort();
                data.dedup();
                let message = format!(
                    "no independent test data: {} evaluated repeatedly",
                    data.join(", ")
                );
                (
                    first,
                    None,
                    message,
                    WitnessReport::MultiTest {
                        tuples: refs,
                        groups,
                    },
                )
            }
        };
        ReportFinding {
            kind: f.kind,
            line,
            cell: self.cell(line),
            model,
            message,
            witness,
        }
    }
}

fn eval_lines(t: &ModelDataTuple, keep: impl Fn(VarId) -> bool) -> Vec<u32> {
    let lines: BTreeSet<u32> = t
        .eval_sites
        .iter()
        .filter(|s| keep(s.data))
        .map(|s| s.line)
        .collect();
    lines.into_iter().collect()
}

/// The simplest derivation of a related pair in either direction.
fn relation(rel: &RelData, a: VarId, b: VarId) -> Derivation {
    let rank = |d: &Derivation| match d {
        Derivation::Ref => 0,
        Derivation::Flow => 1,
        Derivation::Dup { .. } => 2,
        Derivation::Map { .. } => 3,
        Derivation::Sym => 4,
    };
    [rel.derivation(a, b), rel.derivation(b, a)]
        .into_iter()
        .flatten()
        .min_by_key(rank)
        .unwrap_or(Derivation::Sym)
}

/// Validation evaluation lines grouped by connected families of related
/// datasets, each group sorted.
fn related_groups<'a>(
    tuples: impl Iterator<Item = &'a ModelDataTuple>,
    rel: &RelData,
) -> Vec<Vec<u32>> {
    let mut sites: Vec<(VarId, u32)> = Vec::new();
    for t in tuples {
        for s in &t.eval_sites {
            if t.validation.contains(&s.data) && !sites.contains(&(s.data, s.line)) {
                sites.push((s.data, s.line));
            }
        }
    }
    let data: Vec<VarId> = sites
        .iter()
        .map(|s| s.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut root: HashMap<VarId, VarId> = data.iter().map(|&d| (d, d)).collect();
    fn find(root: &mut HashMap<VarId, VarId>, v: VarId) -> VarId {
        let p = root[&v];
        if p == v {
            return v;
        }
        let r = find(root, p);
        root.insert(v, r);
        r
    }
    for (i, &a) in data.iter().enumerate() {
        for &b in &data[i + 1..] {
            if rel.contains(a, b) {
                let (ra, rb) = (find(&mut root, a), find(&mut root, b));
                root.insert(ra.max(rb), ra.min(rb));
            }
        }
    }
    let mut groups: BTreeMap<VarId, BTreeSet<u32>> = BTreeMap::new();
    for (d, line) in sites {
        let r = find(&mut root, d);
        groups.entry(r).or_default().insert(line);
    }
    let mut out: Vec<Vec<u32>> = groups
        .into_values()
        .map(|g| g.into_iter().collect())
        .collect();
    out.sort();
    out
}
