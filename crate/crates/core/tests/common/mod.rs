//! Shared fixtures and a brute-force rule oracle for integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use leaklint::dataflow::{EdgeKind, FlowEdge, FlowGraph, ObjId};
use leaklint::frontend::{CallId, VarId};
use leaklint::leakage::{EvalSite, LeakageKind, ModelDataTuple};
use leaklint::typeinf::TypeClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn figure(name: &str) -> PathBuf {
    fixtures().join("figures").join(format!("{name}.py"))
}

pub fn misc(name: &str) -> PathBuf {
    fixtures().join("misc").join(name)
}

/// Every fixture file under a subdirectory, sorted.
pub fn files_in(sub: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixtures().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("py" | "ipynb")))
        .collect();
    out.sort();
    out
}

pub fn all_fixtures() -> Vec<PathBuf> {
    ["figures", "misc", "corpus", "perf"]
        .iter()
        .flat_map(|s| files_in(s))
        .collect()
}

/// Kinds named by a `# expect:` header; empty for `clean`.
pub fn expected_kinds(path: &Path) -> BTreeSet<LeakageKind> {
    let text = std::fs::read_to_string(path).unwrap();
    let header = text
        .lines()
        .find_map(|l| l.strip_prefix("# expect:"))
        .unwrap_or_else(|| panic!("{} has no expect header", path.display()));
    header
        .split(',')
        .map(str::trim)
        .filter(|k| *k != "clean")
        .map(|k| match k {
            "preprocessing" => LeakageKind::Preprocessing,
            "overlap" => LeakageKind::Overlap,
            "multi_test" => LeakageKind::MultiTest,
            other => panic!("unknown kind {other}"),
        })
        .collect()
}

/// A random program abstraction: a typed flow graph plus model/data tuples.
pub struct FactCase {
    pub graph: FlowGraph,
    pub tuples: Vec<ModelDataTuple>,
}

pub fn random_case(seed: u64) -> FactCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let datasets = rng.gen_range(1..=30);
    let others = rng.gen_range(0..=6);
    let n = datasets + others;
    let mut classes = vec![TypeClass::Dataset; datasets];
    for _ in 0..others {
        classes.push(if rng.gen_bool(0.5) {
            TypeClass::Model
        } else {
            TypeClass::Scalar
        });
    }
    let mut g = FlowGraph::with_nodes(classes.clone(), vec![false; n]);
    let edges = rng.gen_range(0..=60);
    for line in 1..=edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let both = classes[a] == TypeClass::Dataset && classes[b] == TypeClass::Dataset;
        let kind = match rng.gen_range(0..10) {
            0..=3 => EdgeKind::Flow,
            4 | 5 if both => EdgeKind::Map,
            6 if both => EdgeKind::Dup,
            7 if both => EdgeKind::Filter,
            8 | 9 => EdgeKind::Reduce,
            _ => EdgeKind::Flow,
        };
        g.add_edge(FlowEdge::new(
            VarId(a as u32),
            VarId(b as u32),
            kind,
            line as u32,
        ));
    }

    let mut tuples = Vec::new();
    for t in 0..rng.gen_range(0..=4) {
        let pick = |rng: &mut ChaCha8Rng| VarId(rng.gen_range(0..datasets) as u32);
        let train = pick(&mut rng);
        let mut validation = BTreeSet::new();
        let mut test = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=3) {
            let d = pick(&mut rng);
            if rng.gen_bool(0.5) {
                validation.insert(d);
            } else if !validation.contains(&d) {
                test.insert(d);
            }
        }
        test.retain(|d| !validation.contains(d));
        let eval_sites = validation
            .iter()
            .chain(&test)
            .enumerate()
            .map(|(i, &d)| EvalSite {
                call: CallId(100 + i as u32),
                line: 100 + i as u32,
                data: d,
                in_loop: false,
            })
            .collect();
        tuples.push(ModelDataTuple {
            object: ObjId(t),
            model: format!("m{t}"),
            train,
            train_call: CallId(t),
            train_site: t + 1,
            validation,
            test,
            eval_sites,
        });
    }
    FactCase { graph: g, tuples }
}

/// Naive fixpoint of the related-data rules over explicit pair sets.
pub struct Oracle {
    pub rel: HashSet<(usize, usize)>,
    pub dataflow: Vec<Vec<bool>>,
}

#[allow(clippy::needless_range_loop)]
pub fn oracle(g: &FlowGraph) -> Oracle {
    let n = g.node_count();
    let is_d = |i: usize| g.class(VarId(i as u32)) == TypeClass::Dataset;
    let edges: Vec<(usize, usize, EdgeKind)> = g
        .edges()
        .iter()
        .map(|e| (e.src.index(), e.dst.index(), e.kind))
        .collect();

    // closures by Warshall
    let closure = |keep: &dyn Fn(usize) -> bool| {
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = keep(i);
        }
        for &(a, b, _) in &edges {
            if keep(a) && keep(b) {
                m[a][b] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if m[i][k] {
                    for j in 0..n {
                        if m[k][j] {
                            m[i][j] = true;
                        }
                    }
                }
            }
        }
        m
    };
    let dataset_flow = closure(&is_d);
    let dataflow = closure(&|_| true);

    let ds: Vec<usize> = (0..n).filter(|&i| is_d(i)).collect();
    let maps: Vec<(usize, usize)> = edges
        .iter()
        .filter(|e| e.2 == EdgeKind::Map && is_d(e.0) && is_d(e.1))
        .map(|e| (e.0, e.1))
        .collect();
    let dup_targets: BTreeSet<usize> = edges
        .iter()
        .filter(|e| e.2 == EdgeKind::Dup && is_d(e.0) && is_d(e.1))
        .map(|e| e.1)
        .collect();

    let mut rel: HashSet<(usize, usize)> = HashSet::new();
    loop {
        let before = rel.len();
        for &a in &ds {
            rel.insert((a, a));
            for &b in &ds {
                if dataset_flow[a][b] {
                    rel.insert((a, b));
                }
            }
        }
        let snapshot: Vec<(usize, usize)> = rel.iter().copied().collect();
        for &(a, b) in &snapshot {
            rel.insert((b, a));
        }
        for &(a, c) in &maps {
            if rel.contains(&(a, c)) {
                for &b in &ds {
                    if rel.contains(&(a, b)) {
                        rel.insert((b, c));
                    }
                }
            }
        }
        for &a in &dup_targets {
            for &b in &ds {
                for &c in &ds {
                    if rel.contains(&(a, b)) && rel.contains(&(a, c)) {
                        rel.insert((b, c));
                    }
                }
            }
        }
        if rel.len() == before {
            break;
        }
    }
    Oracle { rel, dataflow }
}

/// (tuple, reduce edge index, eval dataset) triples the preprocessing rule admits.
pub fn oracle_preprocessing(
    g: &FlowGraph,
    tuples: &[ModelDataTuple],
    o: &Oracle,
) -> BTreeSet<(usize, usize, VarId)> {
    let mut out = BTreeSet::new();
    for (ei, e) in g.edges().iter().enumerate() {
        if e.kind != EdgeKind::Reduce {
            continue;
        }
        for (ti, t) in tuples.iter().enumerate() {
            for &d in t.validation.iter().chain(&t.test) {
                if o.rel.contains(&(d.index(), e.src.index()))
                    && o.dataflow[e.dst.index()][t.train.index()]
                {
                    out.insert((ti, ei, d));
                }
            }
        }
    }
    out
}

pub fn oracle_overlap(tuples: &[ModelDataTuple], o: &Oracle) -> BTreeSet<usize> {
    (0..tuples.len())
        .filter(|&i| {
            let t = &tuples[i];
            let evaluated: Vec<VarId> = t.validation.iter().chain(&t.test).copied().collect();
            !evaluated.is_empty()
                && evaluated
                    .iter()
                    .all(|d| o.rel.contains(&(d.index(), t.train.index())))
        })
        .collect()
}

pub fn oracle_multi(tuples: &[ModelDataTuple]) -> bool {
    tuples.iter().any(|t| !t.validation.is_empty()) && tuples.iter().all(|t| t.test.is_empty())
}

/// Compare the engine against the oracle on one seeded case.
pub fn disagreement(seed: u64) -> Option<String> {
    use leaklint::leakage::{
        compute_reldata, detect_multi_test, detect_overlap, detect_preprocessing, Witness,
    };

    let case = random_case(seed);
    let g = &case.graph;
    let o = oracle(g);
    let rel = compute_reldata(g);
    let engine: HashSet<(usize, usize)> = rel
        .pairs()
        .into_iter()
        .map(|(a, b)| (a.index(), b.index()))
        .collect();
    if engine != o.rel {
        return Some(format!(
            "seed {seed}: reldata differs ({} vs {} pairs)",
            engine.len(),
            o.rel.len()
        ));
    }

    let pre: BTreeSet<(usize, usize, VarId)> = detect_preprocessing(&case.tuples, &rel, g)
        .into_iter()
        .map(|f| match f.witness {
            Witness::Preprocessing {
                tuple,
                reduce,
                eval,
                ..
            } => (tuple, reduce, eval),
            _ => unreachable!(),
        })
        .collect();
    if pre != oracle_preprocessing(g, &case.tuples, &o) {
        return Some(format!("seed {seed}: preprocessing differs"));
    }

    let overlap: BTreeSet<usize> = detect_overlap(&case.tuples, &rel)
        .into_iter()
        .map(|f| match f.witness {
            Witness::Overlap { tuple } => tuple,
            _ => unreachable!(),
        })
        .collect();
    if overlap != oracle_overlap(&case.tuples, &o) {
        return Some(format!("seed {seed}: overlap differs"));
    }

    if detect_multi_test(&case.tuples).is_some() != oracle_multi(&case.tuples) {
        return Some(format!("seed {seed}: multi-test differs"));
    }
    None
}
