mod common;

use std::collections::HashSet;

use leaklint::dataflow::{EdgeKind, FlowEdge, FlowGraph};
use leaklint::frontend::{desugar, load_source, parse_str, to_ssa, SourceUnit, SsaOptions, VarId};
use leaklint::leakage::{compute_reldata, detect_overlap, detect_preprocessing};
use leaklint::report::{analyze_source, run_pipeline, AnalysisResult, Config, CorpusStats};
use proptest::prelude::*;

const HEADER: &str = "import pandas as pd\n\
from sklearn.model_selection import train_test_split\n\
from sklearn.preprocessing import StandardScaler\n\
from sklearn.linear_model import LogisticRegression\n\
y = pd.read_csv(\"y.csv\")\n";

const VARS: &[&str] = &["a", "b", "c", "d", "e"];

/// One statement of a small data-science dialect over a fixed variable pool.
fn statement() -> impl Strategy<Value = String> {
    let v = || prop::sample::select(VARS);
    prop_oneof![
        v().prop_map(|x| format!("{x} = pd.read_csv(\"{x}.csv\")")),
        (v(), v(), v()).prop_map(|(x, y, z)| format!("{x}, {y} = train_test_split({z})")),
        (v(), v()).prop_map(|(x, y)| format!("{x} = {y}.fillna(0)")),
        (v(), v()).prop_map(|(x, y)| format!("{x} = {y}.dropna()")),
        (v(), v()).prop_map(|(x, y)| format!("{x} = {y}[{y}.col > 0]")),
        (v(), v()).prop_map(|(x, y)| format!("{x} = StandardScaler().fit_transform({y})")),
        (v(), v()).prop_map(|(x, y)| format!(
            "sc = StandardScaler()\nsc.fit({y})\n{x} = sc.transform({y})"
        )),
        v().prop_map(|x| format!("m = LogisticRegression()\nm.fit({x}, y)")),
        v().prop_map(|x| format!("m.score({x}, y)")),
        v().prop_map(|x| format!("p = m.predict({x})")),
        v().prop_map(|x| format!("for k in range(3):\n    m.score({x}, y)")),
        (v(), v()).prop_map(|(x, y)| format!("if len({y}) > 10:\n    {x} = {y}.dropna()")),
    ]
}

fn program() -> impl Strategy<Value = String> {
    prop::collection::vec(statement(), 0..14).prop_map(|lines| {
        let mut s = HEADER.to_string();
        for v in VARS {
            s.push_str(&format!("{v} = pd.read_csv(\"{v}.csv\")\n"));
        }
        s.push_str("m = LogisticRegression()\n");
        for l in lines {
            s.push_str(&l);
            s.push('\n');
        }
        s
    })
}

fn analyze(code: &str) -> AnalysisResult {
    analyze_source("gen.py", code, &Config::default())
}

/// The same graph with one extra edge appended.
fn with_edge(g: &FlowGraph, extra: FlowEdge) -> FlowGraph {
    let n = g.node_count();
    let ids = (0..n).map(|i| VarId(i as u32));
    let mut h = FlowGraph::with_nodes(
        ids.clone().map(|v| g.class(v)).collect(),
        ids.map(|v| g.is_single_sample(v)).collect(),
    );
    for e in g.edges() {
        h.add_edge(e.clone());
    }
    h.add_edge(extra);
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_matches_oracle(seed in any::<u64>()) {
        prop_assert_eq!(common::disagreement(seed), None);
    }

    #[test]
    fn related_data_is_symmetric_and_reflexive(seed in any::<u64>()) {
        let case = common::random_case(seed);
        let rel = compute_reldata(&case.graph);
        for d in case.graph.datasets() {
            prop_assert!(rel.contains(d, d));
        }
        for (a, b) in rel.pairs() {
            prop_assert!(rel.contains(b, a));
            prop_assert!(case.graph.is_dataset(a) && case.graph.is_dataset(b));
        }
    }

    #[test]
    fn data_flow_matches_closure(seed in any::<u64>()) {
        let case = common::random_case(seed);
        let o = common::oracle(&case.graph);
        let n = case.graph.node_count();
        for a in 0..n {
            let row = case.graph.data_flow_from(VarId(a as u32));
            prop_assert_eq!(&row, &o.dataflow[a], "flows from {}", a);
        }
    }

    #[test]
    fn adding_an_edge_never_removes_facts(seed in any::<u64>(), pick in any::<(u16, u16, u8)>()) {
        let case = common::random_case(seed);
        let g = &case.graph;
        let n = g.node_count();
        let (a, b) = (pick.0 as usize % n, pick.1 as usize % n);
        let kind = [EdgeKind::Flow, EdgeKind::Map, EdgeKind::Dup, EdgeKind::Filter, EdgeKind::Reduce][pick.2 as usize % 5];
        if kind.needs_datasets() && !(g.is_dataset(VarId(a as u32)) && g.is_dataset(VarId(b as u32))) {
            return Ok(());
        }
        let h = with_edge(g, FlowEdge::new(VarId(a as u32), VarId(b as u32), kind, 999));

        let before = compute_reldata(g);
        let after = compute_reldata(&h);
        let grown: HashSet<_> = after.pairs().into_iter().collect();
        prop_assert!(before.pairs().iter().all(|p| grown.contains(p)));

        let key = |f: leaklint::leakage::Finding| format!("{:?}", f.witness).split(", path").next().unwrap().to_string();
        let pre_after: HashSet<String> = detect_preprocessing(&case.tuples, &after, &h).into_iter().map(key).collect();
        for f in detect_preprocessing(&case.tuples, &before, g) {
            prop_assert!(pre_after.contains(&key(f)));
        }
        let over_after: HashSet<String> = detect_overlap(&case.tuples, &after).into_iter().map(key).collect();
        for f in detect_overlap(&case.tuples, &before) {
            prop_assert!(over_after.contains(&key(f)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_programs_analyze_cleanly(code in program()) {
        let r = analyze(&code);
        prop_assert_eq!(r.status, leaklint::Status::Ok, "{:?}", r.error);
        for f in &r.findings {
            prop_assert!(f.line >= 1 && f.line <= r.line_count);
        }
        prop_assert_eq!(&r, &analyze(&code));
    }

    #[test]
    fn results_round_trip_through_json(code in program()) {
        let r = analyze(&code);
        let json = serde_json::to_string(&r).unwrap();
        let back: AnalysisResult = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn every_finding_has_a_valid_witness(code in program()) {
        let unit = SourceUnit::script("gen.py", code);
        let a = run_pipeline(&unit, &Config::default()).unwrap();
        for f in &a.leakage.findings {
            prop_assert!(f.holds(&a.leakage.tuples, &a.leakage.rel, &a.graph), "{:?}", f);
        }
    }

    #[test]
    fn ssa_defines_each_use(code in program()) {
        let ast = parse_str(&code).unwrap();
        let core = desugar(&ast);
        prop_assert_eq!(&core, &desugar(&ast));
        let facts = to_ssa(&core, &SsaOptions::default());
        for v in facts.var_ids() {
            for u in facts.def(v).uses() {
                prop_assert!(u.index() < facts.len(), "{:?} uses undefined {:?}", v, u);
            }
        }
    }

    #[test]
    fn stats_recompute_from_serialized_results(codes in prop::collection::vec(program(), 1..6)) {
        let results: Vec<AnalysisResult> = codes.iter().map(|c| analyze(c)).collect();
        let reloaded: Vec<AnalysisResult> = results
            .iter()
            .map(|r| serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap())
            .collect();
        prop_assert_eq!(CorpusStats::from_results(&results), CorpusStats::from_results(&reloaded));
    }
}

#[test]
fn fixtures_satisfy_witness_checks() {
    for path in common::all_fixtures() {
        let unit = load_source(&path).unwrap();
        let Ok(a) = run_pipeline(&unit, &Config::default()) else {
            continue;
        };
        for f in &a.leakage.findings {
            assert!(
                f.holds(&a.leakage.tuples, &a.leakage.rel, &a.graph),
                "{}: {f:?}",
                path.display()
            );
        }
    }
}
