//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod common;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cgrag::causal::{build_causal_view, CausalityTable, StrengthUpdate};
use cgrag::config::PipelineConfig;
use cgrag::cot::{parse_cot, ChainOfThought};
use cgrag::enhancer::{
    cui_overlap, fuse_paths, keep_count, lh_score, semantic_overlap, total_score, EnhancerConfig,
};
use cgrag::eval::{compute_metrics, AblationMode};
use cgrag::graph::{EdgeView, GraphBuilder, KnowledgeGraph, NodeIx};
use cgrag::llm::{Stage, TranscriptEntry};
use cgrag::retrieval::{find_paths, find_paths_in, Path, Reason, RetrievalConfig, Tier};
use cgrag::{Error, Rational};
use common::*;
use num_traits::{One, Zero};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn sample<S: Strategy>(strategy: &S, runner: &mut TestRunner) -> S::Value {
    strategy
        .new_tree(runner)
        .expect("strategy yields a value")
        .current()
}

// ---------------------------------------------------------------------------

fn monotonicity() -> Check {
    let mut b = GraphBuilder::<f64>::new();
    for i in 0..20 {
        b.add_node(&node_id(i), &format!("node {i}"), ["dsyn"])
            .unwrap();
    }
    for i in 0..50 {
        let (pred, w) = PREDICATES[i % PREDICATES.len()];
        b.add_edge(&node_id(i % 20), pred, &node_id((i * 7 + 3) % 20), w)
            .unwrap();
    }
    let g = b.build();
    ensure!(
        g.edge_count() == 50,
        "expected 50 edges, built {}",
        g.edge_count()
    );
    let t = table();
    let thetas = [0.0, 0.3, 0.5, 0.7, 1.0];

    let members = |theta: f64| -> Result<BTreeSet<usize>, String> {
        let view = build_causal_view(&g, &t, theta).map_err(|e| e.to_string())?;
        Ok(view.member_edges().map(|e| e.index()).collect())
    };
    let all: BTreeSet<usize> = (0..g.edge_count()).collect();
    let sets: Vec<BTreeSet<usize>> = thetas
        .iter()
        .map(|&th| members(th))
        .collect::<Result<_, _>>()?;
    ensure!(sets[0] == all, "theta 0 view is not the whole graph");
    for (i, s) in sets.iter().enumerate() {
        ensure!(
            s.is_subset(&all),
            "view at {} has edges outside the graph",
            thetas[i]
        );
        let expected: BTreeSet<usize> = g
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| PREDICATES.iter().find(|p| p.0 == e.predicate).unwrap().1 >= thetas[i])
            .map(|(ix, _)| ix)
            .collect();
        ensure!(
            *s == expected,
            "membership at theta {} differs from the threshold rule",
            thetas[i]
        );
    }
    for w in sets.windows(2) {
        ensure!(w[1].is_subset(&w[0]), "views are not nested");
    }

    // same sweep in exact arithmetic
    let gx = g.map_scalar::<Rational>().map_err(|e| e.to_string())?;
    let tx =
        CausalityTable::<Rational>::from_f64(PREDICATES.iter().take(6).copied(), 0.05).unwrap();
    for (i, &th) in thetas.iter().enumerate() {
        let th = <Rational as cgrag::Scalar>::from_f64(th).unwrap();
        let v = build_causal_view(&gx, &tx, th).map_err(|e| e.to_string())?;
        let s: BTreeSet<usize> = v.member_edges().map(|e| e.index()).collect();
        ensure!(s == sets[i], "exact view differs at theta {}", thetas[i]);
    }
    Ok(())
}

// ---------------------------------------------------------------------------

/// Independent enumerator: grows edge sequences one level at a time by
/// scanning the whole edge list, keeping only simple ones.
fn oracle_paths(
    g: &KnowledgeGraph<f64>,
    keep: &dyn Fn(usize) -> bool,
    a: NodeIx,
    b: NodeIx,
    max_hops: usize,
) -> Vec<Vec<usize>> {
    let edges = g.edges();
    let mut done = Vec::new();
    let mut frontier: Vec<(Vec<usize>, Vec<NodeIx>)> = vec![(Vec::new(), vec![a])];
    for _ in 0..max_hops {
        let mut next = Vec::new();
        for (seq, visited) in &frontier {
            let last = *visited.last().unwrap();
            for (ix, e) in edges.iter().enumerate() {
                if e.subject != last || !keep(ix) || visited.contains(&e.object) {
                    continue;
                }
                let mut s = seq.clone();
                s.push(ix);
                if e.object == b {
                    done.push(s);
                } else {
                    let mut v = visited.clone();
                    v.push(e.object);
                    next.push((s, v));
                }
            }
        }
        frontier = next;
    }
    done
}

fn weight_of(pred: &str) -> f64 {
    PREDICATES.iter().find(|p| p.0 == pred).unwrap().1
}

type PathKey = (Vec<usize>, Tier, bool);

/// Oracle for the tiered search: returns (key, score) per path, in order.
fn oracle_find(
    g: &KnowledgeGraph<f64>,
    theta: f64,
    from: &[NodeIx],
    to: &[NodeIx],
    max_hops: usize,
) -> Vec<(PathKey, f64)> {
    let causal = |ix: usize| weight_of(&g.edges()[ix].predicate) >= theta;
    let any = |_: usize| true;
    let run = |keep: &dyn Fn(usize) -> bool, tier: Tier| {
        let mut out: Vec<(PathKey, f64)> = Vec::new();
        let mut seen = HashSet::new();
        for &a in from {
            for &b in to {
                if a == b {
                    continue;
                }
                let mut found = oracle_paths(g, keep, a, b, max_hops);
                let mut rev = false;
                if found.is_empty() {
                    found = oracle_paths(g, keep, b, a, max_hops);
                    rev = true;
                }
                for seq in found {
                    if seen.insert(seq.clone()) {
                        let sum: f64 = seq
                            .iter()
                            .map(|&ix| weight_of(&g.edges()[ix].predicate))
                            .sum();
                        let score = sum / seq.len() as f64;
                        out.push(((seq, tier, rev), score));
                    }
                }
            }
        }
        out
    };
    let c = run(&causal, Tier::Causal);
    if c.is_empty() {
        run(&any, Tier::Fallback)
    } else {
        c
    }
}

struct Case {
    graph: RandomGraph,
    theta: f64,
    max_hops: usize,
    from: Vec<usize>,
    to: Vec<usize>,
}

fn random_cases(n: usize) -> Vec<Case> {
    let strategy = random_graph(12, 30).prop_flat_map(|graph| {
        let nodes = graph.nodes;
        (
            Just(graph),
            prop::sample::select(vec![0.0, 0.3, 0.5, 0.6, 0.7, 0.85, 1.0]),
            1usize..=4,
            prop::collection::btree_set(0..nodes, 1..=3),
            prop::collection::btree_set(0..nodes, 1..=3),
        )
    });
    let mut runner = TestRunner::deterministic();
    (0..n)
        .map(|_| {
            let (graph, theta, max_hops, from, to) = sample(&strategy, &mut runner);
            Case {
                graph,
                theta,
                max_hops,
                from: from.into_iter().collect(),
                to: to.into_iter().collect(),
            }
        })
        .collect()
}

use proptest::prelude::{prop, Just};

fn path_key(p: &Path<f64>) -> PathKey {
    (
        p.edges.iter().map(|e| e.index()).collect(),
        p.tier,
        p.reversed,
    )
}

fn oracle_equivalence() -> Check {
    let t = table();
    for (n, case) in random_cases(200).iter().enumerate() {
        let g = case.graph.build();
        let view = build_causal_view(&g, &t, case.theta).map_err(|e| e.to_string())?;
        let cfg = RetrievalConfig {
            max_hops: case.max_hops,
            ..RetrievalConfig::default()
        };
        let found = find_paths(&view, &id_set(&case.from), &id_set(&case.to), &cfg, 0)
            .map_err(|e| format!("case {n}: {e}"))?;
        let from: Vec<NodeIx> = case
            .from
            .iter()
            .map(|&i| g.node_ix(&node_id(i)).unwrap())
            .collect();
        let to: Vec<NodeIx> = case
            .to
            .iter()
            .map(|&i| g.node_ix(&node_id(i)).unwrap())
            .collect();
        let expected = oracle_find(&g, case.theta, &from, &to, case.max_hops);

        let got: BTreeMap<PathKey, f64> = found
            .paths
            .iter()
            .map(|p| (path_key(p), p.path_score))
            .collect();
        let want: BTreeMap<PathKey, f64> = expected.iter().cloned().collect();
        ensure!(
            got.len() == found.paths.len(),
            "case {n}: duplicate paths in output"
        );
        ensure!(
            got.keys().collect::<Vec<_>>() == want.keys().collect::<Vec<_>>(),
            "case {n}: path sets differ: got {} want {} ({:?})",
            got.len(),
            want.len(),
            case.graph
        );
        for (k, s) in &got {
            ensure!(
                (s - want[k]).abs() <= 1e-12,
                "case {n}: score {s} vs oracle {}",
                want[k]
            );
        }
        for p in &found.paths {
            ensure!(
                p.len() <= case.max_hops && !p.has_repeated_node(),
                "case {n}: path not simple or too long"
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn causal_first() -> Check {
    let t = table();
    let mut b = GraphBuilder::<f64>::new();
    for id in ["A", "B", "C", "D", "E"] {
        b.add_node(id, id, ["dsyn"]).unwrap();
    }
    b.add_edge("A", "CAUSES", "B", 0.9).unwrap();
    b.add_edge("B", "PREDISPOSES", "C", 0.8).unwrap();
    b.add_edge("A", "ASSOCIATED_WITH", "C", 0.2).unwrap();
    b.add_edge("C", "COEXISTS_WITH", "D", 0.15).unwrap();
    b.add_edge("E", "ASSOCIATED_WITH", "D", 0.2).unwrap();
    let g = b.build();
    let view = build_causal_view(&g, &t, 0.5).unwrap();
    let cfg = RetrievalConfig::default();
    let set = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();

    let r = find_paths(&view, &set(&["A"]), &set(&["C"]), &cfg, 0).map_err(|e| e.to_string())?;
    ensure!(r.tier == Some(Tier::Causal), "A to C should stay causal");
    ensure!(
        r.paths.len() == 1,
        "A to C: expected one causal path, got {}",
        r.paths.len()
    );
    ensure!(
        r.paths[0].canonical == "A>B>C",
        "A to C: got {}",
        r.paths[0].canonical
    );
    ensure!(
        r.paths.iter().all(|p| p.tier == Tier::Causal),
        "fallback path leaked"
    );

    let r = find_paths(&view, &set(&["A"]), &set(&["D"]), &cfg, 0).map_err(|e| e.to_string())?;
    ensure!(r.tier == Some(Tier::Fallback), "A to D should fall back");
    ensure!(
        !r.paths.is_empty() && r.paths.iter().all(|p| p.tier == Tier::Fallback),
        "A to D paths must be fallback"
    );

    // one causally connected pair keeps the whole pair set in the causal tier
    let r = find_paths(&view, &set(&["A", "E"]), &set(&["C", "D"]), &cfg, 0)
        .map_err(|e| e.to_string())?;
    ensure!(r.tier == Some(Tier::Causal), "mixed pair set fell back");
    ensure!(
        r.paths.iter().all(|p| p.tier == Tier::Causal),
        "mixed pair set returned fallback paths"
    );

    let r =
        find_paths(&view, &BTreeSet::new(), &set(&["C"]), &cfg, 0).map_err(|e| e.to_string())?;
    ensure!(
        r.paths.is_empty() && r.reason == Some(Reason::NoEntities),
        "empty set must give no-entities"
    );
    ensure!(
        matches!(
            find_paths(&view, &set(&["Z"]), &set(&["C"]), &cfg, 0),
            Err(Error::NotFound(_))
        ),
        "unknown id must be not-found"
    );

    for (n, case) in random_cases(200).iter().enumerate() {
        let g = case.graph.build();
        let view = build_causal_view(&g, &t, case.theta).unwrap();
        let cfg = RetrievalConfig {
            max_hops: case.max_hops,
            ..cfg
        };
        let r = find_paths(&view, &id_set(&case.from), &id_set(&case.to), &cfg, 0)
            .map_err(|e| e.to_string())?;
        let from: Vec<NodeIx> = case
            .from
            .iter()
            .map(|&i| g.node_ix(&node_id(i)).unwrap())
            .collect();
        let to: Vec<NodeIx> = case
            .to
            .iter()
            .map(|&i| g.node_ix(&node_id(i)).unwrap())
            .collect();
        let causal_exists = !find_paths_in(&view, Tier::Causal, &from, &to, case.max_hops, 0)
            .unwrap()
            .is_empty();
        for p in &r.paths {
            match p.tier {
                Tier::Causal => {
                    ensure!(
                        p.path_score >= case.theta,
                        "case {n}: causal path score {} below theta {}",
                        p.path_score,
                        case.theta
                    );
                    ensure!(
                        p.edges.iter().all(|&e| view.contains(e)),
                        "case {n}: causal path leaves the view"
                    );
                }
                Tier::Fallback => ensure!(
                    !causal_exists,
                    "case {n}: fallback path despite causal paths"
                ),
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn scoring_identities() -> Check {
    let r = |n: i64, d: i64| Rational::new(n, d);
    let mut b = GraphBuilder::<Rational>::new();
    b.add_node("C1", "one", ["dsyn"]).unwrap();
    b.add_node("C2", "two", ["neop"]).unwrap();
    b.add_node("C9", "nine", ["dsyn"]).unwrap();
    b.add_node("C3", "three", ["phsu"]).unwrap();
    b.add_node("C4", "four", ["phsu"]).unwrap();
    b.add_node("C5", "five", Vec::<String>::new()).unwrap();
    b.add_edge("C1", "CAUSES", "C2", r(9, 10)).unwrap();
    b.add_edge("C2", "CAUSES", "C9", r(9, 10)).unwrap();
    b.add_edge("C3", "CAUSES", "C5", r(9, 10)).unwrap();
    let g = b.build();
    let t = CausalityTable::<Rational>::from_f64([("CAUSES", 0.9)], 0.05).unwrap();
    let view = build_causal_view(&g, &t, r(1, 2)).unwrap();
    let ix = |id: &str| g.node_ix(id).unwrap();
    let paths = find_paths_in(&view, Tier::Causal, &[ix("C1")], &[ix("C9")], 3, 0).unwrap();
    ensure!(
        paths.len() == 1 && paths[0].len() == 2,
        "expected the path C1>C2>C9"
    );
    let path = &paths[0];

    let ids = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    ensure!(
        cui_overlap(&ids(&["C1", "C2", "C3", "C4"]), path, &g).unwrap() == r(1, 2),
        "cui overlap is not 1/2"
    );
    ensure!(
        cui_overlap(&ids(&["C3", "C4"]), path, &g)
            .unwrap()
            .is_zero(),
        "disjoint cui overlap is not 0"
    );
    ensure!(
        cui_overlap(&ids(&["C1", "C9"]), path, &g).unwrap().is_one(),
        "covering cui overlap is not 1"
    );
    ensure!(
        cui_overlap(&BTreeSet::new(), path, &g).is_err(),
        "empty query cui set accepted"
    );

    let types = ids(&["dsyn", "phsu"]);
    ensure!(
        semantic_overlap(&types, path, &g) == r(1, 2),
        "semantic overlap is not 1/2"
    );
    ensure!(
        semantic_overlap(&ids(&["dsyn", "neop"]), path, &g).is_one(),
        "identical type sets must give 1"
    );
    let bare = find_paths_in(&view, Tier::Causal, &[ix("C3")], &[ix("C5")], 3, 0).unwrap();
    ensure!(
        semantic_overlap(&ids(&["neop"]), &bare[0], &g).is_zero(),
        "untyped path must give 0"
    );

    ensure!(lh_score::<Rational>(1) == r(1, 2), "lh(1) != 1/2");
    ensure!(lh_score::<Rational>(3) == r(1, 4), "lh(3) != 1/4");
    ensure!(lh_score::<Rational>(0).is_one(), "lh(0) != 1");

    let cfg = EnhancerConfig::new(r(2, 5), r(3, 10), r(3, 10), r(2, 5)).unwrap();
    ensure!(
        total_score(r(1, 2), Rational::one(), r(1, 4), &cfg) == r(23, 40),
        "total score is not 0.575"
    );
    ensure!(
        total_score(Rational::zero(), Rational::zero(), Rational::zero(), &cfg).is_zero(),
        "zero components must give 0"
    );
    let alpha_only =
        EnhancerConfig::new(Rational::one(), Rational::zero(), Rational::zero(), r(2, 5)).unwrap();
    ensure!(
        total_score(r(3, 7), r(1, 3), r(1, 4), &alpha_only) == r(3, 7),
        "alpha=1 must return cui overlap"
    );
    let f = EnhancerConfig::<f64>::from_f64(0.4, 0.3, 0.3, 0.4).unwrap();
    ensure!(
        total_score(0.5, 1.0, 0.25, &f) == 0.575,
        "f64 total score {}",
        total_score(0.5, 1.0, 0.25, &f)
    );

    ensure!(keep_count(10, r(3, 10)) == 3, "keep_count(10, 0.3) != 3");
    ensure!(keep_count(1, r(1, 10)) == 1, "keep_count(1, 0.1) != 1");
    ensure!(keep_count(0, r(1, 2)) == 0, "keep_count(0, _) != 0");
    ensure!(keep_count(7, Rational::one()) == 7, "keep_count(7, 1) != 7");

    ensure!(
        EnhancerConfig::new(r(1, 2), r(3, 10), r(3, 10), r(2, 5)).is_err(),
        "weights summing to 1.1 accepted"
    );
    let bad = PipelineConfig::from_toml(
        "[enhancer]\nalpha = 0.5\nbeta = 0.3\ngamma = 0.3\nkeep_ratio = 0.4\n",
    );
    ensure!(
        matches!(bad, Err(Error::Validation(_))),
        "config load accepted alpha+beta+gamma = 1.1"
    );
    ensure!(
        PipelineConfig::from_toml("[enhancer]\nkeep_ratio = 0.0\n").is_err(),
        "keep_ratio 0 accepted"
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn fusion_oracle_order(a: &Path<f64>, b: &Path<f64>) -> Ordering {
    b.path_score
        .partial_cmp(&a.path_score)
        .unwrap()
        .then(a.edges.len().cmp(&b.edges.len()))
        .then_with(|| a.canonical.cmp(&b.canonical))
        .then_with(|| a.edges.cmp(&b.edges))
}

fn fusion_correctness() -> Check {
    let strategy = random_graph(8, 20)
        .prop_flat_map(|graph| (Just(graph), prop::collection::vec(0usize..1000, 0..40)));
    let mut runner = TestRunner::deterministic();
    for n in 0..300 {
        let (rg, picks) = sample(&strategy, &mut runner);
        let g = rg.build();
        let all: Vec<NodeIx> = (0..g.node_count())
            .map(|i| g.node_ix(&node_id(i)).unwrap())
            .collect();
        let pool = find_paths_in(&g, Tier::Fallback, &all, &all, 3, 0).unwrap();
        if pool.is_empty() {
            continue;
        }
        let input: Vec<Path<f64>> = picks
            .iter()
            .map(|&i| pool[i % pool.len()].clone())
            .collect();
        let fused = fuse_paths(input.clone());

        let distinct: BTreeSet<Vec<_>> = input.iter().map(|p| p.edges.clone()).collect();
        let total: usize = fused.iter().map(|f| f.merge_count).sum();
        ensure!(
            total == distinct.len(),
            "case {n}: merge counts sum to {total}, expected {}",
            distinct.len()
        );

        let key = |p: &Path<f64>| {
            let inner: BTreeSet<NodeIx> = p.nodes[1..p.nodes.len() - 1].iter().copied().collect();
            (p.nodes[0], *p.nodes.last().unwrap(), inner)
        };
        let keys: Vec<_> = fused.iter().map(|f| key(&f.path)).collect();
        let unique: BTreeSet<_> = keys.iter().cloned().collect();
        ensure!(unique.len() == keys.len(), "case {n}: merge keys repeat");

        for f in &fused {
            let k = key(&f.path);
            let mut group: Vec<&Path<f64>> = Vec::new();
            let mut seen = HashSet::new();
            for p in &input {
                if key(p) == k && seen.insert(p.edges.clone()) {
                    group.push(p);
                }
            }
            ensure!(
                group.len() == f.merge_count,
                "case {n}: merge_count {} vs group {}",
                f.merge_count,
                group.len()
            );
            let best = group
                .iter()
                .min_by(|a, b| fusion_oracle_order(a, b))
                .unwrap();
            ensure!(
                **best == f.path,
                "case {n}: representative is not the group maximum"
            );
        }
    }
    ensure!(
        fuse_paths(Vec::<Path<f64>>::new()).is_empty(),
        "empty input must fuse to nothing"
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn cot_round_trip() -> Check {
    let segment = "[A-Za-z][A-Za-z0-9 ,.'()=+-]{0,18}[A-Za-z0-9)]";
    let strategy = (
        prop::collection::vec(segment, 1..=8),
        prop::option::of(0u8..=100),
    );
    let mut runner = TestRunner::deterministic();
    for n in 0..1000 {
        let (segments, confidence) = sample(&strategy, &mut runner);
        let segments: Vec<String> = segments
            .into_iter()
            .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
            .collect();
        let cot = ChainOfThought {
            raw: String::new(),
            segments: segments.clone(),
            confidence,
            warnings: Vec::new(),
        };
        for arrow in ["→", "->"] {
            let text = cot.render_with(arrow);
            let parsed = parse_cot(&text).map_err(|e| format!("case {n}: {e} on {text:?}"))?;
            ensure!(
                parsed.segments == segments,
                "case {n}: segments differ for {text:?}"
            );
            ensure!(
                parsed.confidence == confidence,
                "case {n}: confidence differs for {text:?}"
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn mock_end_to_end() -> Check {
    let transcript = std::fs::read_to_string(toy_dir().join("transcript.jsonl")).unwrap();
    let required: BTreeMap<usize, String> = transcript
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<TranscriptEntry>(l).unwrap())
        .filter(|e| e.stage == Stage::Infer)
        .map(|e| (e.ordinal, e.requires[0].clone()))
        .collect();

    let mut evidence: BTreeMap<AblationMode, Vec<Option<String>>> = BTreeMap::new();
    for mode in AblationMode::ALL {
        let first = run_toy(mode);
        let second = run_toy(mode);
        ensure!(
            first.to_json() == second.to_json(),
            "{mode}: reports differ between runs"
        );
        ensure!(
            first.records.len() == 10 && first.unmapped == 0,
            "{mode}: expected 10 mapped items"
        );
        for r in &first.records {
            ensure!(r.error.is_none(), "{mode} {}: {:?}", r.id, r.error);
            ensure!(
                r.trace.call_counts() == mode.expected_calls(),
                "{mode} {}: calls {:?}, expected {:?}",
                r.id,
                r.trace.call_counts(),
                mode.expected_calls()
            );
        }
        if mode == AblationMode::Full {
            let correct = first.records.iter().filter(|r| r.correct).count();
            ensure!(correct == 10, "full mode answered {correct}/10 correctly");
            ensure!(
                first.metrics.macro_f1 == 1.0,
                "full mode macro F1 {}",
                first.metrics.macro_f1
            );
            for (i, r) in first.records.iter().enumerate() {
                let order: Vec<Stage> = r.trace.calls.iter().map(|c| c.stage).collect();
                ensure!(
                    order == [Stage::Cot, Stage::Enhance, Stage::Infer],
                    "{}: stage order {order:?}",
                    r.id
                );
                let needed = &required[&i];
                ensure!(
                    r.trace
                        .final_paths
                        .iter()
                        .any(|p| p.tier == Tier::Causal && &p.rendered == needed),
                    "{}: answer does not rest on a retrieved causal path",
                    r.id
                );
            }
        }
        evidence.insert(
            mode,
            first
                .records
                .iter()
                .map(|r| r.trace.evidence.clone())
                .collect(),
        );
    }
    let differs = evidence[&AblationMode::NoEnhancer]
        .iter()
        .zip(&evidence[&AblationMode::NoLlmEnhanced])
        .any(|(a, b)| a != b);
    ensure!(
        differs,
        "no-enhancer and no-llm-enhanced sent identical evidence for every item"
    );
    Ok(())
}

// ---------------------------------------------------------------------------

/// Confusion-matrix metrics in exact arithmetic; class 3 is abstain.
fn oracle_metrics(gold: &[usize], pred: &[usize]) -> (Rational, Rational, Rational, Rational) {
    let mut m = [[0i64; 4]; 3];
    for (&g, &p) in gold.iter().zip(pred) {
        m[g][p] += 1;
    }
    let (mut sp, mut sr, mut sf, mut k) = (Rational::zero(), Rational::zero(), Rational::zero(), 0);
    for c in 0..3 {
        let support: i64 = m[c].iter().sum();
        if support == 0 {
            continue;
        }
        k += 1;
        let predicted: i64 = (0..3).map(|g| m[g][c]).sum();
        let tp = m[c][c];
        let p = if predicted == 0 {
            Rational::zero()
        } else {
            Rational::new(tp, predicted)
        };
        let r = Rational::new(tp, support);
        let f = if (p + r).is_zero() {
            Rational::zero()
        } else {
            Rational::from_integer(2) * p * r / (p + r)
        };
        sp += p;
        sr += r;
        sf += f;
    }
    let k = Rational::from_integer(k);
    let correct = (0..3).map(|c| m[c][c]).sum::<i64>();
    (
        sp / k,
        sr / k,
        sf / k,
        Rational::new(correct, gold.len() as i64),
    )
}

const LABELS: [&str; 3] = ["A", "B", "C"];

fn check_metrics(gold: &[usize], pred: &[usize]) -> Check {
    let pairs: Vec<(&str, Option<&str>)> = gold
        .iter()
        .zip(pred)
        .map(|(&g, &p)| (LABELS[g], LABELS.get(p).copied()))
        .collect();
    let m = compute_metrics::<Rational>(&pairs).map_err(|e| e.to_string())?;
    let want = oracle_metrics(gold, pred);
    ensure!(
        (m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy) == want,
        "gold {gold:?} pred {pred:?}: got {:?} want {want:?}",
        (m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy)
    );
    ensure!(
        m.abstain_count == pred.iter().filter(|&&p| p == 3).count(),
        "abstain count wrong"
    );
    Ok(())
}

/// Advances a non-decreasing vector over `0..base`; false after the last one.
fn next_multiset(v: &mut [usize], base: usize) -> bool {
    match v.iter().rposition(|&x| x + 1 < base) {
        Some(i) => {
            let next = v[i] + 1;
            v[i..].iter_mut().for_each(|x| *x = next);
            true
        }
        None => false,
    }
}

/// Calls `f` on every vector of length `len` over `0..base`.
fn each_vector(len: usize, base: usize, f: &mut dyn FnMut(&[usize]) -> Check) -> Check {
    let mut v = vec![0usize; len];
    loop {
        f(&v)?;
        let mut i = 0;
        loop {
            if i == len {
                return Ok(());
            }
            v[i] += 1;
            if v[i] < base {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

fn metrics_oracle() -> Check {
    let pairs = [
        ("A", Some("A")),
        ("A", Some("B")),
        ("B", Some("B")),
        ("B", Some("B")),
    ];
    let m = compute_metrics::<Rational>(&pairs).map_err(|e| e.to_string())?;
    ensure!(
        m.macro_precision == Rational::new(5, 6),
        "worked example precision {}",
        m.macro_precision
    );
    ensure!(
        m.macro_recall == Rational::new(3, 4),
        "worked example recall {}",
        m.macro_recall
    );
    ensure!(
        m.macro_f1 == Rational::new(11, 15),
        "worked example F1 {}",
        m.macro_f1
    );
    ensure!(
        oracle_metrics(&[0, 0, 1, 1], &[0, 1, 1, 1]).0 == Rational::new(5, 6),
        "oracle disagrees with the worked example"
    );
    ensure!(
        compute_metrics::<Rational>(&[]).is_err(),
        "empty records accepted"
    );

    // every ordered (gold, predicted) pair of vectors up to length 5,
    // abstain included as a fourth predicted class
    for len in 1..=5 {
        each_vector(len, 3, &mut |gold| {
            each_vector(len, 4, &mut |pred| check_metrics(gold, pred))
        })?;
    }
    // lengths 6 to 8: every multiset of (gold, predicted) outcomes with
    // abstain included, each checked in two element orders
    for len in 6..=8 {
        let mut outcomes = vec![0usize; len];
        loop {
            let gold: Vec<usize> = outcomes.iter().map(|o| o / 4).collect();
            let pred: Vec<usize> = outcomes.iter().map(|o| o % 4).collect();
            check_metrics(&gold, &pred)?;
            let (mut g2, mut p2) = (gold.clone(), pred.clone());
            g2.rotate_left(len / 2);
            p2.rotate_left(len / 2);
            g2.reverse();
            p2.reverse();
            check_metrics(&g2, &p2)?;
            if !next_multiset(&mut outcomes, 12) {
                break;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn strength_updates() -> Check {
    let t = table();
    let mut b = GraphBuilder::<f64>::new();
    for id in ["A", "B", "C", "D"] {
        b.add_node(id, id, ["dsyn"]).unwrap();
    }
    b.add_edge("A", "CAUSES", "B", 0.9).unwrap();
    b.add_edge("B", "ASSOCIATED_WITH", "C", 0.2).unwrap();
    b.add_edge("C", "TREATS", "D", 0.7).unwrap();
    b.add_edge("D", "COEXISTS_WITH", "A", 0.15).unwrap();
    let g = b.build();
    let view = build_causal_view(&g, &t, 0.5).unwrap();
    let e = |s: &str, p: &str, o: &str| g.find_edge(s, p, o).unwrap();
    let up = |s: &str, p: &str, o: &str, v: f64| StrengthUpdate {
        subject: s.into(),
        predicate: p.into(),
        object: o.into(),
        strength: v,
    };

    let (added, sum) = view
        .apply_strength_updates(&[up("B", "ASSOCIATED_WITH", "C", 0.8)])
        .map_err(|e| e.to_string())?;
    ensure!(sum.added == 1, "add case summary {sum:?}");
    ensure!(
        added.contains(e("B", "ASSOCIATED_WITH", "C")),
        "added edge missing from view"
    );
    ensure!(
        added.strength(e("B", "ASSOCIATED_WITH", "C")) == 0.8,
        "added edge strength is not 0.8"
    );

    let (demoted, sum) = view
        .apply_strength_updates(&[up("A", "CAUSES", "B", 0.3)])
        .map_err(|e| e.to_string())?;
    ensure!(sum.demoted == 1, "demote case summary {sum:?}");
    ensure!(
        !demoted.contains(e("A", "CAUSES", "B")),
        "demoted edge still in view"
    );
    ensure!(
        g.find_edge("A", "CAUSES", "B").is_some() && g.edge_count() == 4,
        "base graph changed"
    );

    let (revised, sum) = view
        .apply_strength_updates(&[up("C", "TREATS", "D", 0.6)])
        .map_err(|e| e.to_string())?;
    ensure!(sum.revised == 1, "revise case summary {sum:?}");
    ensure!(
        revised.contains(e("C", "TREATS", "D")) && revised.strength(e("C", "TREATS", "D")) == 0.6,
        "revised strength not applied"
    );

    let unknown = view.apply_strength_updates(&[up("A", "CAUSES", "D", 0.9)]);
    ensure!(
        matches!(unknown, Err(Error::NotFound(_))),
        "unknown triple did not give not-found"
    );
    ensure!(
        view.apply_strength_updates(&[up("A", "CAUSES", "B", 1.2)])
            .is_err(),
        "strength 1.2 accepted"
    );

    let batch = [
        up("B", "ASSOCIATED_WITH", "C", 0.8),
        up("A", "CAUSES", "B", 0.3),
        up("C", "TREATS", "D", 0.6),
        up("D", "COEXISTS_WITH", "A", 0.1),
    ];
    let (once, _) = view
        .apply_strength_updates(&batch)
        .map_err(|e| e.to_string())?;
    let (twice, _) = once
        .apply_strength_updates(&batch)
        .map_err(|e| e.to_string())?;
    ensure!(
        once == twice,
        "re-applying the same updates changed the view"
    );
    for v in [&added, &demoted, &revised, &once] {
        for m in v.member_edges() {
            ensure!(
                v.strength(m) >= v.theta(),
                "member edge below theta after update"
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            name: "causal view is monotone in theta on a 50-edge graph",
            limit: Some(Duration::from_secs(1)),
            check: monotonicity,
        },
        Criterion {
            name: "path search matches brute-force enumeration on 200 random graphs",
            limit: Some(Duration::from_secs(30)),
            check: oracle_equivalence,
        },
        Criterion {
            name: "fallback tier only when the causal tier is empty; causal scores >= theta",
            limit: None,
            check: causal_first,
        },
        Criterion {
            name: "overlap, length, total score and keep-count identities (exact)",
            limit: None,
            check: scoring_identities,
        },
        Criterion {
            name: "path fusion keys, merge counts and representatives",
            limit: None,
            check: fusion_correctness,
        },
        Criterion {
            name: "chain-of-thought render/parse round trip for both arrows",
            limit: None,
            check: cot_round_trip,
        },
        Criterion {
            name: "mock end-to-end over four modes on the toy fixture",
            limit: Some(Duration::from_secs(10)),
            check: mock_end_to_end,
        },
        Criterion {
            name: "metrics equal an independent confusion-matrix oracle",
            limit: None,
            check: metrics_oracle,
        },
        Criterion {
            name: "strength updates add, revise, demote, reject unknown, idempotent",
            limit: None,
            check: strength_updates,
        },
    ];

    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(()), Some(limit)) if elapsed > limit => {
                Err(format!("took {elapsed:?}, limit {limit:?}"))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(()) => println!("PASS  {}  ({} ms)", c.name, elapsed.as_millis()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}  ({} ms): {why}", c.name, elapsed.as_millis());
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
