#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use cgrag::causal::{build_causal_view, CausalityTable};
use cgrag::config::PipelineConfig;
use cgrag::eval::{load_dataset, run_evaluation, AblationMode, EvaluationReport, Pipeline};
use cgrag::graph::{ingest_triples, GraphBuilder, KnowledgeGraph};
use cgrag::linker::LinkerIndex;
use cgrag::llm::{LlmGateway, MockBackend};
use proptest::prelude::*;

pub const PREDICATES: [(&str, f64); 7] = [
    ("CAUSES", 0.9),
    ("PREDISPOSES", 0.8),
    ("TREATS", 0.7),
    ("AFFECTS", 0.6),
    ("ASSOCIATED_WITH", 0.2),
    ("COEXISTS_WITH", 0.15),
    ("INTERACTS_WITH", 0.05),
];

pub fn table() -> CausalityTable<f64> {
    CausalityTable::from_f64(PREDICATES.iter().take(6).copied(), 0.05).unwrap()
}

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

pub fn toy_config() -> PipelineConfig {
    PipelineConfig::load(&toy_dir().join("config.toml")).unwrap()
}

pub fn toy_graph(config: &PipelineConfig) -> KnowledgeGraph<f64> {
    let file = File::open(toy_dir().join("triples.tsv")).unwrap();
    ingest_triples(BufReader::new(file), &config.table().unwrap())
        .unwrap()
        .0
}

/// Runs the toy dataset through one mode with a fresh transcript replay.
pub fn run_toy(mode: AblationMode) -> EvaluationReport {
    let config = toy_config();
    let graph = toy_graph(&config);
    let view = build_causal_view(&graph, &config.table().unwrap(), config.theta).unwrap();
    let linker = LinkerIndex::build(&graph);
    let gateway = LlmGateway::mock(MockBackend::load(&toy_dir().join("transcript.jsonl")).unwrap());
    let pipeline = Pipeline::new(&view, &linker, &gateway, &config).unwrap();
    let items = load_dataset(&toy_dir().join("dataset.jsonl")).unwrap();
    run_evaluation(&pipeline, &items, mode, &config).unwrap()
}

/// A small random multigraph: edges as (subject, predicate index, object).
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, usize)>,
}

pub fn node_id(i: usize) -> String {
    format!("N{i:02}")
}

impl RandomGraph {
    /// Builds the graph with strengths taken from the predicate weights, as
    /// ingestion does.
    pub fn build(&self) -> KnowledgeGraph<f64> {
        let mut b = GraphBuilder::new();
        for i in 0..self.nodes {
            b.add_node(&node_id(i), &format!("node {i}"), ["dsyn"])
                .unwrap();
        }
        for &(s, p, o) in &self.edges {
            let (pred, w) = PREDICATES[p];
            b.add_edge(&node_id(s), pred, &node_id(o), w).unwrap();
        }
        b.build()
    }
}

pub fn random_graph(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = RandomGraph> {
    (2..=max_nodes).prop_flat_map(move |n| {
        prop::collection::vec((0..n, 0..PREDICATES.len(), 0..n), 0..=max_edges)
            .prop_map(move |edges| RandomGraph { nodes: n, edges })
    })
}

pub fn id_set(ixs: &[usize]) -> BTreeSet<String> {
    ixs.iter().map(|&i| node_id(i)).collect()
}
