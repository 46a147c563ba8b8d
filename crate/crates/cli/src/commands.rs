use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use cgrag::causal::{build_causal_view, parse_updates, theta_sweep, CausalGraphView};
use cgrag::config::PipelineConfig;
use cgrag::eval::{load_dataset, render_summary, run_evaluation, Pipeline};
use cgrag::graph::{ingest_triples, read_artifact, write_artifact, EdgeView};
use cgrag::linker::LinkerIndex;
use cgrag::llm::{HttpBackend, LlmGateway, MockBackend, ModelAssignment, Stage, MOCK_MODEL};
use cgrag::prompt::AnswerOptions;
use cgrag::{Error, Graph, Result};
use log::info;

use crate::{GlobalArgs, RunArgs};

/// Adds the file name to I/O errors.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    at(
        path,
        File::open(path).map(BufReader::new).map_err(Error::from),
    )
}

/// Config file (or defaults) with command-line overrides applied.
fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => at(path, PipelineConfig::load(path))?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&g.overrides())?;
    Ok(cfg)
}

fn load_graph(path: &Path) -> Result<Graph> {
    read_artifact(open(path)?)
}

fn build_view<'g>(
    graph: &'g Graph,
    cfg: &PipelineConfig,
    updates: Option<&Path>,
) -> Result<CausalGraphView<'g, f64>> {
    let view = build_causal_view(graph, &cfg.table()?, cfg.theta_as()?)?;
    let Some(path) = updates else {
        return Ok(view);
    };
    let list = parse_updates(open(path)?)?;
    let (view, summary) = view.apply_strength_updates(&list)?;
    info!(
        "strength updates: added {} revised {} demoted {} unchanged {}",
        summary.added, summary.revised, summary.demoted, summary.unchanged
    );
    Ok(view)
}

fn build_linker(graph: &Graph, cfg: &PipelineConfig) -> Result<LinkerIndex> {
    let mut linker = LinkerIndex::build(graph);
    if let Some(path) = &cfg.alias_file {
        let n = linker.merge_alias_file(graph, open(path)?)?;
        info!("merged {n} aliases from {}", path.display());
    }
    Ok(linker)
}

/// A transcript replaces every stage; otherwise the live endpoint is used
/// and the placeholder model name is refused.
fn build_gateway(
    run: &RunArgs,
    models: &ModelAssignment,
    worker_limit: usize,
) -> Result<LlmGateway> {
    if let Some(path) = &run.mock_transcript {
        return Ok(LlmGateway::mock(at(path, MockBackend::load(path))?));
    }
    if Stage::ALL
        .iter()
        .any(|&s| models.model_for(s) == MOCK_MODEL)
    {
        return Err(Error::validation(format!(
            "model \"{MOCK_MODEL}\" needs --mock-transcript; set real models with --cot-model, --enhance-model and --infer-model"
        )));
    }
    Ok(LlmGateway::new(
        Box::new(HttpBackend::from_env()?),
        worker_limit,
    ))
}

pub fn build_graph(g: &GlobalArgs, triples: &Path, output: &Path) -> Result<()> {
    let cfg = resolve_config(g)?;
    let (graph, report) = ingest_triples::<f64, _>(open(triples)?, &cfg.table()?)?;
    let file = at(output, File::create(output).map_err(Error::from))?;
    at(output, write_artifact(&graph, BufWriter::new(file)))?;
    println!(
        "{graph} rows={} malformed={} duplicates={}",
        report.rows, report.malformed, report.duplicates
    );
    for (pred, count) in graph.predicate_histogram() {
        println!("  {pred:<24} {count}");
    }
    println!("wrote {}", output.display());
    Ok(())
}

fn parse_options(raw: &[String]) -> Result<AnswerOptions> {
    let pairs = raw
        .iter()
        .map(|o| {
            o.split_once('=')
                .map(|(l, t)| (l.to_string(), t.to_string()))
                .ok_or_else(|| Error::validation(format!("option {o:?} is not LABEL=TEXT")))
        })
        .collect::<Result<Vec<_>>>()?;
    AnswerOptions::new(pairs)
}

pub fn answer(
    g: &GlobalArgs,
    run: &RunArgs,
    question: &str,
    options: &[String],
    trace: bool,
) -> Result<()> {
    let cfg = resolve_config(g)?;
    let options = parse_options(options)?;
    if question.trim().is_empty() {
        return Err(Error::validation("question must be non-empty"));
    }
    let graph = load_graph(&run.graph)?;
    let view = build_view(&graph, &cfg, run.updates.as_deref())?;
    let linker = build_linker(&graph, &cfg)?;
    let gateway = build_gateway(run, &cfg.models, cfg.worker_limit)?;
    let pipeline = Pipeline::new(&view, &linker, &gateway, &cfg)?;

    let (outcome, t) = pipeline.answer(question, &options, run.mode);
    if trace {
        println!(
            "{}",
            serde_json::to_string_pretty(&t).expect("trace serializes")
        );
    }
    let label = outcome?;
    if !pipeline.is_mapped(&t.query_entities) {
        eprintln!("note: no linked concept of this question is in the causal subgraph");
    }
    if let Some(summary) = &t.summary {
        println!("summary: {summary}");
    }
    for p in &t.final_paths {
        println!("path: {}", p.rendered);
    }
    println!("answer: {}", label.as_deref().unwrap_or("abstain"));
    Ok(())
}

pub fn evaluate(g: &GlobalArgs, run: &RunArgs, dataset: &Path, report_path: &Path) -> Result<()> {
    let cfg = resolve_config(g)?;
    let items = at(dataset, load_dataset(dataset))?;
    let graph = load_graph(&run.graph)?;
    let view = build_view(&graph, &cfg, run.updates.as_deref())?;
    let linker = build_linker(&graph, &cfg)?;
    let gateway = build_gateway(run, &cfg.models, cfg.worker_limit)?;
    let pipeline = Pipeline::new(&view, &linker, &gateway, &cfg)?;

    let report = run_evaluation(&pipeline, &items, run.mode, &cfg)?;
    let mut out = at(report_path, File::create(report_path).map_err(Error::from))?;
    at(
        report_path,
        out.write_all(report.to_json().as_bytes())
            .map_err(Error::from),
    )?;
    print!("{}", render_summary(&report));
    if let Some(t) = report.timing {
        println!(
            "wall time  {} ms ({:.2} items/s)",
            t.wall_ms, t.items_per_second
        );
    }
    println!("report     {}", report_path.display());
    Ok(())
}

pub fn causal_stats(g: &GlobalArgs, graph_path: &Path, sweep: &[f64]) -> Result<()> {
    let cfg = resolve_config(g)?;
    let graph = load_graph(graph_path)?;
    let thetas: Vec<f64> = if sweep.is_empty() {
        (0..=10).map(|i| i as f64 / 10.0).collect()
    } else {
        sweep.to_vec()
    };
    let total = graph.edge_count();
    println!("{graph}");
    println!("theta   edges  share");
    for (theta, n) in theta_sweep(&graph, &cfg.table()?, &thetas)? {
        let mark = if theta == cfg.theta {
            "  <- configured"
        } else {
            ""
        };
        let share = if total == 0 {
            0.0
        } else {
            n as f64 / total as f64
        };
        println!("{theta:<6.2} {n:>6}  {:>5.1}%{mark}", 100.0 * share);
    }
    Ok(())
}

pub fn update_strengths(g: &GlobalArgs, graph_path: &Path, updates: &Path) -> Result<()> {
    let cfg = resolve_config(g)?;
    let graph = load_graph(graph_path)?;
    let view = build_causal_view(&graph, &cfg.table()?, cfg.theta_as()?)?;
    let list = parse_updates(open(updates)?)?;
    let (next, summary) = view.apply_strength_updates(&list)?;
    println!(
        "theta={} updates={} added={} revised={} demoted={} unchanged={}",
        cfg.theta,
        list.len(),
        summary.added,
        summary.revised,
        summary.demoted,
        summary.unchanged
    );
    println!("causal view edges: {} -> {}", view.len(), next.len());
    for (&e, s) in next.overrides() {
        let edge = graph.edge(e);
        let status = if next.contains(e) {
            "in view"
        } else {
            "out of view"
        };
        println!(
            "  {} {} {} = {s:.2} ({status})",
            graph.node(edge.subject).id,
            edge.predicate,
            graph.node(edge.object).id
        );
    }
    Ok(())
}
