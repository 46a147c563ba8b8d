//! Dataset runs, ablation modes and metrics.

mod dataset;
mod metrics;
mod pipeline;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::llm::Stage;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub use dataset::{load_dataset, read_dataset, QAItem};
pub use metrics::{compute_metrics, f1, LabelMetrics, Metrics, METRIC_DEFINITION};
pub use pipeline::{
    AblationMode, CallRecord, PathRecord, Pipeline, PredictionRecord, SegmentTrace, Trace,
    NO_COT_MARKER, NO_SUMMARY_MARKER,
};

/// Resolved settings of a run, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: AblationMode,
    pub mock: bool,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageUsage {
    pub calls: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: u64,
    pub items_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metric_definition: String,
    pub config: RunConfig,
    pub items: usize,
    pub evaluated: usize,
    /// Items excluded from metrics because none of their concepts reaches
    /// the causal subgraph.
    pub unmapped: usize,
    pub errors: usize,
    pub metrics: Metrics<f64>,
    pub usage: BTreeMap<Stage, StageUsage>,
    /// Wall-clock figures; left out of transcript runs so their reports
    /// stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    pub records: Vec<PredictionRecord>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn evaluate_item<S: Scalar>(
    p: &Pipeline<'_, S>,
    item: &QAItem,
    mode: AblationMode,
) -> PredictionRecord {
    let entities = p.query_entities(&item.question, &item.options);
    if p.is_mapped(&entities) {
        return p.run(item, mode);
    }
    let mut record = PredictionRecord {
        id: item.id.clone(),
        gold: item.gold.clone(),
        predicted: None,
        correct: false,
        unmapped: true,
        error: None,
        trace: Trace {
            mode,
            query_entities: entities,
            calls: Vec::new(),
            cot: None,
            segments: Vec::new(),
            fused_count: None,
            final_paths: Vec::new(),
            evidence: None,
            summary: None,
            notes: Vec::new(),
        },
    };
    record
        .trace
        .notes
        .push("excluded: no linked concept in the causal subgraph".into());
    record
}

/// Runs every item and scores the mapped ones. Transcript runs go one item
/// at a time in dataset order; live runs use up to `worker_limit` threads.
pub fn run_evaluation<S: Scalar>(
    pipeline: &Pipeline<'_, S>,
    items: &[QAItem],
    mode: AblationMode,
    config: &PipelineConfig,
) -> Result<EvaluationReport> {
    if items.is_empty() {
        return Err(Error::validation("dataset has no items"));
    }
    let mock = pipeline.gateway.is_mock();
    let started = Instant::now();
    let mut records: Vec<PredictionRecord> = if mock || config.worker_limit <= 1 {
        items
            .iter()
            .map(|it| evaluate_item(pipeline, it, mode))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.worker_limit)
            .build()
            .map_err(|e| Error::validation(format!("worker pool: {e}")))?;
        pool.install(|| {
            items
                .par_iter()
                .map(|it| evaluate_item(pipeline, it, mode))
                .collect()
        })
    };
    let wall = started.elapsed();
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let scored: Vec<(&str, Option<&str>)> = records
        .iter()
        .filter(|r| !r.unmapped)
        .map(|r| (r.gold.as_str(), r.predicted.as_deref()))
        .collect();
    if scored.is_empty() {
        return Err(Error::Data(
            "no dataset item links to a concept in the causal subgraph".into(),
        ));
    }
    let metrics = compute_metrics::<S>(&scored)?.to_f64();

    let mut usage: BTreeMap<Stage, StageUsage> = Stage::ALL
        .iter()
        .map(|s| (*s, StageUsage::default()))
        .collect();
    for call in records.iter().flat_map(|r| &r.trace.calls) {
        let u = usage.get_mut(&call.stage).expect("all stages present");
        u.calls += 1;
        u.prompt_tokens += call.usage.prompt_tokens;
        u.completion_tokens += call.usage.completion_tokens;
        u.latency_ms += call.latency_ms;
    }

    Ok(EvaluationReport {
        metric_definition: METRIC_DEFINITION.to_string(),
        config: RunConfig {
            mode,
            mock,
            pipeline: config.clone(),
        },
        items: records.len(),
        evaluated: scored.len(),
        unmapped: records.iter().filter(|r| r.unmapped).count(),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
        metrics,
        usage,
        timing: (!mock).then(|| Timing {
            wall_ms: wall.as_millis() as u64,
            items_per_second: items.len() as f64 / wall.as_secs_f64().max(1e-9),
        }),
        records,
    })
}

fn pct(x: f64) -> String {
    format!("{:6.2}%", 100.0 * x)
}

/// Plain-text summary with rates shown in percent.
pub fn render_summary(report: &EvaluationReport) -> String {
    let m = &report.metrics;
    let models = &report.config.pipeline.models;
    let mut out = String::new();
    let _ = writeln!(out, "mode       {}", report.config.mode);
    let _ = writeln!(
        out,
        "models     cot={} enhance={} infer={}",
        models.cot_model, models.enhance_model, models.infer_model
    );
    let _ = writeln!(
        out,
        "items      {} (evaluated {}, unmapped {}, abstain {}, errors {})",
        report.items, report.evaluated, report.unmapped, m.abstain_count, report.errors
    );
    let _ = writeln!(out, "label      precision    recall        f1  support");
    for l in &m.per_label {
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>8}",
            l.label,
            pct(l.precision),
            pct(l.recall),
            pct(l.f1),
            l.support
        );
    }
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>9} {:>8}",
        "macro",
        pct(m.macro_precision),
        pct(m.macro_recall),
        pct(m.macro_f1),
        m.n
    );
    let _ = writeln!(out, "accuracy   {}", pct(m.accuracy));
    out
}
