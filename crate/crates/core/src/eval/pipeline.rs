use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::QAItem;
use crate::causal::CausalGraphView;
use crate::config::{PipelineConfig, Templates};
use crate::cot::{build_cot_prompt, parse_cot, ChainOfThought};
use crate::enhancer::{
    build_enhancement_prompt, final_order, fuse_paths, render_path, render_paths, score_paths,
    select_final, EnhancerConfig, QueryContext, ScoredPath,
};
use crate::graph::KnowledgeGraph;
use crate::linker::EntityRecognizer;
use crate::llm::{extract_answer_label, LlmGateway, LlmRequest, ModelAssignment, Stage, Usage};
use crate::prompt::AnswerOptions;
use crate::retrieval::{
    find_paths_in, prune_and_select, retrieve_for_cot, Path, Reason, RetrievalConfig, Tier,
};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Stands in for the reasoning chain when no CoT was generated.
pub const NO_COT_MARKER: &str = "[no reasoning chain]";
/// Stands in for the enhanced summary when the enhancement call is skipped.
pub const NO_SUMMARY_MARKER: &str = "[no enhanced summary]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    Full,
    KgOnly,
    NoLlmEnhanced,
    NoEnhancer,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::Full,
        AblationMode::KgOnly,
        AblationMode::NoLlmEnhanced,
        AblationMode::NoEnhancer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::KgOnly => "kg-only",
            AblationMode::NoLlmEnhanced => "no-llm-enhanced",
            AblationMode::NoEnhancer => "no-enhancer",
        }
    }

    /// LLM calls per item as (cot, enhance, infer).
    pub fn expected_calls(self) -> (usize, usize, usize) {
        match self {
            AblationMode::Full => (1, 1, 1),
            AblationMode::KgOnly => (0, 0, 1),
            AblationMode::NoLlmEnhanced | AblationMode::NoEnhancer => (1, 0, 1),
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown mode {s:?}; expected full, kg-only, no-llm-enhanced or no-enhancer"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub stage: Stage,
    pub model: String,
    /// Full prompt text, kept only for transcript runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub response: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub canonical: String,
    pub rendered: String,
    pub tier: Tier,
    pub reversed: bool,
    pub path_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_count: Option<usize>,
}

impl PathRecord {
    fn of<S: Scalar>(path: &Path<S>, graph: &KnowledgeGraph<S>) -> Self {
        Self {
            canonical: path.canonical.clone(),
            rendered: render_path(path, graph),
            tier: path.tier,
            reversed: path.reversed,
            path_score: path.path_score.to_f64(),
            total_score: None,
            merge_count: None,
        }
    }

    fn scored<S: Scalar>(s: &ScoredPath<S>, graph: &KnowledgeGraph<S>) -> Self {
        Self {
            total_score: Some(s.total_score.to_f64()),
            merge_count: Some(s.merge_count),
            ..Self::of(&s.path, graph)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub segment_index: usize,
    pub from_entities: BTreeSet<String>,
    pub to_entities: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<Reason>,
    pub candidate_count: usize,
    pub selected: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub mode: AblationMode,
    /// Concepts linked from the question and all option texts.
    pub query_entities: BTreeSet<String>,
    pub calls: Vec<CallRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot: Option<ChainOfThought>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fused_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub final_paths: Vec<PathRecord>,
    /// Evidence block handed to the inference prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Trace {
    fn new(mode: AblationMode) -> Self {
        Self {
            mode,
            query_entities: BTreeSet::new(),
            calls: Vec::new(),
            cot: None,
            segments: Vec::new(),
            fused_count: None,
            final_paths: Vec::new(),
            evidence: None,
            summary: None,
            notes: Vec::new(),
        }
    }

    pub fn call_count(&self, stage: Stage) -> usize {
        self.calls.iter().filter(|c| c.stage == stage).count()
    }

    /// Calls per stage as (cot, enhance, infer).
    pub fn call_counts(&self) -> (usize, usize, usize) {
        (
            self.call_count(Stage::Cot),
            self.call_count(Stage::Enhance),
            self.call_count(Stage::Infer),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub gold: String,
    /// `None` is an abstention.
    pub predicted: Option<String>,
    pub correct: bool,
    /// No linked concept of the item touches the causal subgraph.
    pub unmapped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace: Trace,
}

/// Everything one item needs: graph views, linker, gateway and settings.
pub struct Pipeline<'a, S> {
    pub view: &'a CausalGraphView<'a, S>,
    pub recognizer: &'a dyn EntityRecognizer,
    pub gateway: &'a LlmGateway,
    pub models: ModelAssignment,
    pub retrieval: RetrievalConfig,
    pub enhancer: EnhancerConfig<S>,
    pub templates: Templates,
}

impl<'a, S: Scalar> Pipeline<'a, S> {
    /// Takes models, retrieval and enhancer settings and templates from a
    /// resolved config.
    pub fn new(
        view: &'a CausalGraphView<'a, S>,
        recognizer: &'a dyn EntityRecognizer,
        gateway: &'a LlmGateway,
        config: &PipelineConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            view,
            recognizer,
            gateway,
            models: config.models.clone(),
            retrieval: config.retrieval,
            enhancer: config.enhancer_config()?,
            templates: config.templates()?,
        })
    }

    fn graph(&self) -> &KnowledgeGraph<S> {
        self.view.base()
    }

    /// Concepts linked from the question plus every option text.
    pub fn query_entities(&self, question: &str, options: &AnswerOptions) -> BTreeSet<String> {
        let mut out = self.recognizer.recognize(question);
        for (_, text) in options.iter() {
            out.extend(self.recognizer.recognize(text));
        }
        out
    }

    /// Whether any query concept has an edge in the causal subgraph.
    pub fn is_mapped(&self, entities: &BTreeSet<String>) -> bool {
        entities
            .iter()
            .filter_map(|id| self.graph().node_ix(id))
            .any(|ix| self.view.touches(ix))
    }

    /// Runs one item. Failures inside the pipeline become an abstention
    /// with the error recorded; the partial trace is kept.
    pub fn run(&self, item: &QAItem, mode: AblationMode) -> PredictionRecord {
        let (outcome, trace) = self.answer(&item.question, &item.options, mode);
        let unmapped = !self.is_mapped(&trace.query_entities);
        let (predicted, error) = match outcome {
            Ok(p) => (p, None),
            Err(e) => {
                log::warn!("item {}: {e}", item.id);
                (None, Some(e.to_string()))
            }
        };
        PredictionRecord {
            id: item.id.clone(),
            gold: item.gold.clone(),
            correct: predicted.as_deref() == Some(item.gold.as_str()),
            predicted,
            unmapped,
            error,
            trace,
        }
    }

    /// Answers one question, returning the chosen label (`None` to abstain)
    /// or the first error, together with the trace gathered so far.
    pub fn answer(
        &self,
        question: &str,
        options: &AnswerOptions,
        mode: AblationMode,
    ) -> (Result<Option<String>>, Trace) {
        let mut trace = Trace::new(mode);
        trace.query_entities = self.query_entities(question, options);
        let outcome = self.run_stages(question, options, mode, &mut trace);
        (outcome, trace)
    }

    fn call(&self, stage: Stage, prompt: String, trace: &mut Trace) -> Result<String> {
        let model = self.models.model_for(stage);
        let response = self
            .gateway
            .complete(&LlmRequest::user(stage, model, prompt.as_str()))?;
        trace.calls.push(CallRecord {
            stage,
            model: model.to_string(),
            prompt: self.gateway.is_mock().then_some(prompt),
            response: response.text.clone(),
            usage: response.usage,
            latency_ms: response.latency_ms,
        });
        Ok(response.text)
    }

    fn run_stages(
        &self,
        question: &str,
        options: &AnswerOptions,
        mode: AblationMode,
        trace: &mut Trace,
    ) -> Result<Option<String>> {
        let graph = self.graph();
        let (cot_text, evidence, summary) = if mode == AblationMode::KgOnly {
            let paths = self.question_option_paths(question, options, trace)?;
            trace.final_paths = paths.iter().map(|p| PathRecord::of(p, graph)).collect();
            (
                NO_COT_MARKER.to_string(),
                render_paths(&paths, graph),
                NO_SUMMARY_MARKER.to_string(),
            )
        } else {
            let prompt = build_cot_prompt(&self.templates.cot, question, options)?;
            let raw = self.call(Stage::Cot, prompt, trace)?;
            let cot = parse_cot(&raw)?;
            trace
                .notes
                .extend(cot.warnings.iter().map(|w| format!("cot: {w}")));
            trace.cot = Some(cot.clone());

            let segments = retrieve_for_cot(&cot, self.recognizer, self.view, &self.retrieval)?;
            trace.segments = segments
                .iter()
                .map(|s| SegmentTrace {
                    segment_index: s.segment_index,
                    from_entities: s.from_entities.clone(),
                    to_entities: s.to_entities.clone(),
                    tier: s.tier,
                    reason: s.reason,
                    candidate_count: s.candidate_count,
                    selected: s
                        .selected
                        .iter()
                        .map(|p| PathRecord::of(p, graph))
                        .collect(),
                })
                .collect();
            let raw_paths: Vec<Path<S>> = segments.into_iter().flat_map(|s| s.selected).collect();

            if mode == AblationMode::NoEnhancer {
                trace.final_paths = raw_paths.iter().map(|p| PathRecord::of(p, graph)).collect();
                (
                    cot.render(),
                    render_paths(&raw_paths, graph),
                    NO_SUMMARY_MARKER.to_string(),
                )
            } else {
                let fused = fuse_paths(raw_paths);
                trace.fused_count = Some(fused.len());
                let query = QueryContext::from_cuis(graph, trace.query_entities.clone());
                let mut finals = if fused.is_empty() {
                    Vec::new()
                } else {
                    select_final(
                        score_paths(fused, &query, graph, &self.enhancer)?,
                        self.enhancer.keep_ratio,
                    )?
                };
                finals.sort_by(final_order);
                trace.final_paths = finals
                    .iter()
                    .map(|s| PathRecord::scored(s, graph))
                    .collect();
                let evidence = render_paths(finals.iter().map(|s| &s.path), graph);
                let summary = if mode == AblationMode::Full {
                    let prompt = build_enhancement_prompt(
                        &self.templates.enhance,
                        &finals,
                        &cot,
                        question,
                        options,
                        graph,
                    );
                    self.call(Stage::Enhance, prompt, trace)?.trim().to_string()
                } else {
                    NO_SUMMARY_MARKER.to_string()
                };
                (cot.render(), evidence, summary)
            }
        };

        let prompt = self.templates.infer.render(&[
            ("question", question.trim()),
            ("options", &options.render()),
            ("cot", &cot_text),
            ("evidence", &evidence),
            ("summary", &summary),
        ]);
        trace.evidence = Some(evidence);
        if mode == AblationMode::Full {
            trace.summary = Some(summary);
        }
        let answer = self.call(Stage::Infer, prompt, trace)?;
        let label = extract_answer_label(&answer, &options.labels());
        if label.is_none() {
            trace
                .notes
                .push("no answer label found in inference reply".into());
        }
        Ok(label)
    }

    /// Correlation-based retrieval for the graph-only mode: question
    /// concepts to option concepts over the whole graph, no causal filter.
    fn question_option_paths(
        &self,
        question: &str,
        options: &AnswerOptions,
        trace: &mut Trace,
    ) -> Result<Vec<Path<S>>> {
        let graph = self.graph();
        let from: Vec<_> = self
            .recognizer
            .recognize(question)
            .iter()
            .filter_map(|id| graph.node_ix(id))
            .collect();
        let mut to_ids = BTreeSet::new();
        for (_, text) in options.iter() {
            to_ids.extend(self.recognizer.recognize(text));
        }
        let to: Vec<_> = to_ids.iter().filter_map(|id| graph.node_ix(id)).collect();
        if from.is_empty() || to.is_empty() {
            trace
                .notes
                .push("no question or option concepts to connect".into());
            return Ok(Vec::new());
        }
        let candidates = find_paths_in(
            graph,
            Tier::Fallback,
            &from,
            &to,
            self.retrieval.max_hops,
            0,
        )?;
        Ok(prune_and_select(candidates, &self.retrieval, self.view))
    }
}
