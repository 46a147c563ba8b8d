//! Path fusion, relevance scoring, final selection and the enhancement prompt.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use log::warn;

use crate::cot::ChainOfThought;
use crate::graph::{EdgeIx, KnowledgeGraph, NodeIx};
use crate::prompt::{AnswerOptions, PromptTemplate};
use crate::retrieval::Path;
use crate::scalar::{convert, Scalar};
use crate::{Error, Result};

/// Marker placed in prompts when no path survived selection.
pub const NO_EVIDENCE_MARKER: &str = "[no graph evidence found]";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancerConfig<S> {
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
    pub keep_ratio: S,
}

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl<S: Scalar> EnhancerConfig<S> {
    pub fn new(alpha: S, beta: S, gamma: S, keep_ratio: S) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            gamma,
            keep_ratio,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_f64(alpha: f64, beta: f64, gamma: f64, keep_ratio: f64) -> Result<Self> {
        Self::new(
            convert(alpha, "alpha")?,
            convert(beta, "beta")?,
            convert(gamma, "gamma")?,
            convert(keep_ratio, "keep_ratio")?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if w < S::zero() {
                return Err(Error::validation(format!("{name} must be non-negative")));
            }
        }
        let sum = (self.alpha + self.beta + self.gamma).to_f64();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation(format!(
                "alpha + beta + gamma must equal 1 (got {sum})"
            )));
        }
        check_keep_ratio(self.keep_ratio)
    }
}

impl<S: Scalar> Default for EnhancerConfig<S> {
    fn default() -> Self {
        Self::from_f64(0.4, 0.3, 0.3, 0.4).expect("default enhancer weights are valid")
    }
}

fn check_keep_ratio<S: Scalar>(keep_ratio: S) -> Result<()> {
    if keep_ratio <= S::zero() || keep_ratio > S::one() {
        return Err(Error::validation(format!(
            "keep_ratio {keep_ratio} outside (0,1]"
        )));
    }
    Ok(())
}

/// A fused path with its relevance components.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPath<S> {
    pub path: Path<S>,
    pub cui_overlap: S,
    pub semantic_overlap: S,
    pub lh_score: S,
    pub total_score: S,
    pub merge_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedPath<S> {
    pub path: Path<S>,
    pub merge_count: usize,
}

/// Key under which paths are merged: endpoints plus the unordered set of
/// intermediate nodes.
pub type MergeKey = (NodeIx, NodeIx, BTreeSet<NodeIx>);

pub fn merge_key<S>(path: &Path<S>) -> MergeKey {
    let n = path.nodes.len();
    let inner = if n > 2 {
        path.nodes[1..n - 1].iter().copied().collect()
    } else {
        BTreeSet::new()
    };
    (path.nodes[0], path.nodes[n - 1], inner)
}

/// Representative preference inside a merge group: higher score, then
/// fewer edges, then canonical string, then edge indices.
pub fn fusion_order<S: Scalar>(a: &Path<S>, b: &Path<S>) -> Ordering {
    b.path_score
        .partial_cmp(&a.path_score)
        .unwrap_or(Ordering::Equal)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.canonical.cmp(&b.canonical))
        .then_with(|| a.edges.cmp(&b.edges))
}

/// Unions segment-level selections, drops exact repeats (same edge
/// sequence) and merges paths sharing a [`MergeKey`]. Groups appear in order
/// of first occurrence.
pub fn fuse_paths<S: Scalar>(pools: impl IntoIterator<Item = Path<S>>) -> Vec<FusedPath<S>> {
    let mut seen: HashSet<Vec<EdgeIx>> = HashSet::new();
    let mut slot: HashMap<MergeKey, usize> = HashMap::new();
    let mut out: Vec<FusedPath<S>> = Vec::new();
    for path in pools {
        if path.is_empty() || !seen.insert(path.edges.clone()) {
            continue;
        }
        match slot.get(&merge_key(&path)) {
            Some(&i) => {
                let group = &mut out[i];
                group.merge_count += 1;
                if fusion_order(&path, &group.path) == Ordering::Less {
                    group.path = path;
                }
            }
            None => {
                slot.insert(merge_key(&path), out.len());
                out.push(FusedPath {
                    path,
                    merge_count: 1,
                });
            }
        }
    }
    out
}

/// Concept ids and semantic types drawn from the question and all options.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryContext {
    pub cuis: BTreeSet<String>,
    pub semantic_types: BTreeSet<String>,
}

impl QueryContext {
    pub fn from_cuis<S: Scalar>(graph: &KnowledgeGraph<S>, cuis: BTreeSet<String>) -> Self {
        let semantic_types = cuis
            .iter()
            .filter_map(|c| graph.node_ix(c))
            .flat_map(|ix| graph.node(ix).semantic_types.iter().cloned())
            .collect();
        Self {
            cuis,
            semantic_types,
        }
    }
}

pub fn cui_overlap<S: Scalar>(
    query_cuis: &BTreeSet<String>,
    path: &Path<S>,
    graph: &KnowledgeGraph<S>,
) -> Result<S> {
    if query_cuis.is_empty() {
        return Err(Error::validation("query CUI set is empty"));
    }
    let on_path: BTreeSet<&str> = path
        .nodes
        .iter()
        .map(|&n| graph.node(n).id.as_str())
        .collect();
    let hits = query_cuis
        .iter()
        .filter(|c| on_path.contains(c.as_str()))
        .count();
    Ok(S::ratio(hits, query_cuis.len()))
}

/// Fraction of query semantic types carried by some node on the path. An
/// empty query set scores 0.
pub fn semantic_overlap<S: Scalar>(
    query_types: &BTreeSet<String>,
    path: &Path<S>,
    graph: &KnowledgeGraph<S>,
) -> S {
    if query_types.is_empty() {
        warn!("semantic overlap requested with no query semantic types");
        return S::zero();
    }
    let on_path: BTreeSet<&str> = path
        .nodes
        .iter()
        .flat_map(|&n| graph.node(n).semantic_types.iter().map(String::as_str))
        .collect();
    let hits = query_types
        .iter()
        .filter(|t| on_path.contains(t.as_str()))
        .count();
    S::ratio(hits, query_types.len())
}

/// `1 / (1 + L)` for a path of `L` edges.
pub fn lh_score<S: Scalar>(path_length: usize) -> S {
    S::one() / S::from_count(1 + path_length)
}

pub fn total_score<S: Scalar>(cui: S, semantic: S, lh: S, config: &EnhancerConfig<S>) -> S {
    config.alpha * cui + config.beta * semantic + config.gamma * lh
}

/// Scores every fused path against the query context.
pub fn score_paths<S: Scalar>(
    fused: Vec<FusedPath<S>>,
    query: &QueryContext,
    graph: &KnowledgeGraph<S>,
    config: &EnhancerConfig<S>,
) -> Result<Vec<ScoredPath<S>>> {
    fused
        .into_iter()
        .map(|f| {
            let cui = cui_overlap(&query.cuis, &f.path, graph)?;
            let sem = semantic_overlap(&query.semantic_types, &f.path, graph);
            let lh = lh_score(f.path.len());
            Ok(ScoredPath {
                total_score: total_score(cui, sem, lh, config),
                cui_overlap: cui,
                semantic_overlap: sem,
                lh_score: lh,
                merge_count: f.merge_count,
                path: f.path,
            })
        })
        .collect()
}

/// Final ranking: total score, then path score (both descending), then fewer
/// edges, then canonical string, then edge indices.
pub fn final_order<S: Scalar>(a: &ScoredPath<S>, b: &ScoredPath<S>) -> Ordering {
    b.total_score
        .partial_cmp(&a.total_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            b.path
                .path_score
                .partial_cmp(&a.path.path_score)
                .unwrap_or(Ordering::Equal)
        })
        .then(a.path.len().cmp(&b.path.len()))
        .then_with(|| a.path.canonical.cmp(&b.path.canonical))
        .then_with(|| a.path.edges.cmp(&b.path.edges))
}

/// Number of paths kept out of `n`: `max(1, ceil(keep_ratio * n))`, or 0 when
/// `n` is 0.
pub fn keep_count<S: Scalar>(n: usize, keep_ratio: S) -> usize {
    if n == 0 {
        return 0;
    }
    (keep_ratio * S::from_count(n)).ceil_count().clamp(1, n)
}

pub fn select_final<S: Scalar>(
    mut scored: Vec<ScoredPath<S>>,
    keep_ratio: S,
) -> Result<Vec<ScoredPath<S>>> {
    check_keep_ratio(keep_ratio)?;
    let keep = keep_count(scored.len(), keep_ratio);
    scored.sort_by(final_order);
    scored.truncate(keep);
    Ok(scored)
}

/// `NAME --[PREDICATE (0.90)]--> NAME ...`
pub fn render_path<S: Scalar>(path: &Path<S>, graph: &KnowledgeGraph<S>) -> String {
    let mut out = graph.node(path.nodes[0]).name.clone();
    for (i, &e) in path.edges.iter().enumerate() {
        let edge = graph.edge(e);
        out.push_str(&format!(
            " --[{} ({:.2})]--> {}",
            edge.predicate,
            path.strengths[i].to_f64(),
            graph.node(path.nodes[i + 1]).name
        ));
    }
    out
}

/// One rendered path per line, or the no-evidence marker.
pub fn render_paths<'a, S: Scalar + 'a>(
    paths: impl IntoIterator<Item = &'a Path<S>>,
    graph: &KnowledgeGraph<S>,
) -> String {
    let lines: Vec<String> = paths.into_iter().map(|p| render_path(p, graph)).collect();
    if lines.is_empty() {
        NO_EVIDENCE_MARKER.to_string()
    } else {
        lines.join("\n")
    }
}

pub fn build_enhancement_prompt<S: Scalar>(
    template: &PromptTemplate,
    final_paths: &[ScoredPath<S>],
    cot: &ChainOfThought,
    question: &str,
    options: &AnswerOptions,
    graph: &KnowledgeGraph<S>,
) -> String {
    let mut ordered: Vec<&ScoredPath<S>> = final_paths.iter().collect();
    ordered.sort_by(|a, b| final_order(a, b));
    let paths = render_paths(ordered.iter().map(|s| &s.path), graph);
    template.render(&[
        ("question", question.trim()),
        ("options", &options.render()),
        ("cot", &cot.render()),
        ("paths", &paths),
    ])
}
