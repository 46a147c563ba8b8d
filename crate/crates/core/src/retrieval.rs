//! Causal-first path retrieval between consecutive chain-of-thought segments.
//!
//! For each segment pair the linked entities of the earlier segment are
//! connected to those of the later one by loop-free directed paths in the
//! causal view. Only when the causal view yields nothing for the whole pair
//! set is the full graph searched, and those paths are tagged
//! [`Tier::Fallback`].

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::CausalGraphView;
use crate::cot::ChainOfThought;
use crate::graph::{search, EdgeIx, EdgeView, KnowledgeGraph, NodeIx};
use crate::linker::EntityRecognizer;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Causal,
    Fallback,
}

/// Why a segment pair contributed no paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    NoEntities,
    NoPaths,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path<S> {
    pub nodes: Vec<NodeIx>,
    pub edges: Vec<EdgeIx>,
    /// Strength of each edge as seen by the tier that produced the path.
    pub strengths: Vec<S>,
    pub tier: Tier,
    pub segment_index: usize,
    /// Found by searching from the later segment's entities to the earlier's.
    pub reversed: bool,
    pub path_score: S,
    /// Node ids joined by `>`; used as a deterministic tie-breaker.
    pub canonical: String,
}

/// Mean edge strength. The float result is clamped into the range of the
/// inputs, so rounding can never drop it below the weakest edge.
pub fn path_score<S: Scalar>(strengths: &[S]) -> Result<S> {
    let Some(&first) = strengths.first() else {
        return Err(Error::validation("path has no edges"));
    };
    let (lo, hi) = strengths.iter().fold((first, first), |(lo, hi), &s| {
        (if s < lo { s } else { lo }, if s > hi { s } else { hi })
    });
    let sum = strengths.iter().fold(S::zero(), |acc, &s| acc + s);
    let mean = sum / S::from_count(strengths.len());
    Ok(if mean < lo {
        lo
    } else if mean > hi {
        hi
    } else {
        mean
    })
}

impl<S: Scalar> Path<S> {
    /// Builds a path from an edge sequence, taking strengths from `view`.
    pub fn from_edges<V: EdgeView<S> + ?Sized>(
        view: &V,
        edges: Vec<EdgeIx>,
        tier: Tier,
        segment_index: usize,
        reversed: bool,
    ) -> Result<Self> {
        let g = view.graph();
        let first = edges
            .first()
            .ok_or_else(|| Error::validation("path has no edges"))?;
        let mut nodes = vec![g.edge(*first).subject];
        for &e in &edges {
            let edge = g.edge(e);
            if edge.subject != *nodes.last().unwrap() {
                return Err(Error::validation("edges do not form a walk"));
            }
            nodes.push(edge.object);
        }
        let strengths: Vec<S> = edges.iter().map(|&e| view.strength(e)).collect();
        let path_score = path_score(&strengths)?;
        let canonical = nodes
            .iter()
            .map(|&n| g.node(n).id.as_str())
            .collect::<Vec<_>>()
            .join(">");
        Ok(Self {
            nodes,
            edges,
            strengths,
            tier,
            segment_index,
            reversed,
            path_score,
            canonical,
        })
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn start(&self) -> NodeIx {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeIx {
        *self.nodes.last().unwrap()
    }

    pub fn has_repeated_node(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.nodes.len());
        !self.nodes.iter().all(|n| seen.insert(*n))
    }
}

/// Ordering for segment-level selection: score descending, then fewer edges,
/// forward before reversed, canonical string, edge indices.
pub fn selection_order<S: Scalar>(a: &Path<S>, b: &Path<S>) -> Ordering {
    b.path_score
        .partial_cmp(&a.path_score)
        .unwrap_or(Ordering::Equal)
        .then(a.len().cmp(&b.len()))
        .then(a.reversed.cmp(&b.reversed))
        .then_with(|| a.canonical.cmp(&b.canonical))
        .then_with(|| a.edges.cmp(&b.edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub max_hops: usize,
    /// Paths kept per segment pair.
    pub k: usize,
    /// Allowed excess over the shortest endpoint distance.
    pub distance_slack: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            max_hops: 3,
            k: 5,
            distance_slack: 1,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_hops == 0 {
            return Err(Error::validation("max_hops must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSearch<S> {
    pub paths: Vec<Path<S>>,
    /// Tier of the returned paths, if any were found.
    pub tier: Option<Tier>,
    pub reason: Option<Reason>,
}

/// Paths for every ordered pair in `from × to` within one view. A pair with
/// no forward path is retried in reverse. Duplicates (same edge sequence) are
/// dropped, first occurrence wins.
pub fn find_paths_in<S: Scalar, V: EdgeView<S> + ?Sized>(
    view: &V,
    tier: Tier,
    from: &[NodeIx],
    to: &[NodeIx],
    max_hops: usize,
    segment_index: usize,
) -> Result<Vec<Path<S>>> {
    let mut seen: HashSet<Vec<EdgeIx>> = HashSet::new();
    let mut out = Vec::new();
    for &a in from {
        for &b in to {
            if a == b {
                continue;
            }
            let mut found = search::simple_paths(view, a, b, max_hops);
            let mut reversed = false;
            if found.is_empty() {
                found = search::simple_paths(view, b, a, max_hops);
                reversed = true;
            }
            for edges in found {
                if seen.insert(edges.clone()) {
                    out.push(Path::from_edges(
                        view,
                        edges,
                        tier,
                        segment_index,
                        reversed,
                    )?);
                }
            }
        }
    }
    Ok(out)
}

fn resolve_set<S: Scalar>(
    graph: &KnowledgeGraph<S>,
    ids: &BTreeSet<String>,
) -> Result<Vec<NodeIx>> {
    ids.iter().map(|id| graph.resolve(id)).collect()
}

/// Causal tier first; the base graph only if the causal tier found nothing.
pub fn find_paths<S: Scalar>(
    causal_view: &CausalGraphView<'_, S>,
    from_set: &BTreeSet<String>,
    to_set: &BTreeSet<String>,
    config: &RetrievalConfig,
    segment_index: usize,
) -> Result<PathSearch<S>> {
    if from_set.is_empty() || to_set.is_empty() {
        return Ok(PathSearch {
            paths: Vec::new(),
            tier: None,
            reason: Some(Reason::NoEntities),
        });
    }
    let base = causal_view.base();
    let from = resolve_set(base, from_set)?;
    let to = resolve_set(base, to_set)?;
    let causal = find_paths_in(
        causal_view,
        Tier::Causal,
        &from,
        &to,
        config.max_hops,
        segment_index,
    )?;
    if !causal.is_empty() {
        return Ok(PathSearch {
            paths: causal,
            tier: Some(Tier::Causal),
            reason: None,
        });
    }
    let fallback = find_paths_in(
        base,
        Tier::Fallback,
        &from,
        &to,
        config.max_hops,
        segment_index,
    )?;
    Ok(if fallback.is_empty() {
        PathSearch {
            paths: fallback,
            tier: None,
            reason: Some(Reason::NoPaths),
        }
    } else {
        PathSearch {
            paths: fallback,
            tier: Some(Tier::Fallback),
            reason: None,
        }
    })
}

/// Drops looping paths and paths longer than the shortest endpoint distance
/// (in the path's own tier) plus slack, then keeps the top `k`.
pub fn prune_and_select<S: Scalar>(
    candidates: Vec<Path<S>>,
    config: &RetrievalConfig,
    causal_view: &CausalGraphView<'_, S>,
) -> Vec<Path<S>> {
    let base = causal_view.base();
    let mut shortest: HashMap<(Tier, NodeIx, NodeIx), usize> = HashMap::new();
    let mut kept: Vec<Path<S>> = candidates
        .into_iter()
        .filter(|p| !p.is_empty() && !p.has_repeated_node())
        .filter(|p| {
            let key = (p.tier, p.start(), p.end());
            let d = *shortest.entry(key).or_insert_with(|| {
                // the path itself bounds the distance, so BFS to its length suffices
                let found = match p.tier {
                    Tier::Causal => search::bfs_distance(causal_view, p.start(), p.end(), p.len()),
                    Tier::Fallback => search::bfs_distance(base, p.start(), p.end(), p.len()),
                };
                found.unwrap_or(p.len())
            });
            p.len() <= d + config.distance_slack
        })
        .collect();
    kept.sort_by(selection_order);
    kept.truncate(config.k);
    kept
}

/// Retrieval outcome for one consecutive segment pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRetrieval<S> {
    pub segment_index: usize,
    pub from_entities: BTreeSet<String>,
    pub to_entities: BTreeSet<String>,
    pub tier: Option<Tier>,
    pub candidate_count: usize,
    pub selected: Vec<Path<S>>,
    pub reason: Option<Reason>,
}

/// Runs linking, search and selection for every segment pair of `cot`.
/// Entries are returned in segment order; a single-segment chain gives none.
pub fn retrieve_for_cot<S: Scalar>(
    cot: &ChainOfThought,
    recognizer: &dyn EntityRecognizer,
    causal_view: &CausalGraphView<'_, S>,
    config: &RetrievalConfig,
) -> Result<Vec<SegmentRetrieval<S>>> {
    let entities: Vec<BTreeSet<String>> = cot
        .segments
        .iter()
        .map(|s| recognizer.recognize(s))
        .collect();
    (0..cot.segments.len().saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            retrieve_pair(
                i,
                entities[i].clone(),
                entities[i + 1].clone(),
                causal_view,
                config,
            )
        })
        .collect()
}

/// Search plus selection for one entity-set pair.
pub fn retrieve_pair<S: Scalar>(
    segment_index: usize,
    from_entities: BTreeSet<String>,
    to_entities: BTreeSet<String>,
    causal_view: &CausalGraphView<'_, S>,
    config: &RetrievalConfig,
) -> Result<SegmentRetrieval<S>> {
    let found = find_paths(
        causal_view,
        &from_entities,
        &to_entities,
        config,
        segment_index,
    )?;
    let candidate_count = found.paths.len();
    let selected = prune_and_select(found.paths, config, causal_view);
    Ok(SegmentRetrieval {
        segment_index,
        from_entities,
        to_entities,
        tier: found.tier,
        candidate_count,
        selected,
        reason: found.reason,
    })
}
