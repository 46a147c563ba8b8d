//! In-memory knowledge graph of concepts and predicated relations.
//!
//! Nodes are keyed by concept identifier (CUI). Edges are stored once, in
//! ingestion order, and indexed by both endpoints. The graph is immutable once
//! built; filtered subviews (see [`crate::causal`]) reference it by borrow.

mod artifact;
mod ingest;
pub(crate) mod search;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

pub use artifact::{read_artifact, write_artifact, ARTIFACT_MAGIC, ARTIFACT_VERSION};
pub use ingest::{ingest_triples, IngestReport, TRIPLE_HEADER};
pub use search::{shortest_path_length, simple_paths, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeIx(pub u32);

impl NodeIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub id: String,
    pub name: String,
    pub semantic_types: BTreeSet<String>,
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgEdge<S> {
    pub subject: NodeIx,
    pub predicate: String,
    pub object: NodeIx,
    pub strength: S,
}

/// Directed labeled multigraph. At most one edge per (subject, predicate,
/// object); parallel edges with distinct predicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph<S> {
    nodes: Vec<ConceptNode>,
    by_id: HashMap<String, NodeIx>,
    edges: Vec<KgEdge<S>>,
    forward: Vec<Vec<EdgeIx>>,
    reverse: Vec<Vec<EdgeIx>>,
}

impl<S: Scalar> KnowledgeGraph<S> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[ConceptNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[KgEdge<S>] {
        &self.edges
    }

    pub fn node(&self, ix: NodeIx) -> &ConceptNode {
        &self.nodes[ix.index()]
    }

    pub fn edge(&self, ix: EdgeIx) -> &KgEdge<S> {
        &self.edges[ix.index()]
    }

    pub fn node_ix(&self, id: &str) -> Option<NodeIx> {
        self.by_id.get(id).copied()
    }

    /// Like [`Self::node_ix`] but unknown ids are an error.
    pub fn resolve(&self, id: &str) -> Result<NodeIx> {
        self.node_ix(id)
            .ok_or_else(|| Error::not_found(format!("node {id}")))
    }

    pub fn outgoing(&self, ix: NodeIx) -> &[EdgeIx] {
        &self.forward[ix.index()]
    }

    pub fn incoming(&self, ix: NodeIx) -> &[EdgeIx] {
        &self.reverse[ix.index()]
    }

    /// Index of the edge `(subject, predicate, object)`, if present.
    pub fn find_edge(&self, subject: &str, predicate: &str, object: &str) -> Option<EdgeIx> {
        let s = self.node_ix(subject)?;
        let o = self.node_ix(object)?;
        self.forward[s.index()].iter().copied().find(|&e| {
            let edge = &self.edges[e.index()];
            edge.object == o && edge.predicate == predicate
        })
    }

    /// Edges adjacent to `id`, ordered by edge index.
    pub fn neighbors(&self, id: &str, direction: Direction) -> Result<Vec<&KgEdge<S>>> {
        let ix = self.resolve(id)?;
        let mut found: Vec<EdgeIx> = match direction {
            Direction::Out => self.outgoing(ix).to_vec(),
            Direction::In => self.incoming(ix).to_vec(),
            Direction::Both => {
                let mut all: Vec<EdgeIx> = self
                    .outgoing(ix)
                    .iter()
                    .chain(self.incoming(ix))
                    .copied()
                    .collect();
                // self-loops appear in both lists
                all.sort_unstable();
                all.dedup();
                all
            }
        };
        found.sort_unstable();
        Ok(found.into_iter().map(|e| self.edge(e)).collect())
    }

    /// Histogram of predicate labels, sorted by label.
    pub fn predicate_histogram(&self) -> Vec<(String, usize)> {
        let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
        for e in &self.edges {
            *counts.entry(e.predicate.as_str()).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Converts edge strengths to another scalar type.
    pub fn map_scalar<T: Scalar>(&self) -> Result<KnowledgeGraph<T>> {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                Ok(KgEdge {
                    subject: e.subject,
                    predicate: e.predicate.clone(),
                    object: e.object,
                    strength: crate::scalar::convert(e.strength.to_f64(), "edge strength")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KnowledgeGraph {
            nodes: self.nodes.clone(),
            by_id: self.by_id.clone(),
            edges,
            forward: self.forward.clone(),
            reverse: self.reverse.clone(),
        })
    }
}

impl<S: Scalar> fmt::Display for KnowledgeGraph<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nodes={} edges={}", self.node_count(), self.edge_count())
    }
}

/// What happened when an edge was offered to the builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeInsert {
    New(EdgeIx),
    /// Same triple already present; the larger strength was kept.
    Duplicate(EdgeIx),
}

/// Incremental graph construction. Used by ingestion and by tests that build
/// graphs directly.
#[derive(Debug, Clone)]
pub struct GraphBuilder<S> {
    nodes: Vec<ConceptNode>,
    by_id: HashMap<String, NodeIx>,
    edges: Vec<KgEdge<S>>,
    triples: HashMap<(NodeIx, String, NodeIx), EdgeIx>,
}

impl<S: Scalar> Default for GraphBuilder<S> {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            by_id: HashMap::new(),
            edges: Vec::new(),
            triples: HashMap::new(),
        }
    }
}

impl<S: Scalar> GraphBuilder<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node or merges names and types into an existing one. The first
    /// name seen stays preferred; later differing names become aliases.
    pub fn add_node<I, T>(&mut self, id: &str, name: &str, semantic_types: I) -> Result<NodeIx>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let id = id.trim();
        let name = name.trim();
        if id.is_empty() {
            return Err(Error::validation("node id must be non-empty"));
        }
        if name.is_empty() {
            return Err(Error::validation(format!("node {id} has an empty name")));
        }
        let types = semantic_types
            .into_iter()
            .map(Into::into)
            .map(|t: String| t.trim().to_string())
            .filter(|t| !t.is_empty());
        match self.by_id.get(id) {
            Some(&ix) => {
                let node = &mut self.nodes[ix.index()];
                if node.name != name {
                    node.aliases.insert(name.to_string());
                }
                node.semantic_types.extend(types);
                Ok(ix)
            }
            None => {
                let ix = NodeIx(self.nodes.len() as u32);
                self.nodes.push(ConceptNode {
                    id: id.to_string(),
                    name: name.to_string(),
                    semantic_types: types.collect(),
                    aliases: BTreeSet::new(),
                });
                self.by_id.insert(id.to_string(), ix);
                Ok(ix)
            }
        }
    }

    /// Adds an alias to an existing node. Empty aliases are ignored.
    pub fn add_alias(&mut self, id: &str, alias: &str) -> Result<()> {
        let ix = *self
            .by_id
            .get(id)
            .ok_or_else(|| Error::not_found(format!("node {id}")))?;
        let alias = alias.trim();
        let node = &mut self.nodes[ix.index()];
        if !alias.is_empty() && alias != node.name {
            node.aliases.insert(alias.to_string());
        }
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        subject: &str,
        predicate: &str,
        object: &str,
        strength: S,
    ) -> Result<EdgeInsert> {
        if !strength.in_unit_interval() {
            return Err(Error::validation(format!(
                "strength {strength} of {subject} {predicate} {object} outside [0,1]"
            )));
        }
        let predicate = predicate.trim();
        if predicate.is_empty() {
            return Err(Error::validation("predicate must be non-empty"));
        }
        let s = *self
            .by_id
            .get(subject)
            .ok_or_else(|| Error::not_found(format!("node {subject}")))?;
        let o = *self
            .by_id
            .get(object)
            .ok_or_else(|| Error::not_found(format!("node {object}")))?;
        let key = (s, predicate.to_string(), o);
        if let Some(&existing) = self.triples.get(&key) {
            let edge = &mut self.edges[existing.index()];
            if strength > edge.strength {
                edge.strength = strength;
            }
            return Ok(EdgeInsert::Duplicate(existing));
        }
        let ix = EdgeIx(self.edges.len() as u32);
        self.edges.push(KgEdge {
            subject: s,
            predicate: key.1.clone(),
            object: o,
            strength,
        });
        self.triples.insert(key, ix);
        Ok(EdgeInsert::New(ix))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn build(self) -> KnowledgeGraph<S> {
        let n = self.nodes.len();
        let mut forward = vec![Vec::new(); n];
        let mut reverse = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            forward[e.subject.index()].push(EdgeIx(i as u32));
            reverse[e.object.index()].push(EdgeIx(i as u32));
        }
        KnowledgeGraph {
            nodes: self.nodes,
            by_id: self.by_id,
            edges: self.edges,
            forward,
            reverse,
        }
    }
}

/// Read access to a set of edges over a base graph, each with an effective
/// strength. Implemented by the full graph and by causal subviews.
pub trait EdgeView<S: Scalar>: Sync {
    fn graph(&self) -> &KnowledgeGraph<S>;

    fn contains(&self, edge: EdgeIx) -> bool;

    fn strength(&self, edge: EdgeIx) -> S;
}

impl<S: Scalar> EdgeView<S> for KnowledgeGraph<S> {
    fn graph(&self) -> &KnowledgeGraph<S> {
        self
    }

    fn contains(&self, edge: EdgeIx) -> bool {
        edge.index() < self.edges.len()
    }

    fn strength(&self, edge: EdgeIx) -> S {
        self.edges[edge.index()].strength
    }
}
