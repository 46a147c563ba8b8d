//! Relation-label causality weights and the thresholded causal subview.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use log::warn;

use crate::graph::{EdgeIx, EdgeView, KnowledgeGraph};
use crate::scalar::{convert, Scalar};
use crate::{Error, Result};

/// Maps a relation label to a cause-effect weight in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalityTable<S> {
    weights: BTreeMap<String, S>,
    default_weight: S,
}

/// Weights shipped with the default configuration.
pub const DEFAULT_WEIGHTS: [(&str, f64); 8] = [
    ("CAUSES", 0.9),
    ("PREDISPOSES", 0.8),
    ("PREVENTS", 0.8),
    ("TREATS", 0.7),
    ("MANIFESTATION_OF", 0.7),
    ("AFFECTS", 0.6),
    ("ASSOCIATED_WITH", 0.2),
    ("COEXISTS_WITH", 0.15),
];
pub const DEFAULT_UNLISTED_WEIGHT: f64 = 0.05;
pub const DEFAULT_THETA: f64 = 0.5;

impl<S: Scalar> CausalityTable<S> {
    pub fn new(weights: BTreeMap<String, S>, default_weight: S) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("causality table must not be empty"));
        }
        if !default_weight.in_unit_interval() {
            return Err(Error::validation(format!(
                "default causality weight {default_weight} outside [0,1]"
            )));
        }
        if let Some((label, w)) = weights.iter().find(|(_, w)| !w.in_unit_interval()) {
            return Err(Error::validation(format!(
                "causality weight {w} for {label} outside [0,1]"
            )));
        }
        Ok(Self {
            weights,
            default_weight,
        })
    }

    pub fn from_f64<'a>(
        weights: impl IntoIterator<Item = (&'a str, f64)>,
        default_weight: f64,
    ) -> Result<Self> {
        let weights = weights
            .into_iter()
            .map(|(k, v)| Ok((k.to_string(), convert(v, k)?)))
            .collect::<Result<_>>()?;
        Self::new(weights, convert(default_weight, "default weight")?)
    }

    pub fn default_table() -> Self {
        Self::from_f64(DEFAULT_WEIGHTS, DEFAULT_UNLISTED_WEIGHT)
            .expect("built-in causality table is valid")
    }

    /// `f(r)`: the listed weight, or the default for unlisted labels.
    pub fn weight(&self, predicate: &str) -> S {
        self.weights
            .get(predicate)
            .copied()
            .unwrap_or(self.default_weight)
    }

    pub fn weights(&self) -> &BTreeMap<String, S> {
        &self.weights
    }

    pub fn default_weight(&self) -> S {
        self.default_weight
    }
}

/// The causal subgraph: base edges whose label weight meets `theta`, plus any
/// revisions applied through [`CausalGraphView::apply_strength_updates`].
///
/// Member edges report the revised strength when one exists and the label
/// weight otherwise, so every member's effective strength is at least `theta`.
#[derive(Debug, Clone)]
pub struct CausalGraphView<'g, S> {
    base: &'g KnowledgeGraph<S>,
    table: CausalityTable<S>,
    theta: S,
    members: Vec<bool>,
    member_count: usize,
    overrides: BTreeMap<EdgeIx, S>,
}

impl<S: PartialEq> PartialEq for CausalGraphView<'_, S> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.base, other.base)
            && self.table == other.table
            && self.theta == other.theta
            && self.members == other.members
            && self.overrides == other.overrides
    }
}

pub fn build_causal_view<'g, S: Scalar>(
    graph: &'g KnowledgeGraph<S>,
    table: &CausalityTable<S>,
    theta: S,
) -> Result<CausalGraphView<'g, S>> {
    if !theta.in_unit_interval() {
        return Err(Error::validation(format!("theta {theta} outside [0,1]")));
    }
    let members: Vec<bool> = graph
        .edges()
        .iter()
        .map(|e| table.weight(&e.predicate) >= theta)
        .collect();
    let member_count = members.iter().filter(|&&m| m).count();
    if member_count == 0 {
        warn!("causal view at theta={theta} is empty");
    }
    Ok(CausalGraphView {
        base: graph,
        table: table.clone(),
        theta,
        members,
        member_count,
        overrides: BTreeMap::new(),
    })
}

/// A revised strength for one base triple.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthUpdate<S> {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub strength: S,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    pub added: usize,
    pub revised: usize,
    pub demoted: usize,
    /// Below threshold and already outside the view.
    pub unchanged: usize,
}

impl<'g, S: Scalar> CausalGraphView<'g, S> {
    pub fn base(&self) -> &'g KnowledgeGraph<S> {
        self.base
    }

    pub fn table(&self) -> &CausalityTable<S> {
        &self.table
    }

    pub fn theta(&self) -> S {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.member_count
    }

    pub fn is_empty(&self) -> bool {
        self.member_count == 0
    }

    pub fn member_edges(&self) -> impl Iterator<Item = EdgeIx> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| EdgeIx(i as u32))
    }

    pub fn overrides(&self) -> &BTreeMap<EdgeIx, S> {
        &self.overrides
    }

    /// Whether any member edge touches the node.
    pub fn touches(&self, node: crate::graph::NodeIx) -> bool {
        self.base
            .outgoing(node)
            .iter()
            .chain(self.base.incoming(node))
            .any(|&e| self.members[e.index()])
    }

    /// Returns a new view with the updates applied: strengths at or above
    /// `theta` add or revise the edge, strengths below it remove the edge from
    /// the view. The base graph is untouched.
    pub fn apply_strength_updates(
        &self,
        updates: &[StrengthUpdate<S>],
    ) -> Result<(CausalGraphView<'g, S>, UpdateSummary)> {
        // resolve everything first so a bad update leaves no partial result
        let mut resolved: HashMap<EdgeIx, S> = HashMap::new();
        let mut order = Vec::new();
        for u in updates {
            if !u.strength.in_unit_interval() {
                return Err(Error::validation(format!(
                    "updated strength {} for {} {} {} outside [0,1]",
                    u.strength, u.subject, u.predicate, u.object
                )));
            }
            let e = self
                .base
                .find_edge(&u.subject, &u.predicate, &u.object)
                .ok_or_else(|| {
                    Error::not_found(format!(
                        "triple {} {} {} not in base graph",
                        u.subject, u.predicate, u.object
                    ))
                })?;
            if resolved.insert(e, u.strength).is_none() {
                order.push(e);
            }
        }

        let mut next = self.clone();
        let mut summary = UpdateSummary::default();
        for e in order {
            let s_new = resolved[&e];
            let was_member = next.members[e.index()];
            next.overrides.insert(e, s_new);
            if s_new >= self.theta {
                if was_member {
                    summary.revised += 1;
                } else {
                    next.members[e.index()] = true;
                    next.member_count += 1;
                    summary.added += 1;
                }
            } else if was_member {
                next.members[e.index()] = false;
                next.member_count -= 1;
                summary.demoted += 1;
            } else {
                summary.unchanged += 1;
            }
        }
        Ok((next, summary))
    }
}

impl<S: Scalar> EdgeView<S> for CausalGraphView<'_, S> {
    fn graph(&self) -> &KnowledgeGraph<S> {
        self.base
    }

    fn contains(&self, edge: EdgeIx) -> bool {
        self.members.get(edge.index()).copied().unwrap_or(false)
    }

    fn strength(&self, edge: EdgeIx) -> S {
        match self.overrides.get(&edge) {
            Some(&s) => s,
            None => self.table.weight(&self.base.edge(edge).predicate),
        }
    }
}

/// View size for each threshold in `thetas`.
pub fn theta_sweep<S: Scalar>(
    graph: &KnowledgeGraph<S>,
    table: &CausalityTable<S>,
    thetas: &[S],
) -> Result<Vec<(S, usize)>> {
    thetas
        .iter()
        .map(|&t| Ok((t, build_causal_view(graph, table, t)?.len())))
        .collect()
}

/// Reads an update file: `subject_cui, predicate, object_cui, s_new` per
/// tab-separated row. An optional header row and `#` comments are skipped.
pub fn parse_updates<S: Scalar, R: BufRead>(reader: R) -> Result<Vec<StrengthUpdate<S>>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if out.is_empty() && cols.first() == Some(&"subject_cui") {
            continue;
        }
        if cols.len() != 4 || cols[..3].iter().any(|c| c.is_empty()) {
            return Err(Error::parse(
                Some(line_no),
                "expected 4 tab-separated columns",
            ));
        }
        let value: f64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(Some(line_no), format!("bad strength {:?}", cols[3])))?;
        let strength = S::from_f64(value)
            .ok_or_else(|| Error::parse(Some(line_no), format!("bad strength {value}")))?;
        out.push(StrengthUpdate {
            subject: cols[0].to_string(),
            predicate: cols[1].to_string(),
            object: cols[2].to_string(),
            strength,
        });
    }
    Ok(out)
}
