//! Bounded breadth-first distances and simple-path enumeration over an
//! [`EdgeView`].

use std::collections::{HashMap, VecDeque};

use super::{EdgeIx, EdgeView, NodeIx};
use crate::scalar::Scalar;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

/// Hop count of the shortest directed path `a ⇝ b` inside `view`, or `None`
/// when there is none within `max_hops`.
pub fn shortest_path_length<S: Scalar, V: EdgeView<S> + ?Sized>(
    view: &V,
    a: &str,
    b: &str,
    max_hops: usize,
) -> Result<Option<usize>> {
    let g = view.graph();
    let a = g.resolve(a)?;
    let b = g.resolve(b)?;
    Ok(bfs_distance(view, a, b, max_hops))
}

pub(crate) fn bfs_distance<S: Scalar, V: EdgeView<S> + ?Sized>(
    view: &V,
    a: NodeIx,
    b: NodeIx,
    max_hops: usize,
) -> Option<usize> {
    if a == b {
        return Some(0);
    }
    let g = view.graph();
    let mut seen: HashMap<NodeIx, usize> = HashMap::from([(a, 0)]);
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        let d = seen[&u];
        if d >= max_hops {
            continue;
        }
        for &e in g.outgoing(u) {
            if !view.contains(e) {
                continue;
            }
            let v = g.edge(e).object;
            if v == b {
                return Some(d + 1);
            }
            if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(v) {
                slot.insert(d + 1);
                queue.push_back(v);
            }
        }
    }
    None
}

/// Distances to `target` along reversed view edges, up to `max_hops`.
fn distances_to<S: Scalar, V: EdgeView<S> + ?Sized>(
    view: &V,
    target: NodeIx,
    max_hops: usize,
) -> HashMap<NodeIx, usize> {
    let g = view.graph();
    let mut dist = HashMap::from([(target, 0)]);
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d >= max_hops {
            continue;
        }
        for &e in g.incoming(v) {
            if !view.contains(e) {
                continue;
            }
            let u = g.edge(e).subject;
            dist.entry(u).or_insert_with(|| {
                queue.push_back(u);
                d + 1
            });
        }
    }
    dist
}

/// All loop-free directed paths `from ⇝ to` with between 1 and `max_hops`
/// edges, as edge sequences. Parallel edges yield distinct paths.
///
/// The search is depth-first in edge-index order, so output order is
/// deterministic. Branches that cannot reach `to` in the remaining hop budget
/// are cut using reverse BFS distances.
pub fn simple_paths<S: Scalar, V: EdgeView<S> + ?Sized>(
    view: &V,
    from: NodeIx,
    to: NodeIx,
    max_hops: usize,
) -> Vec<Vec<EdgeIx>> {
    let mut out = Vec::new();
    if from == to || max_hops == 0 {
        return out;
    }
    let dist = distances_to(view, to, max_hops);
    if !dist.contains_key(&from) {
        return out;
    }
    let g = view.graph();
    let mut on_path = vec![from];
    let mut edges = Vec::new();
    // explicit stack of (node, next outgoing position)
    let mut stack: Vec<(NodeIx, usize)> = vec![(from, 0)];
    while let Some(top) = stack.last_mut() {
        let (u, pos) = *top;
        let out_edges = g.outgoing(u);
        if pos >= out_edges.len() {
            stack.pop();
            on_path.pop();
            edges.pop();
            continue;
        }
        top.1 += 1;
        let e = out_edges[pos];
        if !view.contains(e) {
            continue;
        }
        let v = g.edge(e).object;
        let depth = edges.len() + 1;
        if v == to {
            let mut p = edges.clone();
            p.push(e);
            out.push(p);
            continue;
        }
        if on_path.contains(&v) {
            continue;
        }
        match dist.get(&v) {
            Some(&d) if depth + d <= max_hops => {
                on_path.push(v);
                edges.push(e);
                stack.push((v, 0));
            }
            _ => {}
        }
    }
    out
}
