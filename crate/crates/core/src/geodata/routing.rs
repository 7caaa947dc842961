use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::graph::{EdgeIx, NodeIx, RoadGraph};
use super::GeoError;
use crate::Scalar;

/// A route through the road graph as an ordered edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path<S> {
    pub edges: Vec<EdgeIx>,
    pub origin: NodeIx,
    pub destination: NodeIx,
    /// Meters.
    pub length: S,
    /// Seconds, as estimated when the path was computed.
    pub travel_time: S,
}

impl<S: Scalar> Path<S> {
    pub fn empty(at: NodeIx) -> Self {
        Self {
            edges: Vec::new(),
            origin: at,
            destination: at,
            length: S::zero(),
            travel_time: S::zero(),
        }
    }

    /// Builds a path from consecutive edges, summing length and current time.
    pub fn from_edges(graph: &RoadGraph<S>, origin: NodeIx, edges: Vec<EdgeIx>) -> Self {
        let mut length = S::zero();
        let mut time = S::zero();
        let mut at = origin;
        for e in &edges {
            let edge = graph.edge(*e);
            debug_assert_eq!(edge.from, at, "edges must be consecutive");
            length = length + edge.length;
            time = time + edge.travel_time();
            at = edge.to;
        }
        Self {
            edges,
            origin,
            destination: at,
            length,
            travel_time: time,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Nodes visited, origin first.
    pub fn nodes(&self, graph: &RoadGraph<S>) -> Vec<NodeIx> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        out.push(self.origin);
        out.extend(self.edges.iter().map(|e| graph.edge(*e).to));
        out
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(mut self, next: &Path<S>) -> Self {
        debug_assert_eq!(self.destination, next.origin);
        self.edges.extend_from_slice(&next.edges);
        self.destination = next.destination;
        self.length = self.length + next.length;
        self.travel_time = self.travel_time + next.travel_time;
        self
    }
}

/// Live travel-time estimate of `path` under the graph's current congestion.
pub fn path_travel_time<S: Scalar>(path: &Path<S>, graph: &RoadGraph<S>) -> S {
    path.edges
        .iter()
        .fold(S::zero(), |acc, e| acc + graph.edge(*e).travel_time())
}

struct Queued<S> {
    time: S,
    node: NodeIx,
}

impl<S: Scalar> PartialEq for Queued<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Queued<S> {}
impl<S: Scalar> PartialOrd for Queued<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Queued<S> {
    // Reversed for a min-heap; equal times pop the lower node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .partial_cmp(&self.time)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Minimum travel-time path under current speed coefficients.
///
/// Returns `Ok(None)` only when `to` is unreachable, which cannot happen on a
/// graph built by [`super::build_road_graph`].
pub fn shortest_path<S: Scalar>(
    graph: &RoadGraph<S>,
    from: NodeIx,
    to: NodeIx,
) -> Result<Option<Path<S>>, GeoError> {
    shortest_path_avoiding(graph, from, to, None)
}

/// [`shortest_path`] that never uses `banned`.
pub fn shortest_path_avoiding<S: Scalar>(
    graph: &RoadGraph<S>,
    from: NodeIx,
    to: NodeIx,
    banned: Option<EdgeIx>,
) -> Result<Option<Path<S>>, GeoError> {
    graph.check(from)?;
    graph.check(to)?;
    if from == to {
        return Ok(Some(Path::empty(from)));
    }
    let n = graph.node_count();
    let mut best = vec![S::infinity(); n];
    let mut via: Vec<Option<EdgeIx>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[from.index()] = S::zero();
    heap.push(Queued {
        time: S::zero(),
        node: from,
    });

    while let Some(Queued { time, node }) = heap.pop() {
        if done[node.index()] {
            continue;
        }
        done[node.index()] = true;
        if node == to {
            break;
        }
        for &e in graph.out_edges(node) {
            if Some(e) == banned {
                continue;
            }
            let edge = graph.edge(e);
            let next = edge.to;
            if done[next.index()] {
                continue;
            }
            let t = time + edge.travel_time();
            if t < best[next.index()] {
                best[next.index()] = t;
                via[next.index()] = Some(e);
                heap.push(Queued { time: t, node: next });
            }
        }
    }

    if !done[to.index()] {
        return Ok(None);
    }
    let mut edges = Vec::new();
    let mut at = to;
    while at != from {
        let e = via[at.index()].expect("settled node has a predecessor");
        edges.push(e);
        at = graph.edge(e).from;
    }
    edges.reverse();
    let path = Path::from_edges(graph, from, edges);
    debug_assert!(path.travel_time == best[to.index()]);
    Ok(Some(path))
}
