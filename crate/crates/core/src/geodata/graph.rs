use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::city::CityModel;
use super::geometry::Point;
use super::GeoError;
use crate::Scalar;

/// Dense node index. Indices follow ascending intersection id, so comparing
/// indices is comparing ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeIx(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
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

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode<S> {
    pub id: u64,
    pub pos: Point<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge<S> {
    pub from: NodeIx,
    pub to: NodeIx,
    pub road: u64,
    pub length: S,
    /// Free-flow speed in m/s.
    pub free_speed: S,
    pub lanes: u32,
    pub speed_coefficient: S,
    pub vehicle_count: u32,
}

impl<S: Scalar> Edge<S> {
    /// Current speed limit: free-flow speed scaled by congestion.
    pub fn current_speed(&self) -> S {
        self.free_speed * self.speed_coefficient
    }

    /// Estimated traversal time under current congestion.
    pub fn travel_time(&self) -> S {
        self.length / self.current_speed()
    }
}

/// Directed road graph restricted to the largest strongly connected
/// component of the city. Topology is fixed after construction; only the
/// per-edge congestion fields change.
#[derive(Clone, Debug)]
pub struct RoadGraph<S> {
    nodes: Vec<GraphNode<S>>,
    edges: Vec<Edge<S>>,
    out: Vec<Vec<EdgeIx>>,
    reverse: Vec<Option<EdgeIx>>,
    by_id: BTreeMap<u64, NodeIx>,
}

pub fn build_road_graph<S: Scalar>(city: &CityModel<S>) -> Result<RoadGraph<S>, GeoError> {
    city.validate()?;
    let mut ids: Vec<u64> = city.intersections.iter().map(|n| n.id).collect();
    ids.sort_unstable();
    let dense: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    // (from, to, road index) in dense indices over all intersections.
    let mut arcs = Vec::new();
    for (ri, road) in city.roads.iter().enumerate() {
        let (a, b) = (dense[&road.from], dense[&road.to]);
        arcs.push((a, b, ri));
        if !road.oneway {
            arcs.push((b, a, ri));
        }
    }

    let keep = largest_scc(ids.len(), &arcs);
    if keep.iter().filter(|k| **k).count() < 2 {
        return Err(GeoError::DegenerateGraph(keep.iter().filter(|k| **k).count()));
    }

    let pos_of: BTreeMap<u64, Point<S>> = city.intersections.iter().map(|n| (n.id, n.pos)).collect();
    let mut remap = vec![None; ids.len()];
    let mut nodes = Vec::new();
    for (old, id) in ids.iter().enumerate() {
        if keep[old] {
            remap[old] = Some(NodeIx(nodes.len() as u32));
            nodes.push(GraphNode {
                id: *id,
                pos: pos_of[id],
            });
        }
    }

    let mut edges = Vec::new();
    for (a, b, ri) in arcs {
        if let (Some(from), Some(to)) = (remap[a], remap[b]) {
            let road = &city.roads[ri];
            edges.push(Edge {
                from,
                to,
                road: road.id,
                length: road.length(),
                free_speed: road.max_speed,
                lanes: road.lanes,
                speed_coefficient: S::one(),
                vehicle_count: 0,
            });
        }
    }

    let mut out = vec![Vec::new(); nodes.len()];
    for (i, e) in edges.iter().enumerate() {
        out[e.from.index()].push(EdgeIx(i as u32));
    }
    for list in &mut out {
        list.sort_by_key(|e| (edges[e.index()].to, *e));
    }
    let reverse = edges
        .iter()
        .map(|e| {
            out[e.to.index()]
                .iter()
                .copied()
                .find(|r| edges[r.index()].to == e.from && edges[r.index()].road == e.road)
        })
        .collect();
    let by_id = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, NodeIx(i as u32)))
        .collect();

    Ok(RoadGraph {
        nodes,
        edges,
        out,
        reverse,
        by_id,
    })
}

/// Membership mask of the largest strongly connected component (Kosaraju,
/// iterative). Ties go to the component holding the smallest node.
fn largest_scc(n: usize, arcs: &[(usize, usize, usize)]) -> Vec<bool> {
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for &(a, b, _) in arcs {
        fwd[a].push(b);
        bwd[b].push(a);
    }

    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((v, i)) = stack.pop() {
            if i < fwd[v].len() {
                stack.push((v, i + 1));
                let w = fwd[v][i];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        sizes.push(0);
        comp[root] = c;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            sizes[c] += 1;
            for &w in &bwd[v] {
                if comp[w] == usize::MAX {
                    comp[w] = c;
                    stack.push(w);
                }
            }
        }
    }

    let best_size = sizes.iter().copied().max().unwrap_or(0);
    let chosen = (0..n).map(|v| comp[v]).find(|c| sizes[*c] == best_size);
    comp.iter().map(|c| Some(*c) == chosen).collect()
}

impl<S: Scalar> RoadGraph<S> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, ix: NodeIx) -> &GraphNode<S> {
        &self.nodes[ix.index()]
    }

    pub fn pos(&self, ix: NodeIx) -> Point<S> {
        self.nodes[ix.index()].pos
    }

    pub fn edge(&self, ix: EdgeIx) -> &Edge<S> {
        &self.edges[ix.index()]
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn node_ixs(&self) -> impl Iterator<Item = NodeIx> {
        (0..self.nodes.len() as u32).map(NodeIx)
    }

    pub fn out_edges(&self, ix: NodeIx) -> &[EdgeIx] {
        &self.out[ix.index()]
    }

    /// Opposite-direction edge of the same road, if the road is two-way.
    pub fn reverse_of(&self, ix: EdgeIx) -> Option<EdgeIx> {
        self.reverse[ix.index()]
    }

    pub fn node_ix(&self, id: u64) -> Result<NodeIx, GeoError> {
        self.by_id.get(&id).copied().ok_or(GeoError::UnknownNode(id))
    }

    pub fn contains(&self, ix: NodeIx) -> bool {
        ix.index() < self.nodes.len()
    }

    pub fn check(&self, ix: NodeIx) -> Result<(), GeoError> {
        if self.contains(ix) {
            Ok(())
        } else {
            Err(GeoError::UnknownNode(ix.0 as u64))
        }
    }

    /// Nearest node by straight-line distance; ties to the lower index.
    pub fn nearest_node(&self, p: Point<S>) -> NodeIx {
        let mut best = (S::infinity(), NodeIx(0));
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.pos.distance(p);
            if d < best.0 {
                best = (d, NodeIx(i as u32));
            }
        }
        best.1
    }

    /// Nodes within `radius` meters (straight line) of `ix`, ascending.
    pub fn nodes_within(&self, ix: NodeIx, radius: S) -> Vec<NodeIx> {
        let at = self.pos(ix);
        self.node_ixs()
            .filter(|n| self.pos(*n).distance(at) <= radius)
            .collect()
    }

    pub fn total_length(&self) -> S {
        self.edges.iter().fold(S::zero(), |acc, e| acc + e.length)
    }

    /// Sets the vehicle count and congestion coefficient of one edge.
    pub fn set_congestion(&mut self, ix: EdgeIx, vehicle_count: u32, coefficient: S) {
        let e = &mut self.edges[ix.index()];
        e.vehicle_count = vehicle_count;
        e.speed_coefficient = coefficient;
    }

    /// Point at `offset` meters along edge `ix`, interpolated on the chord.
    pub fn point_on_edge(&self, ix: EdgeIx, offset: S) -> Point<S> {
        let e = self.edge(ix);
        let t = if e.length > S::zero() {
            (offset / e.length).max(S::zero()).min(S::one())
        } else {
            S::zero()
        };
        self.pos(e.from).lerp(self.pos(e.to), t)
    }
}
