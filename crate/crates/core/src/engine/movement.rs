//! Moving agents along routed paths.

use serde::Serialize;

use crate::geodata::{EdgeIx, NodeIx, Path, RoadGraph};

/// A path being driven, with the agent's progress along it.
///
/// The agent is on `path.edges[idx]`, `offset` meters past its tail. When
/// `idx == path.edges.len()` the route is finished and the agent stands on
/// the destination node.
#[derive(Clone, Debug)]
pub struct Route {
    pub path: Path<f64>,
    pub idx: usize,
    pub offset: f64,
}

impl Route {
    pub fn new(path: Path<f64>) -> Self {
        Self {
            path,
            idx: 0,
            offset: 0.0,
        }
    }

    pub fn finished(&self) -> bool {
        self.idx >= self.path.edges.len()
    }

    /// Edge the agent occupies, if it has left the node it last reached.
    pub fn current_edge(&self) -> Option<EdgeIx> {
        if self.offset > 0.0 && !self.finished() {
            Some(self.path.edges[self.idx])
        } else {
            None
        }
    }

    /// Edge the agent is on or about to enter.
    pub fn upcoming_edge(&self) -> Option<EdgeIx> {
        self.path.edges.get(self.idx).copied()
    }

    pub fn remaining_edges(&self) -> &[EdgeIx] {
        &self.path.edges[self.idx.min(self.path.edges.len())..]
    }
}

/// Where an agent is, for logs and congestion counting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Node(NodeIx),
    Edge { edge: EdgeIx, offset: f64 },
}

pub fn position_of(node: NodeIx, route: Option<&Route>) -> Position {
    match route.and_then(|r| r.current_edge().map(|e| (e, r.offset))) {
        Some((edge, offset)) => Position::Edge { edge, offset },
        None => Position::Node(node),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Advance {
    pub distance: f64,
    /// Node where `halt` asked to stop, with time budget left unused.
    pub halted_at: Option<NodeIx>,
    /// Reached the end of the route this step.
    pub arrived: bool,
    /// Slowest effective speed used this step; infinite if nothing moved.
    pub slowest: f64,
}

/// Moves along `route` for `dt` seconds.
///
/// Each edge is driven at `min(speed, free_speed × coefficient)`. `node` is
/// updated to every node reached. `halt` is asked at each intermediate node
/// reached (not the starting one, not the final one); returning true stops
/// the agent there for the rest of the step. Overshoot clamps at the final
/// node.
pub fn advance_along_path(
    graph: &RoadGraph<f64>,
    node: &mut NodeIx,
    route: &mut Route,
    speed: f64,
    dt: f64,
    mut halt: impl FnMut(NodeIx) -> bool,
) -> Advance {
    let mut out = Advance {
        distance: 0.0,
        halted_at: None,
        arrived: false,
        slowest: f64::INFINITY,
    };
    let mut budget = dt;
    while budget > 0.0 && !route.finished() {
        let e = graph.edge(route.path.edges[route.idx]);
        let v = speed.min(e.current_speed());
        out.slowest = out.slowest.min(v);
        if v <= 0.0 {
            break;
        }
        let remaining = e.length - route.offset;
        let reach = v * budget;
        if reach < remaining {
            route.offset += reach;
            out.distance += reach;
            break;
        }
        out.distance += remaining;
        budget -= remaining / v;
        route.idx += 1;
        route.offset = 0.0;
        *node = e.to;
        if route.finished() {
            out.arrived = true;
            break;
        }
        if halt(e.to) {
            out.halted_at = Some(e.to);
            break;
        }
    }
    out
}
