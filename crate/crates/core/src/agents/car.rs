use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::STUCK_SPEED;
use crate::engine::movement::{advance_along_path, Route};
use crate::geodata::{shortest_path, shortest_path_avoiding, NodeIx, Path, RoadGraph};
use crate::CarId;

/// Background traffic: drives between random intersections.
#[derive(Clone, Debug)]
pub struct CommonCar {
    pub id: CarId,
    pub node: NodeIx,
    pub route: Option<Route>,
    pub target: Option<NodeIx>,
    pub speed: f64,
    pub reroutes: u32,
}

impl CommonCar {
    pub fn new(id: CarId, node: NodeIx, speed: f64) -> Self {
        Self {
            id,
            node,
            route: None,
            target: None,
            speed,
            reroutes: 0,
        }
    }
}

fn pick_target(graph: &RoadGraph<f64>, rng: &mut ChaCha8Rng, from: NodeIx) -> NodeIx {
    let n = graph.node_count() as u32;
    loop {
        let t = NodeIx(rng.gen_range(0..n));
        if t != from {
            return t;
        }
    }
}

/// Turns around on the current edge, or avoids the edge ahead when standing
/// on a node, and routes to the same target.
fn reroute(car: &mut CommonCar, graph: &RoadGraph<f64>) {
    let (Some(route), Some(target)) = (car.route.as_ref(), car.target) else {
        return;
    };
    let Some(e) = route.upcoming_edge() else {
        return;
    };
    let edge = graph.edge(e);
    let fresh = if route.offset > 0.0 {
        let Some(back) = graph.reverse_of(e) else {
            return;
        };
        let rest = shortest_path_avoiding(graph, edge.from, target, Some(e))
            .ok()
            .flatten()
            .or_else(|| shortest_path(graph, edge.from, target).ok().flatten());
        let Some(rest) = rest else {
            return;
        };
        let mut edges = vec![back];
        edges.extend(rest.edges);
        let offset = (edge.length - route.offset).max(0.0);
        Route {
            path: Path::from_edges(graph, edge.to, edges),
            idx: 0,
            offset,
        }
    } else {
        match shortest_path_avoiding(graph, car.node, target, Some(e)) {
            Ok(Some(p)) => Route::new(p),
            _ => return,
        }
    };
    car.route = Some(fresh);
    car.reroutes += 1;
}

/// Advances one car by one tick.
pub fn step_common_car(car: &mut CommonCar, graph: &RoadGraph<f64>, rng: &mut ChaCha8Rng, dt: f64) {
    if car.route.is_none() {
        let target = pick_target(graph, rng, car.node);
        let path = shortest_path(graph, car.node, target)
            .expect("car stands on the graph")
            .expect("graph is strongly connected");
        car.target = Some(target);
        car.route = Some(Route::new(path));
    }
    let stuck = car
        .route
        .as_ref()
        .and_then(Route::upcoming_edge)
        .is_some_and(|e| car.speed.min(graph.edge(e).current_speed()) < STUCK_SPEED);
    if stuck {
        reroute(car, graph);
    }
    let route = car.route.as_mut().expect("route set above");
    advance_along_path(graph, &mut car.node, route, car.speed, dt, |_| false);
    if route.finished() {
        car.route = None;
        car.target = None;
    }
}
