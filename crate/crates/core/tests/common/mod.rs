#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shuttleswarm::geodata::{
    build_road_graph, shortest_path, CityModel, Intersection, IntersectionKind, NodeIx, Point, RoadSpec,
};
use shuttleswarm::selforg::{insert_destination, FirstPassenger, InsertionContext, RejectReason, Splice};
use shuttleswarm::{Graph, PersonId};

/// Random strongly connected city on an integer lattice. Roads are
/// axis-aligned doglegs driven at 1 m/s, so every length and travel time is
/// an exact integer.
pub fn lattice_graph(rng: &mut impl Rng, nodes: usize, extra_roads: usize) -> Graph {
    let mut cells: Vec<(i32, i32)> = (0..12).flat_map(|x| (0..12).map(move |y| (x, y))).collect();
    cells.shuffle(rng);
    let pos: Vec<Point<f64>> = cells[..nodes]
        .iter()
        .map(|&(x, y)| Point::new(x as f64 * 10.0, y as f64 * 10.0))
        .collect();
    let mut pairs: Vec<(usize, usize, bool)> = Vec::new();
    // A two-way spanning path keeps everything reachable.
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    for w in order.windows(2) {
        pairs.push((w[0], w[1], false));
    }
    for _ in 0..extra_roads {
        let a = rng.gen_range(0..nodes);
        let b = rng.gen_range(0..nodes);
        if a != b {
            pairs.push((a, b, rng.gen_bool(0.5)));
        }
    }
    let roads = pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b, oneway))| {
            let (pa, pb) = (pos[a], pos[b]);
            let mut polyline = vec![pa];
            if pa.x != pb.x && pa.y != pb.y {
                polyline.push(Point::new(pb.x, pa.y));
            }
            polyline.push(pb);
            RoadSpec {
                id: i as u64,
                from: a as u64,
                to: b as u64,
                polyline,
                lanes: 1,
                max_speed: 1.0,
                oneway,
            }
        })
        .collect();
    let city = CityModel {
        intersections: pos
            .iter()
            .enumerate()
            .map(|(i, p)| Intersection {
                id: i as u64,
                pos: *p,
                kind: IntersectionKind::Plain,
            })
            .collect(),
        roads,
        buildings: Vec::new(),
        skipped_features: 0,
    };
    build_road_graph(&city).expect("connected lattice city")
}

/// All-pairs minimum travel time by Floyd–Warshall over the edge list.
pub fn floyd(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in g.edges() {
        let c = &mut d[e.from.index()][e.to.index()];
        *c = c.min(e.travel_time());
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Minimum travel time from `from` to `to` over every simple path, summed
/// edge by edge from the origin.
pub fn brute_force_time(g: &Graph, from: usize, to: usize) -> Option<f64> {
    fn walk(g: &Graph, at: usize, to: usize, acc: f64, seen: &mut [bool], best: &mut Option<f64>) {
        if at == to {
            if best.map_or(true, |b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for &e in g.out_edges(shuttleswarm::geodata::NodeIx(at as u32)) {
            let edge = g.edge(e);
            let next = edge.to.index();
            if seen[next] {
                continue;
            }
            seen[next] = true;
            walk(g, next, to, acc + edge.travel_time(), seen, best);
            seen[next] = false;
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[from] = true;
    let mut best = None;
    walk(g, from, to, 0.0, &mut seen, &mut best);
    best
}

/// Slows a random subset of edges by factors of two.
pub fn random_congestion(g: &mut Graph, rng: &mut impl Rng) {
    for i in 0..g.edge_count() {
        let coef = [1.0, 1.0, 0.5, 0.25][rng.gen_range(0..4)];
        g.set_congestion(shuttleswarm::geodata::EdgeIx(i as u32), 0, coef);
    }
}

#[derive(Debug, PartialEq)]
pub enum Expected {
    Existing,
    At(usize),
    Last,
    Guard,
}

/// Left-to-right scan over all-pairs distances: the first slot where `d` is
/// closer than the target it would precede, subject to the guard.
pub fn scan_oracle(
    dist: &[Vec<f64>],
    targets: &[usize],
    origin: usize,
    d: usize,
    guard: Option<(f64, f64)>,
) -> Expected {
    if targets.contains(&d) {
        return Expected::Existing;
    }
    for i in 0..targets.len() {
        let from = if i == 0 { origin } else { targets[i - 1] };
        let (to_d, to_next) = (dist[from][d], dist[from][targets[i]]);
        if to_d < to_next {
            if let Some((original, budget)) = guard {
                let change = original - to_next + to_d + dist[d][targets[i]];
                if !(change < 1.5 * original && change <= budget) {
                    return Expected::Guard;
                }
            }
            return Expected::At(i + 1);
        }
    }
    Expected::Last
}

pub struct Instance {
    pub graph: Graph,
    pub targets: Vec<usize>,
    pub origin: usize,
    pub current: usize,
    pub d: usize,
    pub first: Option<FirstPassenger<f64>>,
}

pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(3..=12);
    let extra = rng.gen_range(0..=n);
    let graph = lattice_graph(rng, n, extra);
    let m = graph.node_count();
    let mut nodes: Vec<usize> = (0..m).collect();
    nodes.shuffle(rng);
    let k = rng.gen_range(1..=5.min(m - 1));
    let targets = nodes[..k].to_vec();
    let pick = |rng: &mut ChaCha8Rng| rng.gen_range(0..m);
    let origin = pick(rng);
    let current = pick(rng);
    let d = if rng.gen_bool(0.15) { targets[rng.gen_range(0..k)] } else { pick(rng) };
    let first = rng.gen_bool(0.6).then(|| {
        let (a, b) = (pick(rng), pick(rng));
        FirstPassenger {
            person: PersonId(0),
            work_bound: rng.gen_bool(0.8),
            original: shortest_path(&graph, NodeIx(a as u32), NodeIx(b as u32)).unwrap().unwrap(),
            av_time: rng.gen_range(0..400) as f64,
        }
    });
    Instance { graph, targets, origin, current, d, first }
}

/// Runs `count` random insertion instances against [`scan_oracle`]; returns
/// how many matched and how many distinct outcomes occurred.
pub fn check_insertion_instances(seed: u64, count: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut matched = 0;
    for _ in 0..count {
        let inst = instance(&mut rng);
        let dist = floyd(&inst.graph);
        let guard = inst
            .first
            .as_ref()
            .filter(|f| f.work_bound)
            .map(|f| (f.original.travel_time, f.av_time));
        let expected = scan_oracle(&dist, &inst.targets, inst.origin, inst.d, guard);

        let ix = |v: usize| NodeIx(v as u32);
        let targets: Vec<NodeIx> = inst.targets.iter().map(|t| ix(*t)).collect();
        let mut ctx = InsertionContext::new(
            targets.clone(),
            targets.clone(),
            0,
            ix(inst.current),
            ix(inst.origin),
            3,
            inst.first.clone(),
        );
        let out = insert_destination(&inst.graph, &mut ctx, ix(inst.d), &[PersonId(1)]).unwrap();
        let got = match (out.splice, out.rejected.first()) {
            (Some(Splice::Existing), _) => Some(Expected::Existing),
            (Some(Splice::At(i)), _) => Some(Expected::At(i)),
            (Some(Splice::Last), _) => Some(Expected::Last),
            (None, Some((_, RejectReason::LatenessGuard))) => Some(Expected::Guard),
            _ => None,
        };
        let mut want = targets.clone();
        match expected {
            Expected::At(i) => want.insert(i - 1, ix(inst.d)),
            Expected::Last => want.push(ix(inst.d)),
            _ => {}
        }
        if got.as_ref() == Some(&expected) && ctx.targets == want {
            matched += 1;
        }
        seen.insert(format!("{:?}", std::mem::discriminant(&expected)));
    }
    (matched, seen.len())
}
