use super::*;
use crate::geodata::{build_road_graph, generate_grid_city, CityModel, Point};

fn graph(nodes: &[(u64, f64, f64)], roads: &[(u64, u64)], speed: f64) -> RoadGraph<f64> {
    let pts: Vec<(u64, Point<f64>)> = nodes.iter().map(|(i, x, y)| (*i, Point::new(*x, *y))).collect();
    build_road_graph(&CityModel::from_segments(&pts, roads, speed)).unwrap()
}

fn n(g: &RoadGraph<f64>, id: u64) -> NodeIx {
    g.node_ix(id).unwrap()
}

fn cand(person: u32, origin: NodeIx, destination: NodeIx, issued: u64) -> Candidate {
    Candidate {
        person: PersonId(person),
        origin,
        destination,
        issued,
    }
}

/// O(0) - A(1) - B(2) - C(3) - D(4) on a line, 100 m apart.
fn line() -> RoadGraph<f64> {
    graph(
        &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 200.0, 0.0), (3, 300.0, 0.0), (4, 400.0, 0.0)],
        &[(0, 1), (1, 2), (2, 3), (3, 4)],
        10.0,
    )
}

fn grid5() -> RoadGraph<f64> {
    build_road_graph(&generate_grid_city(5, 5, 100.0, 0).unwrap()).unwrap()
}

#[test]
fn singleton_group() {
    let g = grid5();
    let (o, d) = (n(&g, 0), n(&g, 12));
    let group = form_initial_group(&g, &[cand(1, o, d, 5)]).unwrap();
    assert_eq!(group.group.len(), 1);
    assert_eq!(group.final_target, d);
    assert_eq!(group.targets, vec![d]);
    assert_eq!(group.stops, vec![o, d]);
    assert_eq!(group.path, shortest_path(&g, o, d).unwrap().unwrap());
}

#[test]
fn farthest_destination_becomes_final_target() {
    let g = grid5();
    let o = n(&g, 0);
    let (near, far) = (n(&g, 2), n(&g, 4 * 5 + 1));
    let group = form_initial_group(&g, &[cand(1, o, near, 0), cand(2, o, far, 1)]).unwrap();
    assert_eq!(group.final_target, far);
    assert_eq!(*group.targets.last().unwrap(), far);
    assert_eq!(group.targets.len(), 2);
    assert_eq!(group.path.destination, far);
}

#[test]
fn thirteenth_request_has_no_seat() {
    let g = grid5();
    let o = n(&g, 6);
    let reqs: Vec<Candidate> = (0..13).map(|i| cand(i, o, n(&g, 24), 100)).collect();
    let group = form_initial_group(&g, &reqs).unwrap();
    assert_eq!(group.group.len(), 12);
    assert_eq!(group.no_seats, vec![PersonId(12)]);
}

#[test]
fn group_is_taken_at_the_earliest_origin() {
    let g = grid5();
    let reqs = [
        cand(4, n(&g, 1), n(&g, 20), 30),
        cand(2, n(&g, 6), n(&g, 24), 10),
        cand(3, n(&g, 6), n(&g, 22), 10),
    ];
    let group = form_initial_group(&g, &reqs).unwrap();
    assert_eq!(group.origin, n(&g, 6));
    let ids: Vec<_> = group.group.iter().map(|c| c.person).collect();
    assert_eq!(ids, vec![PersonId(2), PersonId(3)]);
    assert!(form_initial_group::<f64>(&g, &[]).is_err());
}

fn fan() -> (RoadGraph<f64>, [NodeIx; 5]) {
    // Shuttle at 0, final target 1 straight east; 2 at exactly 20°, 3 at 20.1°.
    let r = 500.0f64;
    let (a, b) = (20.0f64.to_radians(), 20.1f64.to_radians());
    let g = graph(
        &[
            (0, 0.0, 0.0),
            (1, 1000.0, 0.0),
            (2, r * a.cos(), r * a.sin()),
            (3, r * b.cos(), r * b.sin()),
            (4, 400.0, 0.0),
        ],
        &[(0, 4), (4, 1), (0, 2), (0, 3), (2, 1), (3, 1)],
        10.0,
    );
    let ix = [n(&g, 0), n(&g, 1), n(&g, 2), n(&g, 3), n(&g, 4)];
    (g, ix)
}

#[test]
fn angle_threshold_is_inclusive() {
    let (g, [at, fin, twenty, past, mid]) = fan();
    let cs = [cand(1, at, twenty, 0), cand(2, at, past, 1), cand(3, at, mid, 2)];
    let f = filter_candidates(&g, at, fin, &BTreeSet::new(), &cs, 20.0);
    let kept: Vec<_> = f.kept.iter().map(|c| c.person).collect();
    assert_eq!(kept, vec![PersonId(1), PersonId(3)]);
    assert_eq!(f.rejected, vec![(PersonId(2), RejectReason::Angle)]);
    let a = f.angles[0].1.unwrap();
    assert!((a - 20.0).abs() < 1e-9, "{a}");
}

#[test]
fn visited_and_undefined_bearings() {
    let (g, [at, fin, twenty, _, mid]) = fan();
    let visited: BTreeSet<_> = [mid].into();
    let cs = [cand(1, at, mid, 0), cand(2, at, twenty, 1)];
    let f = filter_candidates(&g, at, fin, &visited, &cs, 20.0);
    assert_eq!(f.rejected, vec![(PersonId(1), RejectReason::VisitedStop)]);
    assert_eq!(f.kept.len(), 1);

    let f = filter_candidates(&g, fin, fin, &BTreeSet::new(), &cs, 20.0);
    assert!(f.kept.is_empty());
    assert!(f.rejected.iter().all(|(_, r)| *r == RejectReason::Angle));
    assert!(f.angles.iter().all(|(_, a)| a.is_none()));
}

fn ctx(g: &RoadGraph<f64>, targets: &[u64], seats: usize, first: Option<FirstPassenger<f64>>) -> InsertionContext<f64> {
    let ts: Vec<NodeIx> = targets.iter().map(|t| n(g, *t)).collect();
    let mut stops = vec![n(g, 0)];
    stops.extend_from_slice(&ts);
    InsertionContext::new(ts, stops, 1, n(g, 0), n(g, 0), seats, first)
}

#[test]
fn existing_target_admits_directly() {
    let g = line();
    let mut c = ctx(&g, &[2, 3], 2, None);
    let out = insert_destination(&g, &mut c, n(&g, 2), &[PersonId(1), PersonId(2)]).unwrap();
    assert_eq!(out.admitted, vec![PersonId(1), PersonId(2)]);
    assert_eq!(out.splice, Some(Splice::Existing));
    assert_eq!(c.targets, vec![n(&g, 2), n(&g, 3)]);
    assert_eq!(c.open_seats, 0);
    assert_eq!(c.ops.count, 0);
}

#[test]
fn nearer_destination_is_spliced_first() {
    let g = line();
    let mut c = ctx(&g, &[2, 3], 4, None);
    let out = insert_destination(&g, &mut c, n(&g, 1), &[PersonId(7)]).unwrap();
    assert_eq!(out.splice, Some(Splice::At(1)));
    assert!(out.path_changed);
    assert_eq!(c.targets, vec![n(&g, 1), n(&g, 2), n(&g, 3)]);
    assert_eq!(c.stops, vec![n(&g, 0), n(&g, 1), n(&g, 2), n(&g, 3)]);
    assert_eq!(c.ops.count, 3);
}

#[test]
fn farther_destination_is_appended() {
    let g = line();
    let mut c = ctx(&g, &[2, 3], 4, None);
    let out = insert_destination(&g, &mut c, n(&g, 4), &[PersonId(7)]).unwrap();
    assert_eq!(out.splice, Some(Splice::Last));
    assert!(!out.path_changed);
    assert!(c.as_last);
    assert_eq!(c.targets, vec![n(&g, 2), n(&g, 3), n(&g, 4)]);
    assert_eq!(c.ops.count, 4);
    assert!(c.ops.count <= OPS_PER_POSITION * 2);
}

#[test]
fn seats_cap_the_group() {
    let g = line();
    let mut c = ctx(&g, &[3], 1, None);
    let out = insert_destination(&g, &mut c, n(&g, 3), &[PersonId(1), PersonId(2), PersonId(3)]).unwrap();
    assert_eq!(out.admitted, vec![PersonId(1)]);
    assert_eq!(
        out.rejected,
        vec![(PersonId(2), RejectReason::NoSeats), (PersonId(3), RejectReason::NoSeats)]
    );
    let out = insert_destination(&g, &mut c, n(&g, 3), &[PersonId(4)]).unwrap();
    assert!(out.admitted.is_empty());
}

#[test]
fn destination_at_the_shuttle_is_scanned_from_the_pickup() {
    let g = line();
    let mut c = ctx(&g, &[2, 3], 3, None);
    c.new_origin = n(&g, 1);
    let out = insert_destination(&g, &mut c, n(&g, 0), &[PersonId(5)]).unwrap();
    assert_eq!(out.splice, Some(Splice::Last));
    assert_eq!(c.targets, vec![n(&g, 2), n(&g, 3), n(&g, 0)]);
    assert_eq!(c.stops.last(), Some(&n(&g, 0)));
}

fn first(g: &RoadGraph<f64>, from: u64, to: u64, av_time: f64) -> FirstPassenger<f64> {
    FirstPassenger {
        person: PersonId(0),
        work_bound: true,
        original: shortest_path(g, n(g, from), n(g, to)).unwrap().unwrap(),
        av_time,
    }
}

#[test]
fn zero_budget_fails_the_lateness_guard() {
    let g = line();
    let mut c = ctx(&g, &[2, 3], 4, Some(first(&g, 0, 3, 0.0)));
    let out = insert_destination(&g, &mut c, n(&g, 1), &[PersonId(7)]).unwrap();
    assert!(out.admitted.is_empty());
    assert_eq!(out.rejected, vec![(PersonId(7), RejectReason::LatenessGuard)]);
    assert_eq!(c.targets, vec![n(&g, 2), n(&g, 3)]);
    assert!(!out.guard.unwrap().passed);
}

/// new_origin N, target T and candidate destination D form a 240-180-300
/// right triangle; X-Y is the first passenger's 1200 m ride. Speeds are
/// 1 m/s so seconds equal meters.
fn guard_graph() -> RoadGraph<f64> {
    graph(
        &[
            (0, 0.0, 0.0),
            (1, 300.0, 0.0),
            (2, 192.0, 144.0),
            (3, 0.0, -1000.0),
            (4, 1200.0, -1000.0),
        ],
        &[(0, 1), (0, 2), (2, 1), (3, 4), (0, 3), (1, 4)],
        1.0,
    )
}

#[test]
fn lateness_guard_hand_example() {
    let g = guard_graph();
    for (budget, admitted) in [(1320.0, true), (1319.0, false), (5000.0, true)] {
        let mut c = ctx(&g, &[1], 4, Some(first(&g, 3, 4, budget)));
        let out = insert_destination(&g, &mut c, n(&g, 2), &[PersonId(9)]).unwrap();
        let guard = out.guard.unwrap();
        assert_eq!(
            (guard.original, guard.t2n, guard.t2d, guard.d2t),
            (1200.0, 300.0, 240.0, 180.0)
        );
        assert_eq!(guard.change, 1320.0);
        assert_eq!(guard.passed, admitted);
        assert_eq!(out.admitted.is_empty(), !admitted);
    }
}

#[test]
fn home_bound_first_passenger_skips_the_guard() {
    let g = line();
    let mut f = first(&g, 0, 3, 0.0);
    f.work_bound = false;
    let mut c = ctx(&g, &[2, 3], 4, Some(f));
    let out = insert_destination(&g, &mut c, n(&g, 1), &[PersonId(7)]).unwrap();
    assert_eq!(out.admitted, vec![PersonId(7)]);
    assert!(out.guard.is_none());
}

fn view<'a>(
    g: &RoadGraph<f64>,
    current: u64,
    targets: &'a [NodeIx],
    stops: &'a [NodeIx],
    visited: &'a BTreeSet<NodeIx>,
    seats: usize,
) -> ShuttleView<'a, f64> {
    ShuttleView {
        current: n(g, current),
        targets,
        stops,
        next_stop: 1,
        visited,
        open_seats: seats,
        first: None,
    }
}

#[test]
fn nothing_survives_filtering() {
    let (g, [at, fin, _, past, _]) = fan();
    let targets = [fin];
    let stops = [at, fin];
    let visited = BTreeSet::new();
    let v = view(&g, 0, &targets, &stops, &visited, 5);
    let d = try_admit(&g, &v, &[cand(1, at, past, 0)], 20.0).unwrap();
    assert!(d.admitted.is_empty());
    assert_eq!(d.stops, stops.to_vec());
    assert_eq!(d.targets, targets.to_vec());
    assert!(!d.path_changed);
    assert_eq!(d.ops, OpCount { n: 0, m: 0, count: 0 });
}

#[test]
fn leg_is_replaced_by_two_through_the_new_destination() {
    // Shuttle at S heading to final F via T1; candidate at S bound for M at
    // 20° which is nearer than T1.
    let r = 300.0f64;
    let a = 20.0f64.to_radians();
    let g = graph(
        &[(0, 0.0, 0.0), (1, 500.0, 0.0), (2, 1000.0, 0.0), (3, r * a.cos(), r * a.sin())],
        &[(0, 1), (1, 2), (0, 3), (3, 1)],
        10.0,
    );
    let (s, t1, fin, m) = (n(&g, 0), n(&g, 1), n(&g, 2), n(&g, 3));
    let targets = [t1, fin];
    let stops = [n(&g, 0), t1, fin];
    let visited: BTreeSet<_> = [s].into();
    let v = view(&g, 0, &targets, &stops, &visited, 5);
    let d = try_admit(&g, &v, &[cand(1, s, m, 0)], 20.0).unwrap();
    assert_eq!(d.admitted, vec![PersonId(1)]);
    assert_eq!(d.targets, vec![m, t1, fin]);
    assert_eq!(d.stops, vec![s, s, m, t1, fin]);
    assert!(d.path_changed);
    let new_path: Path<f64> = route_through(&g, s, &d.stops[1..]).unwrap();
    assert_eq!(new_path.nodes(&g), vec![s, m, t1, fin]);
}

#[test]
fn admission_puts_the_origin_before_the_next_stop() {
    let g = line();
    let (o, a, b, c) = (n(&g, 0), n(&g, 1), n(&g, 2), n(&g, 3));
    let targets = [c];
    let stops = [o, c];
    let visited: BTreeSet<_> = [o].into();
    let v = view(&g, 0, &targets, &stops, &visited, 2);
    let d = try_admit(&g, &v, &[cand(1, a, b, 0), cand(2, a, b, 1), cand(3, a, c, 2)], 20.0).unwrap();
    assert_eq!(d.admitted, vec![PersonId(1), PersonId(2)]);
    assert_eq!(d.rejected, vec![(PersonId(3), RejectReason::NoSeats)]);
    assert_eq!(d.stops, vec![o, a, b, c]);
    assert_eq!(d.targets, vec![b, c]);
    assert!(d.ops.count <= d.ops.bound());
    assert!(d.ops.m <= 11);
}

#[test]
fn mixed_origins_are_refused() {
    let g = line();
    let targets = [n(&g, 3)];
    let stops = [n(&g, 0), n(&g, 3)];
    let visited = BTreeSet::new();
    let v = view(&g, 0, &targets, &stops, &visited, 2);
    let cs = [cand(1, n(&g, 1), n(&g, 2), 0), cand(2, n(&g, 0), n(&g, 2), 0)];
    assert_eq!(try_admit(&g, &v, &cs, 20.0), Err(SelforgError::MixedOrigins));
    let empty: [NodeIx; 0] = [];
    let v = view(&g, 0, &empty, &stops, &visited, 2);
    assert_eq!(try_admit(&g, &v, &cs[..1], 20.0), Err(SelforgError::NoFinalTarget));
}

#[test]
fn counter_respects_its_bound() {
    let g = grid5();
    let targets: Vec<NodeIx> = [24, 23, 22, 21, 20].iter().map(|i| n(&g, *i)).rev().collect();
    let mut stops = vec![n(&g, 0)];
    stops.extend_from_slice(&targets);
    let visited = BTreeSet::new();
    let v = ShuttleView {
        current: n(&g, 0),
        targets: &targets,
        stops: &stops,
        next_stop: 1,
        visited: &visited,
        open_seats: 7,
        first: None,
    };
    let cs: Vec<Candidate> = (0..5).map(|i| cand(i, n(&g, 0), n(&g, 5 + i as u64), i as u64)).collect();
    let d = try_admit(&g, &v, &cs, 180.0).unwrap();
    assert!(d.ops.count <= d.ops.bound(), "{:?}", d.ops);
    assert!(d.ops.m <= 11);
}
