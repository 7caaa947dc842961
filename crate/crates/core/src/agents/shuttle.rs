use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, AgentParams, Clock, Direction, NearIndex, Person, RequestBoard};
use crate::engine::movement::{advance_along_path, Route};
use crate::engine::trace::{
    AgentRef, CandidateOutcome, CandidateRecord, DecisionRecord, Event, SpliceRecord, Trace,
};
use crate::geodata::{shortest_path, NodeIx, Path, RoadGraph};
use crate::selforg::{
    form_initial_group, route_through, try_admit, AdmissionDecision, FirstPassenger, ShuttleView,
    OPS_PER_POSITION,
};
use crate::{Ledger, PersonId, ShuttleId, SimTime, SHUTTLE_CAPACITY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuttleState {
    Wander,
    FirstStop,
    Moving,
    Stop,
}

impl ShuttleState {
    pub const ALL: [ShuttleState; 4] = [
        ShuttleState::Wander,
        ShuttleState::FirstStop,
        ShuttleState::Moving,
        ShuttleState::Stop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShuttleState::Wander => "wander",
            ShuttleState::FirstStop => "first_stop",
            ShuttleState::Moving => "moving",
            ShuttleState::Stop => "stop",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }

    pub fn successors(self) -> &'static [ShuttleState] {
        use ShuttleState::*;
        match self {
            Wander => &[FirstStop],
            FirstStop => &[Moving, Wander],
            Moving => &[Stop, Wander],
            Stop => &[Moving, Wander],
        }
    }

    pub fn can_become(self, to: ShuttleState) -> bool {
        self.successors().contains(&to)
    }
}

/// A person a shuttle has committed to, before and during the ride.
#[derive(Clone, Debug)]
pub struct Rider {
    pub person: PersonId,
    pub origin: NodeIx,
    pub destination: NodeIx,
    pub direction: Direction,
    pub work_start: SimTime,
    pub issued: SimTime,
    pub committed_at: SimTime,
    pub boarded_at: Option<SimTime>,
    /// Direct ride from origin to destination at commitment time.
    pub original: Path<f64>,
    /// Expected drop-off time under the current plan.
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ServicePlan {
    /// Drop-off nodes in visiting order; the last is the final target.
    pub targets: Vec<NodeIx>,
    /// Pickups and drop-offs in visiting order, including those done.
    pub stops: Vec<NodeIx>,
    pub next_stop: usize,
    pub visited: BTreeSet<NodeIx>,
}

impl ServicePlan {
    pub fn next(&self) -> Option<NodeIx> {
        self.stops.get(self.next_stop).copied()
    }

    pub fn remaining(&self) -> &[NodeIx] {
        &self.stops[self.next_stop.min(self.stops.len())..]
    }
}

#[derive(Clone, Debug)]
pub struct Shuttle {
    pub id: ShuttleId,
    pub state: ShuttleState,
    pub node: NodeIx,
    pub route: Option<Route>,
    pub plan: ServicePlan,
    pub riders: BTreeMap<PersonId, Rider>,
    pub ledger: Ledger,
    pub speed: f64,
    pub odometer: f64,
    /// Meters since the last stop event.
    pub leg_distance: f64,
    pub lifts: u32,
    pub dwell_until: Option<SimTime>,
}

impl Shuttle {
    pub fn new(id: ShuttleId, node: NodeIx, speed: f64, ledger: Ledger) -> Self {
        Self {
            id,
            state: ShuttleState::Wander,
            node,
            route: None,
            plan: ServicePlan::default(),
            riders: BTreeMap::new(),
            ledger,
            speed,
            odometer: 0.0,
            leg_distance: 0.0,
            lifts: 0,
            dwell_until: None,
        }
    }

    pub fn aboard(&self) -> usize {
        self.riders.values().filter(|r| r.boarded_at.is_some()).count()
    }

    pub fn waiting(&self) -> usize {
        self.riders.len() - self.aboard()
    }

    /// Seats not yet promised to anyone.
    pub fn open_seats(&self) -> usize {
        SHUTTLE_CAPACITY.saturating_sub(self.riders.len())
    }

    pub fn in_use(&self) -> bool {
        self.state != ShuttleState::Wander
    }

    fn at_node(&self) -> bool {
        self.route.as_ref().map_or(true, |r| r.offset == 0.0)
    }

    /// The rider aboard longest, or failing that the earliest committed.
    pub fn first_passenger(&self, now: SimTime) -> Option<FirstPassenger<f64>> {
        let aboard = self
            .riders
            .values()
            .filter_map(|r| r.boarded_at.map(|b| ((b, r.person), r)))
            .min_by_key(|(k, _)| *k);
        let (r, elapsed) = match aboard {
            Some(((b, _), r)) => (r, now.saturating_sub(b) as f64),
            None => (
                self.riders.values().min_by_key(|r| (r.committed_at, r.person))?,
                0.0,
            ),
        };
        Some(FirstPassenger {
            person: r.person,
            work_bound: r.direction == Direction::ToWork,
            original: r.original.clone(),
            av_time: r.work_start as f64 - now as f64 - elapsed,
        })
    }

    fn record_distance(&mut self, d: f64) {
        self.odometer += d;
        self.leg_distance += d;
    }
}

pub struct ShuttleCtx<'a> {
    pub graph: &'a RoadGraph<f64>,
    pub board: &'a mut RequestBoard,
    pub persons: &'a mut [Person],
    pub trace: &'a mut Trace,
    pub rng: &'a mut ChaCha8Rng,
    pub near: &'a NearIndex,
    pub params: &'a AgentParams,
    pub clock: Clock,
}

fn set_state(s: &mut Shuttle, to: ShuttleState, trace: &mut Trace, clock: Clock) {
    if s.state == to {
        return;
    }
    debug_assert!(s.state.can_become(to), "{:?} -> {:?}", s.state, to);
    let (from, id) = (s.state, s.id);
    trace.event(|| Event::Transition {
        tick: clock.tick,
        time: clock.now,
        agent: AgentRef::Shuttle(id),
        from: from.name().into(),
        to: to.name().into(),
    });
    s.state = to;
}

fn end_episode(s: &mut Shuttle, trace: &mut Trace, clock: Clock) {
    s.plan = ServicePlan::default();
    s.dwell_until = None;
    set_state(s, ShuttleState::Wander, trace, clock);
}

/// Drops a committed rider who gave up waiting.
pub fn cancel_rider(s: &mut Shuttle, p: PersonId, trace: &mut Trace, clock: Clock) {
    let Some(r) = s.riders.get(&p) else {
        return;
    };
    if r.boarded_at.is_some() {
        return;
    }
    s.riders.remove(&p);
    prune_targets(s);
    if s.riders.is_empty() && s.dwell_until.is_none() {
        end_episode(s, trace, clock);
    }
}

/// Keeps targets that some rider still has to reach.
fn prune_targets(s: &mut Shuttle) {
    let riders = &s.riders;
    s.plan
        .targets
        .retain(|t| riders.values().any(|r| r.destination == *t));
}

fn rebuild_route(s: &mut Shuttle, graph: &RoadGraph<f64>) -> Result<(), AgentError> {
    let path = route_through(graph, s.node, s.plan.remaining())?;
    s.route = (!path.is_empty()).then(|| Route::new(path));
    Ok(())
}

fn refresh_etas(s: &mut Shuttle, graph: &RoadGraph<f64>, now: SimTime) -> Result<(), AgentError> {
    let mut at = s.node;
    let mut elapsed = 0.0;
    let mut reach: BTreeMap<NodeIx, f64> = BTreeMap::new();
    for &stop in s.plan.remaining() {
        if stop != at {
            elapsed += route_through(graph, at, &[stop])?.travel_time;
            at = stop;
        }
        reach.insert(stop, elapsed);
    }
    for r in s.riders.values_mut() {
        r.eta = reach.get(&r.destination).map(|t| now as f64 + t);
    }
    Ok(())
}

fn new_rider(
    graph: &RoadGraph<f64>,
    board: &RequestBoard,
    p: PersonId,
    now: SimTime,
) -> Result<Rider, AgentError> {
    let req = board.get(p).expect("committing to a posted request");
    let original = shortest_path(graph, req.origin, req.destination)?
        .expect("graph is strongly connected");
    Ok(Rider {
        person: p,
        origin: req.origin,
        destination: req.destination,
        direction: req.direction,
        work_start: req.work_start,
        issued: req.issued,
        committed_at: now,
        boarded_at: None,
        original,
        eta: None,
    })
}

fn commit(s: &mut Shuttle, ctx: &mut ShuttleCtx, people: &[PersonId]) -> Result<(), AgentError> {
    let clock = ctx.clock;
    for &p in people {
        ctx.board.commit(p, s.id, clock.now);
        let rider = new_rider(ctx.graph, ctx.board, p, clock.now)?;
        s.riders.insert(p, rider);
        let id = s.id;
        if let Some(trip) = ctx.persons[p.index()].trips.last_mut() {
            trip.committed = Some((id, clock.now));
        }
        ctx.trace.event(|| Event::Commit {
            tick: clock.tick,
            time: clock.now,
            person: p,
            shuttle: id,
        });
    }
    if s.riders.len() > SHUTTLE_CAPACITY {
        return Err(AgentError::OverCapacity(s.id, s.riders.len()));
    }
    Ok(())
}

/// Wandering: picks up the first group seen near the current node.
fn try_form_group(s: &mut Shuttle, ctx: &mut ShuttleCtx) -> Result<bool, AgentError> {
    let mut requests = Vec::new();
    for &o in ctx.near.of(s.node) {
        requests.extend(ctx.board.open_at(o));
    }
    if requests.is_empty() {
        return Ok(false);
    }
    let group = form_initial_group(ctx.graph, &requests)?;
    let people: Vec<PersonId> = group.group.iter().map(|c| c.person).collect();
    commit(s, ctx, &people)?;
    s.plan = ServicePlan {
        targets: group.targets,
        stops: group.stops,
        next_stop: 0,
        visited: BTreeSet::new(),
    };
    set_state(s, ShuttleState::FirstStop, ctx.trace, ctx.clock);
    rebuild_route(s, ctx.graph)?;
    if s.plan.next() == Some(s.node) {
        stop_event(s, ctx)?;
    }
    Ok(true)
}

fn wander(s: &mut Shuttle, ctx: &mut ShuttleCtx) -> Result<(), AgentError> {
    if s.at_node() && try_form_group(s, ctx)? {
        return Ok(());
    }
    if s.route.as_ref().map_or(true, Route::finished) {
        let n = ctx.graph.node_count() as u32;
        let target = loop {
            let t = NodeIx(ctx.rng.gen_range(0..n));
            if t != s.node {
                break t;
            }
        };
        let path = shortest_path(ctx.graph, s.node, target)?.expect("graph is strongly connected");
        s.route = Some(Route::new(path));
    }
    let route = s.route.as_mut().expect("roaming route set");
    let (board, near) = (&*ctx.board, ctx.near);
    let moved = advance_along_path(
        ctx.graph,
        &mut s.node,
        route,
        s.speed,
        ctx.params.step_seconds as f64,
        |n| board.has_open_near(near.of(n)),
    );
    if route.finished() {
        s.route = None;
    }
    s.record_distance(moved.distance);
    Ok(())
}

fn drive(s: &mut Shuttle, ctx: &mut ShuttleCtx) -> Result<(), AgentError> {
    if s.at_node() {
        if s.plan.next() == Some(s.node) {
            return stop_event(s, ctx);
        }
        if s.route.as_ref().map_or(true, Route::finished) {
            rebuild_route(s, ctx.graph)?;
        }
    }
    let next = s.plan.next();
    let scanning = s.state == ShuttleState::Moving && s.open_seats() > 0;
    let Some(route) = s.route.as_mut() else {
        return Ok(());
    };
    let (board, near) = (&*ctx.board, ctx.near);
    let moved = advance_along_path(
        ctx.graph,
        &mut s.node,
        route,
        s.speed,
        ctx.params.step_seconds as f64,
        |n| Some(n) == next || (scanning && board.has_open_near(near.of(n))),
    );
    s.record_distance(moved.distance);
    let reached = moved.halted_at.or(moved.arrived.then_some(s.node));
    let Some(n) = reached else {
        return Ok(());
    };
    if Some(n) == next {
        return stop_event(s, ctx);
    }
    if scanning && scan_admit(s, ctx, n)? {
        if s.plan.next() == Some(n) {
            return stop_event(s, ctx);
        }
        rebuild_route(s, ctx.graph)?;
        refresh_etas(s, ctx.graph, ctx.clock.now)?;
    }
    Ok(())
}

fn xy(graph: &RoadGraph<f64>, n: NodeIx) -> [f64; 2] {
    let p = graph.pos(n);
    [p.x, p.y]
}

fn decision_record(
    s: &Shuttle,
    ctx: &ShuttleCtx,
    at: NodeIx,
    first_work_bound: bool,
    d: &AdmissionDecision<f64>,
    candidates: &[crate::selforg::Candidate],
) -> DecisionRecord {
    let g = ctx.graph;
    let candidates = candidates
        .iter()
        .map(|c| {
            let outcome = match d.rejected.iter().find(|(p, _)| *p == c.person) {
                Some((_, why)) => CandidateOutcome::Rejected(*why),
                None => CandidateOutcome::Admitted,
            };
            CandidateRecord {
                person: c.person,
                destination: g.node(c.destination).id,
                destination_xy: xy(g, c.destination),
                angle: d
                    .angles
                    .iter()
                    .find(|(p, _)| *p == c.person)
                    .and_then(|(_, a)| *a),
                outcome,
            }
        })
        .collect();
    DecisionRecord {
        tick: ctx.clock.tick,
        time: ctx.clock.now,
        shuttle: s.id,
        at: g.node(at).id,
        at_xy: xy(g, at),
        final_target: g.node(d.final_target).id,
        final_xy: xy(g, d.final_target),
        new_origin: g.node(d.new_origin).id,
        angle_threshold: ctx.params.angle_threshold,
        visited: s.plan.visited.iter().map(|n| g.node(*n).id).collect(),
        aboard: s.aboard(),
        open_seats: d.open_seats,
        first_work_bound,
        candidates,
        splices: d
            .outcomes
            .iter()
            .map(|o| SpliceRecord {
                destination: g.node(o.destination).id,
                splice: o.splice,
                guard: o.guard.clone(),
            })
            .collect(),
        ops: d.ops,
        ops_per_position: OPS_PER_POSITION,
    }
}

/// Offers the open requests around `at` to the insertion loop, one origin at
/// a time, until one origin yields riders.
fn scan_admit(s: &mut Shuttle, ctx: &mut ShuttleCtx, at: NodeIx) -> Result<bool, AgentError> {
    if s.open_seats() == 0 || s.plan.targets.is_empty() {
        return Ok(false);
    }
    let first = s.first_passenger(ctx.clock.now);
    let first_work_bound = first.as_ref().is_some_and(|f| f.work_bound);
    for &origin in ctx.near.of(at) {
        if !ctx.board.has_open(origin) {
            continue;
        }
        let candidates = ctx.board.open_at(origin);
        let view = ShuttleView {
            current: at,
            targets: &s.plan.targets,
            stops: &s.plan.stops,
            next_stop: s.plan.next_stop,
            visited: &s.plan.visited,
            open_seats: s.open_seats(),
            first: first.clone(),
        };
        let d = try_admit(ctx.graph, &view, &candidates, ctx.params.angle_threshold)?;
        let record = ctx
            .trace
            .enabled
            .then(|| decision_record(s, ctx, at, first_work_bound, &d, &candidates));
        if let Some(r) = record {
            ctx.trace.decisions.push(r);
        }
        if !d.admitted.is_empty() {
            commit(s, ctx, &d.admitted)?;
            s.plan.targets = d.targets;
            s.plan.stops = d.stops;
            return Ok(true);
        }
    }
    Ok(false)
}

/// Drop-offs, admissions, pickups and fare accounting at the node reached.
fn stop_event(s: &mut Shuttle, ctx: &mut ShuttleCtx) -> Result<(), AgentError> {
    let (n, clock) = (s.node, ctx.clock);
    let now = clock.now;

    let alighted: Vec<PersonId> = s
        .riders
        .values()
        .filter(|r| r.boarded_at.is_some() && r.destination == n)
        .map(|r| r.person)
        .collect();
    for p in &alighted {
        s.riders.remove(p);
        let person = &mut ctx.persons[p.index()];
        person.aboard = None;
        person.node = n;
        person.route = None;
        if let Some(trip) = person.trips.last_mut() {
            trip.alighted_at = Some(now);
        }
    }

    // Settle this stop before offering seats, so admissions are planned
    // from what is still ahead.
    while s.plan.next() == Some(n) {
        s.plan.next_stop += 1;
    }
    prune_targets(s);
    if s.state == ShuttleState::Moving {
        scan_admit(s, ctx, n)?;
    }

    let boarded: Vec<PersonId> = s
        .riders
        .values()
        .filter(|r| r.boarded_at.is_none() && r.origin == n)
        .map(|r| r.person)
        .collect();
    for p in &boarded {
        let r = s.riders.get_mut(p).expect("boarding rider");
        r.boarded_at = Some(now);
        s.lifts += 1;
        ctx.board.withdraw(*p);
        let person = &mut ctx.persons[p.index()];
        person.aboard = Some(s.id);
        person.route = None;
        if let Some(trip) = person.trips.last_mut() {
            trip.boarded_at = Some(now);
        }
    }
    if s.aboard() > SHUTTLE_CAPACITY {
        return Err(AgentError::OverCapacity(s.id, s.aboard()));
    }

    let leg = BigRational::from_float(s.leg_distance).expect("finite distance");
    s.ledger.on_stop_event(n, &boarded, &alighted, leg)?;
    s.leg_distance = 0.0;

    while s.plan.next() == Some(n) {
        s.plan.next_stop += 1;
    }
    prune_targets(s);
    s.plan.visited.insert(n);

    let (id, aboard, waiting, node_id) = (s.id, s.aboard(), s.waiting(), ctx.graph.node(n).id);
    ctx.trace.event(|| Event::Stop {
        tick: clock.tick,
        time: now,
        shuttle: id,
        node: node_id,
        boarded,
        alighted,
        aboard,
        waiting,
    });

    s.dwell_until = Some(now + ctx.params.dwell);
    if s.state == ShuttleState::Moving {
        set_state(s, ShuttleState::Stop, ctx.trace, clock);
    }
    rebuild_route(s, ctx.graph)?;
    refresh_etas(s, ctx.graph, now)
}

/// Advances one shuttle by one tick.
pub fn step_shuttle(s: &mut Shuttle, ctx: &mut ShuttleCtx) -> Result<(), AgentError> {
    if let Some(until) = s.dwell_until {
        if ctx.clock.now < until {
            return Ok(());
        }
        s.dwell_until = None;
        if s.riders.is_empty() {
            end_episode(s, ctx.trace, ctx.clock);
            return Ok(());
        }
        set_state(s, ShuttleState::Moving, ctx.trace, ctx.clock);
    }
    match s.state {
        ShuttleState::Wander => wander(s, ctx),
        ShuttleState::FirstStop | ShuttleState::Moving => drive(s, ctx),
        ShuttleState::Stop => {
            set_state(s, ShuttleState::Moving, ctx.trace, ctx.clock);
            drive(s, ctx)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{LiftRequest, PersonState};
    use crate::geodata::{build_road_graph, generate_grid_city};
    use rand::SeedableRng;

    struct World {
        graph: RoadGraph<f64>,
        board: RequestBoard,
        persons: Vec<Person>,
        trace: Trace,
        rng: ChaCha8Rng,
        near: NearIndex,
        params: AgentParams,
    }

    impl World {
        fn new() -> Self {
            let graph = build_road_graph(&generate_grid_city(4, 4, 100.0, 0).unwrap()).unwrap();
            let params = AgentParams::default();
            Self {
                board: RequestBoard::new(graph.node_count()),
                near: NearIndex::new(&graph, params.pickup_radius),
                graph,
                persons: Vec::new(),
                trace: Trace::new(true),
                rng: ChaCha8Rng::seed_from_u64(7),
                params,
            }
        }

        fn n(&self, id: u64) -> NodeIx {
            self.graph.node_ix(id).unwrap()
        }

        fn request(&mut self, home: u64, work: u64, now: SimTime) -> PersonId {
            let id = PersonId(self.persons.len() as u32);
            let (h, w) = (self.n(home), self.n(work));
            let mut p = Person::new(id, h, w, now + 3600, now + 8 * 3600, 30.0 / 3.6);
            p.state = PersonState::SearchLiftToWork;
            p.trips.push(crate::agents::TripRecord {
                direction: Direction::ToWork,
                origin: h,
                destination: w,
                issued: now,
                committed: None,
                boarded_at: None,
                alighted_at: None,
                solo_since: None,
                arrived_at: None,
            });
            self.persons.push(p);
            self.board.post(LiftRequest {
                person: id,
                origin: h,
                destination: w,
                direction: Direction::ToWork,
                issued: now,
                expiry: now + 600,
                work_start: now + 3600,
                committed: None,
            });
            id
        }

        fn shuttle(&self, at: u64) -> Shuttle {
            let at = self.n(at);
            let ledger = Ledger::new(BigRational::from_integer(1.into()), at).unwrap();
            Shuttle::new(ShuttleId(0), at, self.params.shuttle_speed, ledger)
        }

        fn step(&mut self, s: &mut Shuttle, now: SimTime) {
            let mut ctx = ShuttleCtx {
                graph: &self.graph,
                board: &mut self.board,
                persons: &mut self.persons,
                trace: &mut self.trace,
                rng: &mut self.rng,
                near: &self.near,
                params: &self.params,
                clock: Clock { tick: now, now },
            };
            step_shuttle(s, &mut ctx).unwrap();
        }
    }

    #[test]
    fn transition_table() {
        use ShuttleState::*;
        assert!(Wander.can_become(FirstStop));
        assert!(!Wander.can_become(Moving));
        assert!(Stop.can_become(Wander));
        assert!(!FirstStop.can_become(Stop));
        for s in ShuttleState::ALL {
            assert_eq!(ShuttleState::from_name(s.name()), Some(s));
        }
    }

    #[test]
    fn serves_a_group_end_to_end() {
        let mut w = World::new();
        let a = w.request(0, 15, 0);
        let b = w.request(0, 12, 0);
        let mut s = w.shuttle(0);
        w.step(&mut s, 1);
        assert_eq!(s.state, ShuttleState::FirstStop);
        assert_eq!(s.aboard(), 2);
        assert_eq!(s.lifts, 2);
        assert!(w.board.is_empty());
        for p in [a, b] {
            assert_eq!(w.persons[p.index()].aboard, Some(s.id));
        }
        let mut t = 2;
        while s.state != ShuttleState::Wander && t < 2000 {
            w.step(&mut s, t);
            t += 1;
        }
        assert_eq!(s.state, ShuttleState::Wander);
        assert!(s.riders.is_empty());
        for p in [a, b] {
            let trip = w.persons[p.index()].trips.last().unwrap();
            assert!(trip.alighted_at.is_some());
            assert_eq!(w.persons[p.index()].aboard, None);
        }
        // Both ride together until the nearer drop-off.
        let legs = s.ledger.legs();
        assert!(legs.iter().all(|l| l.is_billed()));
        assert_eq!(legs.first().unwrap().passengers.len(), 2);
        assert!((s.odometer - 600.0).abs() < 1e-6, "{}", s.odometer);
    }

    #[test]
    fn picks_up_on_the_way() {
        let mut w = World::new();
        // Row 0 runs 0..3; the shuttle heads east from 0 to 3.
        w.request(0, 3, 0);
        let mut s = w.shuttle(0);
        w.step(&mut s, 1);
        let late = w.request(1, 2, 5);
        let mut t = 2;
        while s.riders.len() < 2 && t < 200 {
            w.step(&mut s, t);
            t += 1;
        }
        assert!(s.riders.contains_key(&late));
        assert!(!w.trace.decisions.is_empty());
        let d = w.trace.decisions.last().unwrap();
        assert!(d.ops.count <= d.ops.bound());
        while s.state != ShuttleState::Wander && t < 2000 {
            w.step(&mut s, t);
            t += 1;
        }
        let trip = w.persons[late.index()].trips.last().unwrap();
        assert!(trip.boarded_at.is_some() && trip.alighted_at.is_some());
    }

    #[test]
    fn backward_destination_is_refused() {
        let mut w = World::new();
        w.request(0, 3, 0);
        let mut s = w.shuttle(0);
        w.step(&mut s, 1);
        let back = w.request(1, 12, 5);
        for t in 2..200 {
            w.step(&mut s, t);
        }
        assert!(!s.riders.contains_key(&back));
        let rejected = w.trace.decisions.iter().flat_map(|d| &d.candidates).any(|c| {
            c.person == back && c.outcome == CandidateOutcome::Rejected(crate::selforg::RejectReason::Angle)
        });
        assert!(rejected);
    }

    #[test]
    fn cancellation_of_the_only_rider_ends_the_episode() {
        let mut w = World::new();
        let p = w.request(5, 15, 0);
        let mut s = w.shuttle(0);
        w.step(&mut s, 1);
        assert_eq!(s.state, ShuttleState::FirstStop);
        assert_eq!(s.waiting(), 1);
        cancel_rider(&mut s, p, &mut w.trace, Clock { tick: 2, now: 2 });
        assert_eq!(s.state, ShuttleState::Wander);
        assert!(s.plan.targets.is_empty());
    }

    #[test]
    fn first_passenger_prefers_longest_aboard() {
        let mut w = World::new();
        let mut s = w.shuttle(0);
        let path = Path::empty(w.n(0));
        let mk = |p: u32, committed_at, boarded_at| Rider {
            person: PersonId(p),
            origin: NodeIx(0),
            destination: NodeIx(1),
            direction: Direction::ToWork,
            work_start: 1000,
            issued: 0,
            committed_at,
            boarded_at,
            original: path.clone(),
            eta: None,
        };
        s.riders.insert(PersonId(1), mk(1, 0, None));
        assert_eq!(s.first_passenger(100).unwrap().av_time, 900.0);
        s.riders.insert(PersonId(2), mk(2, 5, Some(40)));
        let f = s.first_passenger(100).unwrap();
        assert_eq!(f.person, PersonId(2));
        assert_eq!(f.av_time, 1000.0 - 100.0 - 60.0);
        w.persons.clear();
    }
}
