use serde::{Deserialize, Serialize};

use super::{AgentParams, Clock, Direction, LiftRequest, RequestBoard};
use crate::engine::movement::{advance_along_path, Route};
use crate::engine::trace::{AgentRef, Event, Trace};
use crate::geodata::{shortest_path, NodeIx, RoadGraph};
use crate::{PersonId, ShuttleId, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonState {
    Resting,
    SearchLiftToWork,
    WaitForLift,
    GoWork,
    Working,
    SearchLiftToHome,
    GoHome,
}

impl PersonState {
    pub const ALL: [PersonState; 7] = [
        PersonState::Resting,
        PersonState::SearchLiftToWork,
        PersonState::WaitForLift,
        PersonState::GoWork,
        PersonState::Working,
        PersonState::SearchLiftToHome,
        PersonState::GoHome,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PersonState::Resting => "resting",
            PersonState::SearchLiftToWork => "search_lift_to_work",
            PersonState::WaitForLift => "wait_for_lift",
            PersonState::GoWork => "go_work",
            PersonState::Working => "working",
            PersonState::SearchLiftToHome => "search_lift_to_home",
            PersonState::GoHome => "go_home",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }

    pub fn successors(self) -> &'static [PersonState] {
        use PersonState::*;
        match self {
            Resting => &[SearchLiftToWork],
            SearchLiftToWork => &[GoWork, WaitForLift],
            WaitForLift => &[GoWork, GoHome],
            GoWork => &[Working],
            Working => &[SearchLiftToHome],
            SearchLiftToHome => &[GoHome, WaitForLift],
            GoHome => &[Resting],
        }
    }

    pub fn can_become(self, to: PersonState) -> bool {
        self.successors().contains(&to)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PersonStats {
    pub late: bool,
    pub actual_time_in: Option<SimTime>,
    /// Estimate of the last solo route, seconds.
    pub time_to_cover: f64,
    pub distance_to_cover: f64,
    pub dist_covered_alone: f64,
}

/// One commute leg of the day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub direction: Direction,
    pub origin: NodeIx,
    pub destination: NodeIx,
    pub issued: SimTime,
    pub committed: Option<(ShuttleId, SimTime)>,
    pub boarded_at: Option<SimTime>,
    pub alighted_at: Option<SimTime>,
    /// Set when the person gave up on a lift and left alone.
    pub solo_since: Option<SimTime>,
    pub arrived_at: Option<SimTime>,
}

impl TripRecord {
    pub fn by_shuttle(&self) -> bool {
        self.alighted_at.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct Person {
    pub id: PersonId,
    pub home: NodeIx,
    pub work: NodeIx,
    pub work_start: SimTime,
    pub work_end: SimTime,
    /// Intersections within pickup radius of home.
    pub nearby: Vec<NodeIx>,
    pub state: PersonState,
    /// Node last reached; while aboard, where the person boarded.
    pub node: NodeIx,
    pub route: Option<Route>,
    pub aboard: Option<ShuttleId>,
    pub speed: f64,
    pub wait_deadline: Option<SimTime>,
    pub stats: PersonStats,
    pub trips: Vec<TripRecord>,
    /// Back home after work.
    pub day_done: bool,
}

impl Person {
    pub fn new(
        id: PersonId,
        home: NodeIx,
        work: NodeIx,
        work_start: SimTime,
        work_end: SimTime,
        speed: f64,
    ) -> Self {
        Self {
            id,
            home,
            work,
            work_start,
            work_end,
            nearby: Vec::new(),
            state: PersonState::Resting,
            node: home,
            route: None,
            aboard: None,
            speed,
            wait_deadline: None,
            stats: PersonStats::default(),
            trips: Vec::new(),
            day_done: false,
        }
    }

    /// Moving on the road on their own.
    pub fn is_solo_traveling(&self) -> bool {
        self.aboard.is_none() && self.route.as_ref().is_some_and(|r| !r.finished())
    }

    pub fn served(&self) -> bool {
        self.trips.iter().any(TripRecord::by_shuttle)
    }

    fn trip_mut(&mut self) -> &mut TripRecord {
        self.trips.last_mut().expect("a trip is under way")
    }
}

pub struct PersonCtx<'a> {
    pub graph: &'a RoadGraph<f64>,
    pub board: &'a mut RequestBoard,
    pub trace: &'a mut Trace,
    pub params: &'a AgentParams,
    pub clock: Clock,
    /// Commitments given up this tick, for the shuttles to drop.
    pub cancellations: &'a mut Vec<(ShuttleId, PersonId)>,
}

/// Routes the person from where they stand to `target`.
pub fn person_search_path(p: &mut Person, target: NodeIx, graph: &RoadGraph<f64>) {
    let path = shortest_path(graph, p.node, target)
        .expect("person stands on the graph")
        .expect("graph is strongly connected");
    p.stats.time_to_cover = path.travel_time;
    p.stats.distance_to_cover = path.length;
    p.route = Some(Route::new(path));
}

fn transition(p: &mut Person, to: PersonState, ctx: &mut PersonCtx) {
    debug_assert!(p.state.can_become(to), "{:?} -> {:?}", p.state, to);
    let (from, id, clock) = (p.state, p.id, ctx.clock);
    ctx.trace.event(|| Event::Transition {
        tick: clock.tick,
        time: clock.now,
        agent: AgentRef::Person(id),
        from: from.name().into(),
        to: to.name().into(),
    });
    p.state = to;
}

fn start_search(p: &mut Person, ctx: &mut PersonCtx, direction: Direction) {
    let now = ctx.clock.now;
    let (destination, state) = match direction {
        Direction::ToWork => (p.work, PersonState::SearchLiftToWork),
        Direction::ToHome => (p.home, PersonState::SearchLiftToHome),
    };
    let request = LiftRequest {
        person: p.id,
        origin: p.node,
        destination,
        direction,
        issued: now,
        expiry: now + ctx.params.wait_timeout,
        work_start: p.work_start,
        committed: None,
    };
    let (graph, clock) = (ctx.graph, ctx.clock);
    ctx.trace.event(|| Event::Request {
        tick: clock.tick,
        time: now,
        person: p.id,
        origin: graph.node(request.origin).id,
        destination: graph.node(destination).id,
        direction,
        expiry: request.expiry,
    });
    p.wait_deadline = Some(request.expiry);
    p.trips.push(TripRecord {
        direction,
        origin: p.node,
        destination,
        issued: now,
        committed: None,
        boarded_at: None,
        alighted_at: None,
        solo_since: None,
        arrived_at: None,
    });
    ctx.board.post(request);
    transition(p, state, ctx);
}

fn go_state(direction: Direction) -> PersonState {
    match direction {
        Direction::ToWork => PersonState::GoWork,
        Direction::ToHome => PersonState::GoHome,
    }
}

fn go_solo(p: &mut Person, ctx: &mut PersonCtx) {
    let direction = p.trip_mut().direction;
    p.trip_mut().solo_since = Some(ctx.clock.now);
    let target = match direction {
        Direction::ToWork => p.work,
        Direction::ToHome => p.home,
    };
    person_search_path(p, target, ctx.graph);
    p.wait_deadline = None;
    transition(p, go_state(direction), ctx);
}

fn arrive(p: &mut Person, at: SimTime, ctx: &mut PersonCtx) {
    p.route = None;
    p.trip_mut().arrived_at = Some(at);
    match p.state {
        PersonState::GoWork => {
            p.stats.actual_time_in = Some(at);
            p.stats.late = at > p.work_start;
            transition(p, PersonState::Working, ctx);
        }
        _ => {
            p.day_done = true;
            transition(p, PersonState::Resting, ctx);
        }
    }
}

/// Advances one person by one tick; at most one state change.
pub fn step_person(p: &mut Person, ctx: &mut PersonCtx) {
    let now = ctx.clock.now;
    match p.state {
        PersonState::Resting => {
            if !p.day_done && now >= p.work_start.saturating_sub(ctx.params.lookahead) {
                start_search(p, ctx, Direction::ToWork);
            }
        }
        PersonState::Working => {
            if now >= p.work_end {
                start_search(p, ctx, Direction::ToHome);
            }
        }
        PersonState::SearchLiftToWork | PersonState::SearchLiftToHome => {
            // A shuttle may commit and board within one of its stops, after
            // which the request is gone from the board.
            let committed = p
                .trips
                .last()
                .and_then(|t| t.committed)
                .or_else(|| ctx.board.get(p.id).and_then(|r| r.committed));
            if let Some(c) = committed {
                p.trip_mut().committed = Some(c);
                p.wait_deadline = Some(now + ctx.params.lift_patience);
                transition(p, PersonState::WaitForLift, ctx);
            } else if p.wait_deadline.is_some_and(|d| now >= d) {
                ctx.board.withdraw(p.id);
                go_solo(p, ctx);
            }
        }
        PersonState::WaitForLift => {
            let trip = p.trips.last().expect("waiting for a trip");
            if p.aboard.is_some() || trip.alighted_at.is_some() {
                p.wait_deadline = None;
                let next = go_state(trip.direction);
                transition(p, next, ctx);
            } else if p.wait_deadline.is_some_and(|d| now >= d) {
                if let Some((shuttle, _)) = trip.committed {
                    ctx.cancellations.push((shuttle, p.id));
                    let (id, clock) = (p.id, ctx.clock);
                    ctx.trace.event(|| Event::Cancel {
                        tick: clock.tick,
                        time: clock.now,
                        person: id,
                        shuttle,
                    });
                }
                ctx.board.withdraw(p.id);
                go_solo(p, ctx);
            }
        }
        PersonState::GoWork | PersonState::GoHome => {
            if p.aboard.is_some() {
                return;
            }
            let trip = p.trips.last().expect("travelling on a trip");
            if let Some(at) = trip.alighted_at {
                arrive(p, at, ctx);
                return;
            }
            let Some(route) = p.route.as_mut() else {
                return;
            };
            let dt = ctx.params.step_seconds as f64;
            let moved = advance_along_path(ctx.graph, &mut p.node, route, p.speed, dt, |_| false);
            p.stats.dist_covered_alone += moved.distance;
            if route.finished() {
                arrive(p, now, ctx);
            }
        }
    }
}
