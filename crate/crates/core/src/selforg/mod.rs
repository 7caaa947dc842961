//! Per-shuttle decision logic: forming the first group, filtering
//! candidates met on the road, and inserting their destinations into the
//! shuttle's running plan.
//!
//! Everything here is a pure function of an explicit context; a shuttle only
//! ever reads requests near its own position and its own lists.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodata::{bearing_angle, path_travel_time, shortest_path, GeoError, NodeIx, Path, RoadGraph};
use crate::{PersonId, Scalar, SHUTTLE_CAPACITY};

/// Path computations charged per scanned insertion position
/// (`t2d`, `t2n`, and `d2t` on a hit).
pub const OPS_PER_POSITION: u64 = 3;

/// Slack on the angle threshold for bearings that should be exactly equal
/// to it but are off by rounding.
pub const ANGLE_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelforgError {
    #[error("no lift requests to form a group from")]
    NoRequests,
    #[error("candidates stand at different origins")]
    MixedOrigins,
    #[error("shuttle has no final target")]
    NoFinalTarget,
    #[error("node {0:?} cannot reach node {1:?}")]
    Unreachable(NodeIx, NodeIx),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// A pending lift request as seen by a shuttle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub person: PersonId,
    pub origin: NodeIx,
    pub destination: NodeIx,
    pub issued: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Angle,
    VisitedStop,
    NoSeats,
    LatenessGuard,
}

fn route<S: Scalar>(graph: &RoadGraph<S>, a: NodeIx, b: NodeIx) -> Result<Path<S>, SelforgError> {
    shortest_path(graph, a, b)?.ok_or(SelforgError::Unreachable(a, b))
}

/// Concatenated shortest paths from `from` through every node of `via`.
pub fn route_through<S: Scalar>(
    graph: &RoadGraph<S>,
    from: NodeIx,
    via: &[NodeIx],
) -> Result<Path<S>, SelforgError> {
    let mut path = Path::empty(from);
    let mut at = from;
    for &next in via {
        if next != at {
            path = path.concat(&route(graph, at, next)?);
            at = next;
        }
    }
    Ok(path)
}

/// The first group picked up by a wandering shuttle.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialGroup<S> {
    pub origin: NodeIx,
    pub group: Vec<Candidate>,
    pub no_seats: Vec<PersonId>,
    pub final_target: NodeIx,
    pub targets: Vec<NodeIx>,
    /// The origin followed by the targets.
    pub stops: Vec<NodeIx>,
    /// From the origin through every target.
    pub path: Path<S>,
}

/// Picks the first group from the requests a wandering shuttle sees.
///
/// The group is made of the requests waiting where the earliest request was
/// issued, earliest first, at most one per seat. The final target is the
/// destination farthest in travel time from that origin; the others are
/// placed in front of it by the same first-shorter scan used for later
/// insertions.
pub fn form_initial_group<S: Scalar>(
    graph: &RoadGraph<S>,
    requests: &[Candidate],
) -> Result<InitialGroup<S>, SelforgError> {
    let mut sorted: Vec<&Candidate> = requests.iter().collect();
    sorted.sort_by_key(|c| (c.issued, c.person));
    let origin = sorted.first().ok_or(SelforgError::NoRequests)?.origin;
    let at_origin: Vec<Candidate> = sorted
        .into_iter()
        .filter(|c| c.origin == origin)
        .cloned()
        .collect();
    let take = at_origin.len().min(SHUTTLE_CAPACITY);
    let group = at_origin[..take].to_vec();
    let no_seats = at_origin[take..].iter().map(|c| c.person).collect();

    let mut destinations: Vec<NodeIx> = Vec::new();
    for c in &group {
        if !destinations.contains(&c.destination) {
            destinations.push(c.destination);
        }
    }
    let mut final_target = destinations[0];
    let mut farthest = S::neg_infinity();
    for &d in &destinations {
        let t = route(graph, origin, d)?.travel_time;
        if t > farthest || (t == farthest && d < final_target) {
            farthest = t;
            final_target = d;
        }
    }

    let mut targets = vec![final_target];
    for &d in destinations.iter().filter(|d| **d != final_target) {
        let mut placed = false;
        for i in 1..=targets.len() {
            let from = if i == 1 { origin } else { targets[i - 2] };
            let to = targets[i - 1];
            if route(graph, from, d)?.length < route(graph, from, to)?.length {
                targets.insert(i - 1, d);
                placed = true;
                break;
            }
        }
        if !placed {
            let last = targets.len() - 1;
            targets.insert(last, d);
        }
    }
    let mut stops = vec![origin];
    stops.extend_from_slice(&targets);
    let path = route_through(graph, origin, &targets)?;
    Ok(InitialGroup {
        origin,
        group,
        no_seats,
        final_target,
        targets,
        stops,
        path,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Filtered<S> {
    pub kept: Vec<Candidate>,
    pub rejected: Vec<(PersonId, RejectReason)>,
    /// Bearing of every candidate's destination; `None` when undefined.
    pub angles: Vec<(PersonId, Option<S>)>,
}

/// Drops candidates heading away from the shuttle's final target or to a stop
/// it already served this episode. Survivors keep their input order.
pub fn filter_candidates<S: Scalar>(
    graph: &RoadGraph<S>,
    at: NodeIx,
    final_target: NodeIx,
    visited: &BTreeSet<NodeIx>,
    candidates: &[Candidate],
    threshold_deg: S,
) -> Filtered<S> {
    let mut out = Filtered {
        kept: Vec::new(),
        rejected: Vec::new(),
        angles: Vec::new(),
    };
    let limit = threshold_deg + S::lit(ANGLE_EPSILON);
    for c in candidates {
        let angle = bearing_angle(graph.pos(at), graph.pos(final_target), graph.pos(c.destination)).ok();
        out.angles.push((c.person, angle));
        match angle {
            Some(a) if a <= limit => {
                if visited.contains(&c.destination) {
                    out.rejected.push((c.person, RejectReason::VisitedStop));
                } else {
                    out.kept.push(c.clone());
                }
            }
            _ => out.rejected.push((c.person, RejectReason::Angle)),
        }
    }
    out
}

/// The passenger whose ride the lateness guard protects.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstPassenger<S> {
    pub person: PersonId,
    pub work_bound: bool,
    /// Their ride as computed when they were taken on.
    pub original: Path<S>,
    /// Seconds they can still afford.
    pub av_time: S,
}

/// Path-comparison counter for one admission attempt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    /// Candidates that survived filtering.
    pub n: usize,
    /// Largest target list scanned.
    pub m: usize,
    pub count: u64,
}

impl OpCount {
    pub fn bound(&self) -> u64 {
        OPS_PER_POSITION * self.n as u64 * self.m as u64
    }
}

#[derive(Clone, Debug)]
pub struct InsertionContext<S> {
    pub targets: Vec<NodeIx>,
    pub stops: Vec<NodeIx>,
    /// Index into `stops` of the next stop to visit.
    pub next_stop: usize,
    /// The shuttle's node.
    pub current: NodeIx,
    /// Where the candidates stand.
    pub new_origin: NodeIx,
    pub open_seats: usize,
    pub first: Option<FirstPassenger<S>>,
    pub tot_added_passengers: usize,
    pub added: bool,
    pub as_last: bool,
    /// Carried for completeness; nothing reads it.
    pub up_costs_pass: bool,
    pub ops: OpCount,
}

impl<S: Scalar> InsertionContext<S> {
    pub fn new(
        targets: Vec<NodeIx>,
        stops: Vec<NodeIx>,
        next_stop: usize,
        current: NodeIx,
        new_origin: NodeIx,
        open_seats: usize,
        first: Option<FirstPassenger<S>>,
    ) -> Self {
        Self {
            targets,
            stops,
            next_stop,
            current,
            new_origin,
            open_seats,
            first,
            tot_added_passengers: 0,
            added: false,
            as_last: false,
            up_costs_pass: false,
            ops: OpCount::default(),
        }
    }

    /// Puts `d` in stops right before the pending drop-off at `before`.
    fn splice_stop(&mut self, d: NodeIx, before: NodeIx) {
        let from = self.next_stop.min(self.stops.len());
        match self.stops[from..].iter().rposition(|s| *s == before) {
            Some(k) => self.stops.insert(from + k, d),
            None => self.stops.push(d),
        }
    }
}

/// Where a destination ended up in the target list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "position")]
pub enum Splice {
    /// Already a target.
    Existing,
    /// Inserted as target number `i` (1-based).
    At(usize),
    /// Appended after every target.
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardCheck<S> {
    pub original: S,
    pub t2n: S,
    pub t2d: S,
    pub d2t: S,
    pub change: S,
    pub av_time: S,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DestinationOutcome<S> {
    pub destination: NodeIx,
    pub admitted: Vec<PersonId>,
    pub rejected: Vec<(PersonId, RejectReason)>,
    pub splice: Option<Splice>,
    pub guard: Option<GuardCheck<S>>,
    pub path_changed: bool,
}

/// Tries to fit destination `d`, wanted by `group`, into the plan.
///
/// Already-planned destinations are admitted as they are. Otherwise target
/// positions are scanned left to right and `d` goes in front of the first
/// target that is farther (by path length) from the previous stop than `d`
/// is. When the first passenger rides to work the detour must also pass the
/// lateness guard, and a failed guard ends the scan. If no position fits,
/// `d` becomes the last target. Only as many of `group` as there are free
/// seats are taken.
pub fn insert_destination<S: Scalar>(
    graph: &RoadGraph<S>,
    ctx: &mut InsertionContext<S>,
    d: NodeIx,
    group: &[PersonId],
) -> Result<DestinationOutcome<S>, SelforgError> {
    let mut out = DestinationOutcome {
        destination: d,
        admitted: Vec::new(),
        rejected: Vec::new(),
        splice: None,
        guard: None,
        path_changed: false,
    };
    let take = group.len().min(ctx.open_seats);
    let (fits, overflow) = group.split_at(take);
    out.rejected
        .extend(overflow.iter().map(|p| (*p, RejectReason::NoSeats)));
    if fits.is_empty() {
        return Ok(out);
    }
    ctx.added = false;

    let admit = |ctx: &mut InsertionContext<S>, out: &mut DestinationOutcome<S>| {
        out.admitted.extend_from_slice(fits);
        ctx.open_seats -= fits.len();
        ctx.tot_added_passengers += fits.len();
        ctx.added = true;
    };

    if ctx.targets.contains(&d) {
        out.splice = Some(Splice::Existing);
        admit(ctx, &mut out);
        return Ok(out);
    }
    let positions = ctx.targets.len();
    ctx.ops.m = ctx.ops.m.max(positions);
    for i in 1..=positions {
        let from = if i == 1 { ctx.new_origin } else { ctx.targets[i - 2] };
        let to = ctx.targets[i - 1];
        let t2d = route(graph, from, d)?;
        let t2n = route(graph, from, to)?;
        ctx.ops.count += 2;
        if t2d.length < t2n.length {
            let d2t = route(graph, d, to)?;
            ctx.ops.count += 1;
            let mut check = true;
            if let Some(first) = ctx.first.as_ref().filter(|f| f.work_bound) {
                let original = path_travel_time(&first.original, graph);
                let (tn, td, dt) = (
                    path_travel_time(&t2n, graph),
                    path_travel_time(&t2d, graph),
                    path_travel_time(&d2t, graph),
                );
                let change = original - tn + td + dt;
                check = change < original * S::lit(1.5) && first.av_time >= change;
                out.guard = Some(GuardCheck {
                    original,
                    t2n: tn,
                    t2d: td,
                    d2t: dt,
                    change,
                    av_time: first.av_time,
                    passed: check,
                });
            }
            if check {
                ctx.targets.insert(i - 1, d);
                ctx.splice_stop(d, to);
                out.splice = Some(Splice::At(i));
                out.path_changed = i == 1;
                admit(ctx, &mut out);
            } else {
                out.rejected
                    .extend(fits.iter().map(|p| (*p, RejectReason::LatenessGuard)));
            }
            return Ok(out);
        }
    }
    ctx.targets.push(d);
    ctx.stops.push(d);
    ctx.as_last = true;
    out.splice = Some(Splice::Last);
    admit(ctx, &mut out);
    Ok(out)
}

/// What a shuttle knows about itself when candidates show up.
#[derive(Clone, Debug)]
pub struct ShuttleView<'a, S> {
    pub current: NodeIx,
    pub targets: &'a [NodeIx],
    pub stops: &'a [NodeIx],
    pub next_stop: usize,
    pub visited: &'a BTreeSet<NodeIx>,
    pub open_seats: usize,
    pub first: Option<FirstPassenger<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissionDecision<S> {
    pub new_origin: NodeIx,
    pub final_target: NodeIx,
    pub open_seats: usize,
    pub admitted: Vec<PersonId>,
    pub rejected: Vec<(PersonId, RejectReason)>,
    pub targets: Vec<NodeIx>,
    pub stops: Vec<NodeIx>,
    pub path_changed: bool,
    pub angles: Vec<(PersonId, Option<S>)>,
    pub outcomes: Vec<DestinationOutcome<S>>,
    pub ops: OpCount,
}

/// Runs the filter and the insertion loop for candidates standing at one
/// origin.
///
/// On any admission the origin becomes the next stop; otherwise stops and
/// targets come back unchanged.
pub fn try_admit<S: Scalar>(
    graph: &RoadGraph<S>,
    view: &ShuttleView<'_, S>,
    candidates: &[Candidate],
    threshold_deg: S,
) -> Result<AdmissionDecision<S>, SelforgError> {
    let final_target = *view.targets.last().ok_or(SelforgError::NoFinalTarget)?;
    let new_origin = match candidates.first() {
        Some(c) => c.origin,
        None => view.current,
    };
    if candidates.iter().any(|c| c.origin != new_origin) {
        return Err(SelforgError::MixedOrigins);
    }
    let filtered = filter_candidates(
        graph,
        view.current,
        final_target,
        view.visited,
        candidates,
        threshold_deg,
    );

    let mut ctx = InsertionContext::new(
        view.targets.to_vec(),
        view.stops.to_vec(),
        view.next_stop,
        view.current,
        new_origin,
        view.open_seats,
        view.first.clone(),
    );
    ctx.ops.n = filtered.kept.len();
    let origin_slot = ctx.next_stop.min(ctx.stops.len());
    let origin_inserted = ctx.stops.get(origin_slot) != Some(&new_origin);
    if origin_inserted {
        ctx.stops.insert(origin_slot, new_origin);
    }

    let mut destinations: Vec<(NodeIx, Vec<PersonId>)> = Vec::new();
    for c in &filtered.kept {
        match destinations.iter_mut().find(|(d, _)| *d == c.destination) {
            Some((_, group)) => group.push(c.person),
            None => destinations.push((c.destination, vec![c.person])),
        }
    }

    let mut rejected = filtered.rejected;
    let mut admitted = Vec::new();
    let mut outcomes = Vec::new();
    let mut path_changed = false;
    for (k, (d, group)) in destinations.iter().enumerate() {
        if ctx.open_seats == 0 {
            for (_, rest) in &destinations[k..] {
                rejected.extend(rest.iter().map(|p| (*p, RejectReason::NoSeats)));
            }
            break;
        }
        let outcome = insert_destination(graph, &mut ctx, *d, group)?;
        admitted.extend_from_slice(&outcome.admitted);
        rejected.extend_from_slice(&outcome.rejected);
        path_changed |= outcome.path_changed;
        outcomes.push(outcome);
    }

    if ctx.tot_added_passengers == 0 && origin_inserted {
        ctx.stops.remove(origin_slot);
    }
    path_changed |= ctx.tot_added_passengers > 0;
    Ok(AdmissionDecision {
        new_origin,
        final_target,
        open_seats: view.open_seats,
        admitted,
        rejected,
        targets: ctx.targets,
        stops: ctx.stops,
        path_changed,
        angles: filtered.angles,
        outcomes,
        ops: ctx.ops,
    })
}

#[cfg(test)]
mod tests;
