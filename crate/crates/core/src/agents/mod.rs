//! The three species living on the road graph: people commuting between home
//! and work, autonomous shuttles, and common cars making background traffic.

mod car;
mod person;
mod shuttle;

pub use car::{step_common_car, CommonCar};
pub use person::{person_search_path, step_person, Person, PersonCtx, PersonState, PersonStats, TripRecord};
pub use shuttle::{cancel_rider, step_shuttle, Rider, ServicePlan, Shuttle, ShuttleCtx, ShuttleState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costing::CostError;
use crate::geodata::GeoError;
use crate::selforg::SelforgError;

use crate::geodata::{NodeIx, RoadGraph};
use crate::selforg::Candidate;
use crate::{PersonId, ShuttleId, SimTime};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("{0} over capacity with {1} riders")]
    OverCapacity(ShuttleId, usize),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Selforg(#[from] SelforgError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// 5 km/h: common cars slower than this give up their route.
pub const STUCK_SPEED: f64 = 5.0 / 3.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToWork,
    ToHome,
}

/// Behavior parameters shared by all agents of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    pub step_seconds: u64,
    /// Seconds before work start when people begin looking for a lift.
    pub lookahead: u64,
    /// How long a request stays open without a shuttle committing.
    pub wait_timeout: u64,
    /// How long a committed person waits for pickup before leaving alone.
    pub lift_patience: u64,
    pub pickup_radius: f64,
    pub angle_threshold: f64,
    pub dwell: u64,
    pub shuttle_speed: f64,
    pub car_speed: f64,
    pub solo_speed: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            step_seconds: 1,
            lookahead: 30 * 60,
            wait_timeout: 10 * 60,
            lift_patience: 30 * 60,
            pickup_radius: 300.0,
            angle_threshold: 20.0,
            dwell: 10,
            shuttle_speed: 50.0 / 3.6,
            car_speed: 50.0 / 3.6,
            solo_speed: 30.0 / 3.6,
        }
    }
}

/// Current tick and its simulated time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clock {
    pub tick: u64,
    pub now: SimTime,
}

/// Nodes within pickup radius of every node, nearest first.
#[derive(Clone, Debug)]
pub struct NearIndex {
    near: Vec<Vec<NodeIx>>,
}

impl NearIndex {
    pub fn new(graph: &RoadGraph<f64>, radius: f64) -> Self {
        let near = graph
            .node_ixs()
            .map(|n| {
                let at = graph.pos(n);
                let mut v: Vec<(f64, NodeIx)> = graph
                    .nodes_within(n, radius)
                    .into_iter()
                    .map(|m| (graph.pos(m).distance(at), m))
                    .collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                v.into_iter().map(|(_, m)| m).collect()
            })
            .collect();
        Self { near }
    }

    pub fn of(&self, n: NodeIx) -> &[NodeIx] {
        &self.near[n.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftRequest {
    pub person: PersonId,
    pub origin: NodeIx,
    pub destination: NodeIx,
    pub direction: Direction,
    pub issued: SimTime,
    pub expiry: SimTime,
    pub work_start: SimTime,
    pub committed: Option<(ShuttleId, SimTime)>,
}

impl LiftRequest {
    pub fn candidate(&self) -> Candidate {
        Candidate {
            person: self.person,
            origin: self.origin,
            destination: self.destination,
            issued: self.issued,
        }
    }
}

/// Lift requests currently posted, with the open (uncommitted) ones indexed
/// by origin node in posting order.
#[derive(Clone, Debug)]
pub struct RequestBoard {
    requests: std::collections::BTreeMap<PersonId, LiftRequest>,
    open_at: Vec<Vec<PersonId>>,
}

impl RequestBoard {
    pub fn new(node_count: usize) -> Self {
        Self {
            requests: Default::default(),
            open_at: vec![Vec::new(); node_count],
        }
    }

    pub fn post(&mut self, r: LiftRequest) {
        self.open_at[r.origin.index()].push(r.person);
        self.requests.insert(r.person, r);
    }

    pub fn get(&self, p: PersonId) -> Option<&LiftRequest> {
        self.requests.get(&p)
    }

    fn close(&mut self, r: &LiftRequest) {
        self.open_at[r.origin.index()].retain(|q| *q != r.person);
    }

    /// Marks `p`'s request as taken by `shuttle`; it stops being offered.
    pub fn commit(&mut self, p: PersonId, shuttle: ShuttleId, now: SimTime) {
        if let Some(r) = self.requests.get_mut(&p) {
            if r.committed.is_none() {
                r.committed = Some((shuttle, now));
                let r = r.clone();
                self.close(&r);
            }
        }
    }

    pub fn withdraw(&mut self, p: PersonId) -> Option<LiftRequest> {
        let r = self.requests.remove(&p)?;
        if r.committed.is_none() {
            self.close(&r);
        }
        Some(r)
    }

    /// Drops open requests whose expiry has come.
    pub fn expire(&mut self, now: SimTime) -> Vec<PersonId> {
        let gone: Vec<PersonId> = self
            .requests
            .values()
            .filter(|r| r.committed.is_none() && r.expiry <= now)
            .map(|r| r.person)
            .collect();
        for p in &gone {
            self.withdraw(*p);
        }
        gone
    }

    pub fn has_open(&self, n: NodeIx) -> bool {
        !self.open_at[n.index()].is_empty()
    }

    pub fn has_open_near(&self, near: &[NodeIx]) -> bool {
        near.iter().any(|n| self.has_open(*n))
    }

    /// Open requests at `n`, earliest first.
    pub fn open_at(&self, n: NodeIx) -> Vec<Candidate> {
        let mut v: Vec<Candidate> = self.open_at[n.index()]
            .iter()
            .map(|p| self.requests[p].candidate())
            .collect();
        v.sort_by_key(|c| (c.issued, c.person));
        v
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(p: u32, origin: u32, issued: u64) -> LiftRequest {
        LiftRequest {
            person: PersonId(p),
            origin: NodeIx(origin),
            destination: NodeIx(9),
            direction: Direction::ToWork,
            issued,
            expiry: issued + 600,
            work_start: issued + 1800,
            committed: None,
        }
    }

    #[test]
    fn board_lifecycle() {
        let mut b = RequestBoard::new(10);
        b.post(req(2, 1, 5));
        b.post(req(1, 1, 5));
        b.post(req(3, 4, 0));
        let open: Vec<_> = b.open_at(NodeIx(1)).iter().map(|c| c.person).collect();
        assert_eq!(open, vec![PersonId(1), PersonId(2)]);
        assert!(b.has_open_near(&[NodeIx(0), NodeIx(4)]));

        b.commit(PersonId(1), ShuttleId(0), 7);
        assert_eq!(b.open_at(NodeIx(1)).len(), 1);
        assert_eq!(b.get(PersonId(1)).unwrap().committed, Some((ShuttleId(0), 7)));

        assert_eq!(b.expire(605), vec![PersonId(2), PersonId(3)]);
        assert!(!b.has_open(NodeIx(1)));
        assert_eq!(b.len(), 1, "committed requests never expire");
        assert!(b.withdraw(PersonId(1)).is_some());
        assert!(b.is_empty());
    }
}
