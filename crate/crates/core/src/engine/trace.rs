//! Structured records of what happened during a run.

use serde::{Deserialize, Serialize};

use crate::agents::Direction;
use crate::selforg::{GuardCheck, OpCount, RejectReason, Splice};
use crate::{PersonId, ShuttleId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRef {
    Person(PersonId),
    Shuttle(ShuttleId),
}

/// One line of the event log. Node references are intersection ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Transition {
        tick: u64,
        time: u64,
        agent: AgentRef,
        from: String,
        to: String,
    },
    Request {
        tick: u64,
        time: u64,
        person: PersonId,
        origin: u64,
        destination: u64,
        direction: Direction,
        expiry: u64,
    },
    Commit {
        tick: u64,
        time: u64,
        person: PersonId,
        shuttle: ShuttleId,
    },
    Cancel {
        tick: u64,
        time: u64,
        person: PersonId,
        shuttle: ShuttleId,
    },
    Stop {
        tick: u64,
        time: u64,
        shuttle: ShuttleId,
        node: u64,
        boarded: Vec<PersonId>,
        alighted: Vec<PersonId>,
        /// Riders aboard after the event.
        aboard: usize,
        /// Riders taken on but not yet aboard.
        waiting: usize,
    },
}

impl Event {
    pub fn tick(&self) -> u64 {
        match self {
            Event::Transition { tick, .. }
            | Event::Request { tick, .. }
            | Event::Commit { tick, .. }
            | Event::Cancel { tick, .. }
            | Event::Stop { tick, .. } => *tick,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOutcome {
    Admitted,
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub person: PersonId,
    pub destination: u64,
    pub destination_xy: [f64; 2],
    pub angle: Option<f64>,
    pub outcome: CandidateOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpliceRecord {
    pub destination: u64,
    pub splice: Option<Splice>,
    pub guard: Option<GuardCheck<f64>>,
}

/// One admission attempt by one shuttle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub tick: u64,
    pub time: u64,
    pub shuttle: ShuttleId,
    pub at: u64,
    pub at_xy: [f64; 2],
    pub final_target: u64,
    pub final_xy: [f64; 2],
    pub new_origin: u64,
    pub angle_threshold: f64,
    pub visited: Vec<u64>,
    pub aboard: usize,
    pub open_seats: usize,
    pub first_work_bound: bool,
    pub candidates: Vec<CandidateRecord>,
    pub splices: Vec<SpliceRecord>,
    pub ops: OpCount,
    pub ops_per_position: u64,
}

/// Event and decision logs; recording is skipped when disabled.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub enabled: bool,
    pub events: Vec<Event>,
    pub decisions: Vec<DecisionRecord>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            ..Self::default()
        }
    }

    pub fn event(&mut self, e: impl FnOnce() -> Event) {
        if self.enabled {
            self.events.push(e());
        }
    }

    pub fn decision(&mut self, d: impl FnOnce() -> DecisionRecord) {
        if self.enabled {
            self.decisions.push(d());
        }
    }
}
