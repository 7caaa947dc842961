//! Replays a run's logs against the rules agents must obey: state machine
//! edges, admission filters, seat cap, lateness guard, insertion work bound
//! and exact fare conservation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use serde::{Deserialize, Deserializer};
use thiserror::Error;

use crate::agents::{PersonState, ShuttleState};
use crate::engine::trace::{AgentRef, CandidateOutcome, DecisionRecord, Event};
use crate::engine::RunOutput;
use crate::output::{CHARGES, DECISIONS, EVENTS, LEDGER};
use crate::selforg::{Splice, ANGLE_EPSILON};
use crate::{Money, PersonId, ShuttleId, SHUTTLE_CAPACITY};

/// Largest target list a scan can see: one seat must be open to scan.
pub const MAX_SCANNED_TARGETS: usize = SHUTTLE_CAPACITY - 1;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("missing run file {0}")]
    Missing(PathBuf),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    UnknownState {
        agent: AgentRef,
        tick: u64,
        state: String,
    },
    IllegalTransition {
        agent: AgentRef,
        tick: u64,
        from: String,
        to: String,
    },
    BrokenChain {
        agent: AgentRef,
        tick: u64,
        expected: String,
        found: String,
    },
    Angle {
        shuttle: ShuttleId,
        tick: u64,
        person: PersonId,
        angle: Option<f64>,
        threshold: f64,
    },
    VisitedStop {
        shuttle: ShuttleId,
        tick: u64,
        person: PersonId,
        node: u64,
    },
    SeatCap {
        shuttle: ShuttleId,
        tick: u64,
        riders: usize,
    },
    LatenessGuard {
        shuttle: ShuttleId,
        tick: u64,
        destination: u64,
        detail: String,
    },
    OpBound {
        shuttle: ShuttleId,
        tick: u64,
        count: u64,
        bound: u64,
    },
    TooManyTargets {
        shuttle: ShuttleId,
        tick: u64,
        m: usize,
    },
    Conservation {
        shuttle: ShuttleId,
        detail: String,
    },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::UnknownState { .. } => "unknown_state",
            Violation::IllegalTransition { .. } => "illegal_transition",
            Violation::BrokenChain { .. } => "broken_chain",
            Violation::Angle { .. } => "angle",
            Violation::VisitedStop { .. } => "visited_stop",
            Violation::SeatCap { .. } => "seat_cap",
            Violation::LatenessGuard { .. } => "lateness_guard",
            Violation::OpBound { .. } => "op_bound",
            Violation::TooManyTargets { .. } => "too_many_targets",
            Violation::Conservation { .. } => "conservation",
        }
    }
}

fn agent(a: &AgentRef) -> String {
    match a {
        AgentRef::Person(p) => p.to_string(),
        AgentRef::Shuttle(s) => s.to_string(),
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.kind())?;
        match self {
            Violation::UnknownState { agent: a, tick, state } => {
                write!(f, "{} at tick {tick} names state {state:?}", agent(a))
            }
            Violation::IllegalTransition { agent: a, tick, from, to } => {
                write!(f, "{} at tick {tick} went {from} -> {to}", agent(a))
            }
            Violation::BrokenChain { agent: a, tick, expected, found } => write!(
                f,
                "{} at tick {tick} left {found} while in {expected}",
                agent(a)
            ),
            Violation::Angle { shuttle, tick, person, angle, threshold } => match angle {
                Some(a) => write!(
                    f,
                    "{shuttle} at tick {tick} admitted {person} at {a:.6} deg (limit {threshold})"
                ),
                None => write!(
                    f,
                    "{shuttle} at tick {tick} admitted {person} with no defined bearing"
                ),
            },
            Violation::VisitedStop { shuttle, tick, person, node } => write!(
                f,
                "{shuttle} at tick {tick} admitted {person} to visited node {node}"
            ),
            Violation::SeatCap { shuttle, tick, riders } => {
                write!(f, "{shuttle} at tick {tick} holds {riders} riders")
            }
            Violation::LatenessGuard { shuttle, tick, destination, detail } => write!(
                f,
                "{shuttle} at tick {tick} spliced node {destination}: {detail}"
            ),
            Violation::OpBound { shuttle, tick, count, bound } => write!(
                f,
                "{shuttle} at tick {tick} spent {count} path comparisons (bound {bound})"
            ),
            Violation::TooManyTargets { shuttle, tick, m } => {
                write!(f, "{shuttle} at tick {tick} scanned {m} targets")
            }
            Violation::Conservation { shuttle, detail } => write!(f, "{shuttle}: {detail}"),
        }
    }
}

fn de_money<'de, D: Deserializer<'de>>(d: D) -> Result<Money, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// One line of `ledger.jsonl`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct LegLine {
    pub shuttle: ShuttleId,
    #[serde(deserialize_with = "de_money")]
    pub cost_per_km: Money,
    pub index: usize,
    pub from: u32,
    pub to: u32,
    #[serde(deserialize_with = "de_money")]
    pub length: Money,
    pub passengers: Vec<PersonId>,
    #[serde(deserialize_with = "de_money")]
    pub cost: Money,
}

/// One line of `charges.jsonl`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ChargeLine {
    pub shuttle: ShuttleId,
    pub person: PersonId,
    #[serde(deserialize_with = "de_money")]
    pub charge: Money,
}

/// Everything the validators read.
#[derive(Clone, Debug, Default)]
pub struct RunLogs {
    pub events: Vec<Event>,
    pub decisions: Vec<DecisionRecord>,
    pub legs: Vec<LegLine>,
    pub charges: Vec<ChargeLine>,
}

impl RunLogs {
    pub fn from_output(out: &RunOutput) -> Self {
        let mut legs = Vec::new();
        let mut charges = Vec::new();
        for (s, l) in &out.ledgers {
            legs.extend(l.legs().iter().map(|leg| LegLine {
                shuttle: *s,
                cost_per_km: l.cost_per_km().clone(),
                index: leg.index,
                from: leg.from.0,
                to: leg.to.0,
                length: leg.length.clone(),
                passengers: leg.passengers.clone(),
                cost: leg.cost.clone(),
            }));
            charges.extend(l.charges().iter().map(|(p, c)| ChargeLine {
                shuttle: *s,
                person: *p,
                charge: c.clone(),
            }));
        }
        Self {
            events: out.trace.events.clone(),
            decisions: out.trace.decisions.clone(),
            legs,
            charges,
        }
    }

    /// Reads the trace and ledger files of a run directory.
    pub fn load(dir: &Path) -> Result<Self, ValidateError> {
        Ok(Self {
            events: read_jsonl(&dir.join(EVENTS))?,
            decisions: read_jsonl(&dir.join(DECISIONS))?,
            legs: read_jsonl(&dir.join(LEDGER))?,
            charges: read_jsonl(&dir.join(CHARGES))?,
        })
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ValidateError> {
    if !path.is_file() {
        return Err(ValidateError::Missing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| ValidateError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ValidateError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub transitions: usize,
    pub decisions: usize,
    pub admissions: usize,
    pub stops: usize,
    pub legs: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.violations.iter().filter(|v| v.kind() == kind).count()
    }
}

fn legal(agent: &AgentRef, from: &str, to: &str) -> Result<bool, String> {
    match agent {
        AgentRef::Person(_) => {
            let f = PersonState::from_name(from).ok_or(from)?;
            let t = PersonState::from_name(to).ok_or(to)?;
            Ok(f.can_become(t))
        }
        AgentRef::Shuttle(_) => {
            let f = ShuttleState::from_name(from).ok_or(from)?;
            let t = ShuttleState::from_name(to).ok_or(to)?;
            Ok(f.can_become(t))
        }
    }
    .map_err(|s: &str| s.to_string())
}

fn initial(agent: &AgentRef) -> &'static str {
    match agent {
        AgentRef::Person(_) => PersonState::Resting.name(),
        AgentRef::Shuttle(_) => ShuttleState::Wander.name(),
    }
}

/// Every transition must be an edge of its agent's state machine and start
/// where the agent's previous transition ended.
pub fn check_transitions(events: &[Event], out: &mut ValidationReport) {
    let mut current: BTreeMap<String, String> = BTreeMap::new();
    for e in events {
        let Event::Transition { tick, agent: a, from, to, .. } = e else {
            continue;
        };
        out.transitions += 1;
        match legal(a, from, to) {
            Err(state) => out.violations.push(Violation::UnknownState {
                agent: *a,
                tick: *tick,
                state,
            }),
            Ok(false) => out.violations.push(Violation::IllegalTransition {
                agent: *a,
                tick: *tick,
                from: from.clone(),
                to: to.clone(),
            }),
            Ok(true) => {}
        }
        let at = current
            .entry(agent(a))
            .or_insert_with(|| initial(a).to_string());
        if at != from {
            out.violations.push(Violation::BrokenChain {
                agent: *a,
                tick: *tick,
                expected: at.clone(),
                found: from.clone(),
            });
        }
        *at = to.clone();
    }
}

/// Riders on board plus those promised a seat never exceed capacity.
pub fn check_stops(events: &[Event], out: &mut ValidationReport) {
    for e in events {
        if let Event::Stop { tick, shuttle, aboard, waiting, .. } = e {
            out.stops += 1;
            if aboard + waiting > SHUTTLE_CAPACITY {
                out.violations.push(Violation::SeatCap {
                    shuttle: *shuttle,
                    tick: *tick,
                    riders: aboard + waiting,
                });
            }
        }
    }
}

/// Angle at `at` between the rays to `target` and to `c`, in degrees.
fn recomputed_angle(at: [f64; 2], target: [f64; 2], c: [f64; 2]) -> Option<f64> {
    let u = (target[0] - at[0], target[1] - at[1]);
    let v = (c[0] - at[0], c[1] - at[1]);
    let (nu, nv) = (u.0.hypot(u.1), v.0.hypot(v.1));
    if nu == 0.0 {
        return None;
    }
    if nv == 0.0 {
        return Some(0.0);
    }
    let cos = ((u.0 * v.0 + u.1 * v.1) / (nu * nv)).clamp(-1.0, 1.0);
    Some(cos.acos().to_degrees())
}

/// Admission filters, seat cap, lateness guard and the work bound of every
/// recorded admission attempt.
pub fn check_decisions(decisions: &[DecisionRecord], out: &mut ValidationReport) {
    for d in decisions {
        out.decisions += 1;
        let (shuttle, tick) = (d.shuttle, d.tick);
        let admitted: Vec<_> = d
            .candidates
            .iter()
            .filter(|c| c.outcome == CandidateOutcome::Admitted)
            .collect();
        out.admissions += admitted.len();
        // Recomputation differs from the recorded bearing only by rounding.
        let limit = d.angle_threshold + ANGLE_EPSILON + 1e-9;
        for c in &admitted {
            let angle = recomputed_angle(d.at_xy, d.final_xy, c.destination_xy);
            if angle.map_or(true, |a| a > limit) {
                out.violations.push(Violation::Angle {
                    shuttle,
                    tick,
                    person: c.person,
                    angle,
                    threshold: d.angle_threshold,
                });
            }
            if d.visited.contains(&c.destination) {
                out.violations.push(Violation::VisitedStop {
                    shuttle,
                    tick,
                    person: c.person,
                    node: c.destination,
                });
            }
        }
        let before = SHUTTLE_CAPACITY.saturating_sub(d.open_seats).max(d.aboard);
        if before + admitted.len() > SHUTTLE_CAPACITY {
            out.violations.push(Violation::SeatCap {
                shuttle,
                tick,
                riders: before + admitted.len(),
            });
        }
        for sp in &d.splices {
            let guarded = matches!(sp.splice, Some(Splice::At(_)));
            if !guarded || !d.first_work_bound {
                continue;
            }
            let breach = |detail: String| Violation::LatenessGuard {
                shuttle,
                tick,
                destination: sp.destination,
                detail,
            };
            let Some(g) = &sp.guard else {
                out.violations.push(breach("no guard evaluated".into()));
                continue;
            };
            let change = g.original - g.t2n + g.t2d + g.d2t;
            if (change - g.change).abs() > 1e-6 * change.abs().max(1.0) {
                out.violations.push(breach(format!(
                    "recorded change {} but parts give {change}",
                    g.change
                )));
            }
            if !(change < 1.5 * g.original && change <= g.av_time) {
                out.violations.push(breach(format!(
                    "change {change} against original {} and available {}",
                    g.original, g.av_time
                )));
            }
        }
        if d.ops.count > d.ops_per_position * d.ops.n as u64 * d.ops.m as u64 {
            out.violations.push(Violation::OpBound {
                shuttle,
                tick,
                count: d.ops.count,
                bound: d.ops.bound(),
            });
        }
        if d.ops.m > MAX_SCANNED_TARGETS {
            out.violations.push(Violation::TooManyTargets {
                shuttle,
                tick,
                m: d.ops.m,
            });
        }
    }
}

/// Leg costs follow from lengths, each billed leg is split evenly among its
/// passengers, and per shuttle the charges add up to the billed cost, all
/// exactly.
pub fn check_conservation(legs: &[LegLine], charges: &[ChargeLine], out: &mut ValidationReport) {
    let thousand = Money::from_integer(1000.into());
    let mut billed: BTreeMap<ShuttleId, Money> = BTreeMap::new();
    let mut owed: BTreeMap<(ShuttleId, PersonId), Money> = BTreeMap::new();
    for leg in legs {
        out.legs += 1;
        let s = leg.shuttle;
        let expected = &leg.length / &thousand * &leg.cost_per_km;
        if leg.cost != expected {
            out.violations.push(Violation::Conservation {
                shuttle: s,
                detail: format!("leg {} costs {} but its length gives {expected}", leg.index, leg.cost),
            });
        }
        if leg.passengers.is_empty() {
            continue;
        }
        *billed.entry(s).or_insert_with(Money::zero) += &leg.cost;
        let share = &leg.cost / Money::from_integer(leg.passengers.len().into());
        for p in &leg.passengers {
            *owed.entry((s, *p)).or_insert_with(Money::zero) += &share;
        }
    }
    let mut charged: BTreeMap<ShuttleId, Money> = BTreeMap::new();
    let mut seen: BTreeMap<(ShuttleId, PersonId), Money> = BTreeMap::new();
    for c in charges {
        *charged.entry(c.shuttle).or_insert_with(Money::zero) += &c.charge;
        *seen.entry((c.shuttle, c.person)).or_insert_with(Money::zero) += &c.charge;
    }
    let shuttles: std::collections::BTreeSet<ShuttleId> =
        billed.keys().chain(charged.keys()).copied().collect();
    for s in shuttles {
        let zero = Money::zero();
        let b = billed.get(&s).unwrap_or(&zero);
        let c = charged.get(&s).unwrap_or(&zero);
        if b != c {
            out.violations.push(Violation::Conservation {
                shuttle: s,
                detail: format!("charges sum to {c} but billed legs cost {b}"),
            });
        }
    }
    let keys: std::collections::BTreeSet<_> = owed.keys().chain(seen.keys()).copied().collect();
    for (s, p) in keys {
        let zero = Money::zero();
        let o = owed.get(&(s, p)).unwrap_or(&zero);
        let c = seen.get(&(s, p)).unwrap_or(&zero);
        if o != c {
            out.violations.push(Violation::Conservation {
                shuttle: s,
                detail: format!("{p} charged {c} but owes {o} for legs ridden"),
            });
        }
    }
}

pub fn validate(logs: &RunLogs) -> ValidationReport {
    let mut out = ValidationReport::default();
    check_transitions(&logs.events, &mut out);
    check_stops(&logs.events, &mut out);
    check_decisions(&logs.decisions, &mut out);
    check_conservation(&logs.legs, &logs.charges, &mut out);
    out
}

pub fn validate_run_dir(dir: &Path) -> Result<ValidationReport, ValidateError> {
    Ok(validate(&RunLogs::load(dir)?))
}
