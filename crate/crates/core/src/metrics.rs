//! Per-run measurements: the sampled series collected while the engine runs
//! and the summary computed once it stops.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::agents::{Direction, Person, Shuttle};
use crate::{Money, PersonId, SimTime};

/// Seconds between two samples of the series.
pub const SAMPLE_INTERVAL: u64 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub time: SimTime,
    pub served_users: usize,
    pub shuttles_in_use: usize,
    pub late_users: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledSeries {
    pub interval: u64,
    pub samples: Vec<Sample>,
}

impl SampledSeries {
    pub const NAMES: [&'static str; 3] = ["served_users", "shuttles_in_use", "late_users"];

    /// Long-format rows `(series, time, value)`, grouped by series.
    pub fn long_rows(&self) -> Vec<(&'static str, SimTime, usize)> {
        let mut rows = Vec::with_capacity(self.samples.len() * Self::NAMES.len());
        for name in Self::NAMES {
            for s in &self.samples {
                let v = match name {
                    "served_users" => s.served_users,
                    "shuttles_in_use" => s.shuttles_in_use,
                    _ => s.late_users,
                };
                rows.push((name, s.time, v));
            }
        }
        rows
    }
}

/// Served users: at least one shuttle trip completed.
pub fn served_count(persons: &[Person]) -> usize {
    persons.iter().filter(|p| p.served()).count()
}

/// Lateness in seconds of a person whose ride to work was a shuttle's.
fn served_lateness(p: &Person) -> Option<u64> {
    let to_work = p
        .trips
        .iter()
        .find(|t| t.direction == Direction::ToWork && t.by_shuttle())?;
    let arrived = to_work.arrived_at?;
    (arrived > p.work_start).then(|| arrived - p.work_start)
}

/// Samples the series while the engine runs.
#[derive(Clone, Debug)]
pub struct Collector {
    start: SimTime,
    pub series: SampledSeries,
}

impl Collector {
    pub fn new(start: SimTime, interval: u64) -> Self {
        Self {
            start,
            series: SampledSeries {
                interval: interval.max(1),
                samples: Vec::new(),
            },
        }
    }

    fn sample(&mut self, now: SimTime, persons: &[Person], shuttles: &[Shuttle]) {
        if self.series.samples.last().is_some_and(|s| s.time >= now) {
            return;
        }
        self.series.samples.push(Sample {
            time: now,
            served_users: served_count(persons),
            shuttles_in_use: shuttles.iter().filter(|s| s.in_use()).count(),
            late_users: persons.iter().filter(|p| served_lateness(p).is_some()).count(),
        });
    }

    /// Called once per tick after everything moved.
    pub fn collect(&mut self, now: SimTime, persons: &[Person], shuttles: &[Shuttle]) {
        if now >= self.start && (now - self.start) % self.series.interval == 0 {
            self.sample(now, persons, shuttles);
        }
    }

    /// Takes the closing sample so the series ends on the final counters.
    pub fn finish(&mut self, now: SimTime, persons: &[Person], shuttles: &[Shuttle]) {
        self.sample(now, persons, shuttles);
    }
}

/// Min, max and mean of the per-shuttle lift counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftStats {
    pub avg: f64,
    pub min: u32,
    pub max: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub users_total: usize,
    pub users_served: usize,
    /// Served users by shuttle boarding records.
    pub users_boarded: usize,
    pub served_late_count: usize,
    pub avg_late_minutes: Option<f64>,
    /// Total fare per served user, ascending.
    pub cost_distribution: Vec<Money>,
    pub avg_travel_cost: Option<Money>,
    /// Request-to-commitment seconds of every shuttle trip of served users.
    pub waiting_seconds: Vec<u64>,
    pub avg_waiting_minutes: Option<f64>,
    pub lifts: Vec<u32>,
    pub lift_stats: Option<LiftStats>,
    pub total_gain: Money,
    /// Σ passenger charges over the fleet; equals `total_gain`.
    pub total_charged: Money,
    pub km_per_shuttle: Vec<f64>,
    pub avg_km_per_shuttle: Option<f64>,
    pub end_time: SimTime,
    pub ticks: u64,
    pub incomplete: bool,
    pub series: SampledSeries,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MetricsReport {
    pub fn served_pct(&self) -> Option<f64> {
        (self.users_total > 0).then(|| 100.0 * self.users_served as f64 / self.users_total as f64)
    }

    pub fn late_pct(&self) -> Option<f64> {
        (self.users_served > 0)
            .then(|| 100.0 * self.served_late_count as f64 / self.users_served as f64)
    }

    pub fn avg_travel_cost_f64(&self) -> Option<f64> {
        self.avg_travel_cost.as_ref().and_then(ToPrimitive::to_f64)
    }
}

/// Computes the report from the final agent states.
pub fn summarize(
    persons: &[Person],
    shuttles: &[Shuttle],
    series: SampledSeries,
    end_time: SimTime,
    ticks: u64,
    incomplete: bool,
) -> MetricsReport {
    let served: Vec<&Person> = persons.iter().filter(|p| p.served()).collect();

    let mut charges: BTreeMap<PersonId, Money> = BTreeMap::new();
    let mut total_gain = Money::zero();
    for s in shuttles {
        total_gain += s.ledger.billed_cost();
        for (p, c) in s.ledger.charges() {
            *charges.entry(*p).or_insert_with(Money::zero) += c;
        }
    }
    let total_charged = charges.values().fold(Money::zero(), |a, c| a + c);
    let boarded: BTreeSet<PersonId> = charges.keys().copied().collect();

    let mut cost_distribution: Vec<Money> = served
        .iter()
        .map(|p| charges.get(&p.id).cloned().unwrap_or_else(Money::zero))
        .collect();
    cost_distribution.sort();
    let avg_travel_cost = (!served.is_empty()).then(|| {
        let sum = cost_distribution.iter().fold(Money::zero(), |a, c| a + c);
        sum / BigRational::from_integer(served.len().into())
    });

    let waiting_seconds: Vec<u64> = served
        .iter()
        .flat_map(|p| p.trips.iter())
        .filter(|t| t.by_shuttle())
        .filter_map(|t| t.committed.map(|(_, c)| c.saturating_sub(t.issued)))
        .collect();
    let avg_waiting_minutes = mean(waiting_seconds.iter().map(|w| *w as f64 / 60.0));

    let late: Vec<u64> = served.iter().filter_map(|p| served_lateness(p)).collect();
    let avg_late_minutes = mean(late.iter().map(|l| *l as f64 / 60.0));

    let lifts: Vec<u32> = shuttles.iter().map(|s| s.lifts).collect();
    let lift_stats = (!lifts.is_empty()).then(|| LiftStats {
        avg: lifts.iter().map(|l| *l as f64).sum::<f64>() / lifts.len() as f64,
        min: *lifts.iter().min().expect("non-empty"),
        max: *lifts.iter().max().expect("non-empty"),
    });
    let km_per_shuttle: Vec<f64> = shuttles.iter().map(|s| s.odometer / 1000.0).collect();
    let avg_km_per_shuttle = mean(km_per_shuttle.iter().copied());

    MetricsReport {
        users_total: persons.len(),
        users_served: served.len(),
        users_boarded: boarded.len(),
        served_late_count: late.len(),
        avg_late_minutes,
        cost_distribution,
        avg_travel_cost,
        waiting_seconds,
        avg_waiting_minutes,
        lifts,
        lift_stats,
        total_gain,
        total_charged,
        km_per_shuttle,
        avg_km_per_shuttle,
        end_time,
        ticks,
        incomplete,
        series,
    }
}
