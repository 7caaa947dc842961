//! Per-leg cost accounting and fare splitting.
//!
//! A shuttle's path is cut into legs at stop events. Each leg costs
//! `length / 1000 × cost_per_km`; the path cost is the sum of its legs; every
//! passenger aboard during a leg pays an equal share of it. Legs driven empty
//! are recorded but never billed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodata::NodeIx;
use crate::PersonId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{what} must be non-negative and finite")]
    Domain { what: &'static str },
    #[error("leg {0} has nobody aboard and cannot be split")]
    EmptyLeg(usize),
    #[error("{0} is not aboard")]
    NotAboard(PersonId),
    #[error("{0} is already aboard")]
    AlreadyAboard(PersonId),
    #[error("{0} never rode with this shuttle")]
    UnknownPassenger(PersonId),
}

/// Money arithmetic. Implemented for `f64` and for exact rationals.
pub trait Currency:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Option<Self>;
    fn from_count(n: usize) -> Self;
    fn to_f64(&self) -> f64;
    /// Lossless text form, readable by [`Currency::parse_exact`].
    fn to_exact_string(&self) -> String;
    fn parse_exact(s: &str) -> Option<Self>;
}

impl Currency for f64 {
    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_exact_string(&self) -> String {
        format!("{self:?}")
    }
    fn parse_exact(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Currency for BigRational {
    fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v)
    }
    fn from_count(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn to_exact_string(&self) -> String {
        self.to_string()
    }
    fn parse_exact(s: &str) -> Option<Self> {
        BigRational::from_str(s).ok()
    }
}

fn non_negative<C: Currency>(v: &C, what: &'static str) -> Result<(), CostError> {
    let f = v.to_f64();
    if *v < C::zero() || !f.is_finite() {
        return Err(CostError::Domain { what });
    }
    Ok(())
}

/// Cost of driving `length_m` meters at `cost_per_km`.
pub fn leg_cost<C: Currency>(length_m: &C, cost_per_km: &C) -> Result<C, CostError> {
    non_negative(length_m, "leg length")?;
    non_negative(cost_per_km, "cost per km")?;
    Ok(length_m.clone() / C::from_count(1000) * cost_per_km.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg<C> {
    pub index: usize,
    pub from: NodeIx,
    pub to: NodeIx,
    pub length: C,
    /// Ascending; empty for dead-running.
    pub passengers: Vec<PersonId>,
    pub cost: C,
}

impl<C: Currency> Leg<C> {
    pub fn is_billed(&self) -> bool {
        !self.passengers.is_empty()
    }
}

/// Each aboard passenger's share of `leg`.
pub fn split_leg<C: Currency>(leg: &Leg<C>) -> Result<Vec<(PersonId, C)>, CostError> {
    if leg.passengers.is_empty() {
        return Err(CostError::EmptyLeg(leg.index));
    }
    let share = leg.cost.clone() / C::from_count(leg.passengers.len());
    Ok(leg.passengers.iter().map(|p| (*p, share.clone())).collect())
}

pub fn path_cost<C: Currency>(ledger: &LegLedger<C>) -> C {
    ledger
        .legs
        .iter()
        .fold(C::zero(), |acc, l| acc + l.cost.clone())
}

/// One shuttle's legs and the charges they produced.
#[derive(Clone, Debug)]
pub struct LegLedger<C> {
    cost_per_km: C,
    legs: Vec<Leg<C>>,
    open_from: NodeIx,
    aboard: BTreeSet<PersonId>,
    charges: BTreeMap<PersonId, C>,
}

impl<C: Currency> LegLedger<C> {
    /// Opens the first leg at `start`.
    pub fn new(cost_per_km: C, start: NodeIx) -> Result<Self, CostError> {
        non_negative(&cost_per_km, "cost per km")?;
        Ok(Self {
            cost_per_km,
            legs: Vec::new(),
            open_from: start,
            aboard: BTreeSet::new(),
            charges: BTreeMap::new(),
        })
    }

    pub fn cost_per_km(&self) -> &C {
        &self.cost_per_km
    }

    pub fn legs(&self) -> &[Leg<C>] {
        &self.legs
    }

    pub fn aboard(&self) -> &BTreeSet<PersonId> {
        &self.aboard
    }

    pub fn charges(&self) -> &BTreeMap<PersonId, C> {
        &self.charges
    }

    /// Closes the running leg at `stop` and applies the passenger changes.
    ///
    /// `leg_length` is the distance driven since the previous stop event. A
    /// zero length (two events at the same node) adds no leg. Alightings are
    /// applied before boardings.
    pub fn on_stop_event(
        &mut self,
        stop: NodeIx,
        boarded: &[PersonId],
        alighted: &[PersonId],
        leg_length: C,
    ) -> Result<(), CostError> {
        for p in alighted {
            if !self.aboard.contains(p) {
                return Err(CostError::NotAboard(*p));
            }
        }
        self.close_leg(stop, leg_length)?;
        for p in alighted {
            self.aboard.remove(p);
        }
        for p in boarded {
            if !self.aboard.insert(*p) {
                return Err(CostError::AlreadyAboard(*p));
            }
            self.charges.entry(*p).or_insert_with(C::zero);
        }
        Ok(())
    }

    /// Closes the trailing leg at the end of a run without passenger changes.
    pub fn finish(&mut self, at: NodeIx, leg_length: C) -> Result<(), CostError> {
        self.close_leg(at, leg_length)
    }

    fn close_leg(&mut self, stop: NodeIx, leg_length: C) -> Result<(), CostError> {
        non_negative(&leg_length, "leg length")?;
        if leg_length > C::zero() {
            let cost = leg_cost(&leg_length, &self.cost_per_km)?;
            let leg = Leg {
                index: self.legs.len(),
                from: self.open_from,
                to: stop,
                length: leg_length,
                passengers: self.aboard.iter().copied().collect(),
                cost,
            };
            if leg.is_billed() {
                for (p, share) in split_leg(&leg)? {
                    let slot = self.charges.entry(p).or_insert_with(C::zero);
                    *slot = slot.clone() + share;
                }
            }
            self.legs.push(leg);
        }
        self.open_from = stop;
        Ok(())
    }

    pub fn passenger_total(&self, person: PersonId) -> Result<C, CostError> {
        self.charges
            .get(&person)
            .cloned()
            .ok_or(CostError::UnknownPassenger(person))
    }

    pub fn path_cost(&self) -> C {
        path_cost(self)
    }

    /// Cost of legs with at least one passenger aboard.
    pub fn billed_cost(&self) -> C {
        self.legs
            .iter()
            .filter(|l| l.is_billed())
            .fold(C::zero(), |acc, l| acc + l.cost.clone())
    }

    pub fn total_length(&self) -> C {
        self.legs
            .iter()
            .fold(C::zero(), |acc, l| acc + l.length.clone())
    }
}

/// Decimal string of `value` rounded half-to-even at `digits` fractional
/// digits.
pub fn round_half_even(value: &BigRational, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = value * BigRational::from_integer(scale.clone());
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut units = floor.to_integer();
    if frac > half || (frac == half && units.is_odd()) {
        units += 1;
    }
    let negative = units.is_negative();
    let (int, rem) = units.abs().div_rem(&scale);
    let sign = if negative { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", rem.to_string(), width = digits as usize)
    }
}

/// [`round_half_even`] of the exact binary value of `v`.
pub fn round_f64_half_even(v: f64, digits: u32) -> String {
    match BigRational::from_float(v) {
        Some(r) => round_half_even(&r, digits),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }
    fn int(n: i64) -> BigRational {
        r(n, 1)
    }

    #[test]
    fn leg_cost_examples() {
        assert_eq!(leg_cost(&3000.0, &1.0).unwrap(), 3.0);
        assert_eq!(leg_cost(&0.0, &1.0).unwrap(), 0.0);
        assert_eq!(leg_cost(&int(1234), &r(1, 2)).unwrap(), r(617, 1000));
        assert!((leg_cost(&1234.0, &0.5).unwrap() - 0.617).abs() < 1e-15);
        assert!(matches!(
            leg_cost(&-1.0, &1.0),
            Err(CostError::Domain { .. })
        ));
        assert!(leg_cost(&int(5), &int(-1)).is_err());
    }

    fn leg(cost: i64, passengers: &[u32]) -> Leg<BigRational> {
        Leg {
            index: 0,
            from: NodeIx(0),
            to: NodeIx(1),
            length: int(cost * 1000),
            passengers: passengers.iter().map(|p| PersonId(*p)).collect(),
            cost: int(cost),
        }
    }

    #[test]
    fn split_examples() {
        let three = split_leg(&leg(3, &[1, 2, 3])).unwrap();
        assert!(three.iter().all(|(_, c)| *c == int(1)));
        assert_eq!(split_leg(&leg(3, &[9])).unwrap(), vec![(PersonId(9), int(3))]);
        let four = split_leg(&leg(5, &[1, 2, 3, 4])).unwrap();
        assert!(four.iter().all(|(_, c)| *c == r(5, 4)));
        let sum = four.iter().fold(int(0), |a, (_, c)| a + c);
        assert_eq!(sum, int(5));
        assert_eq!(split_leg(&leg(3, &[])), Err(CostError::EmptyLeg(0)));
    }

    #[test]
    fn path_cost_examples() {
        let mut ledger = LegLedger::new(1.0f64, NodeIx(0)).unwrap();
        assert_eq!(ledger.path_cost(), 0.0);
        ledger.on_stop_event(NodeIx(1), &[PersonId(1)], &[], 3000.0).unwrap();
        assert_eq!(ledger.path_cost(), leg_cost(&3000.0, &1.0).unwrap());
        ledger.on_stop_event(NodeIx(2), &[], &[PersonId(1)], 2500.0).unwrap();
        assert_eq!(ledger.path_cost(), 5.5);
    }

    #[test]
    fn late_boarder_splits_second_leg() {
        let (a, b) = (PersonId(1), PersonId(2));
        let mut ledger = LegLedger::new(int(1), NodeIx(0)).unwrap();
        ledger.on_stop_event(NodeIx(0), &[a], &[], int(0)).unwrap();
        ledger.on_stop_event(NodeIx(1), &[b], &[], int(2000)).unwrap();
        ledger.on_stop_event(NodeIx(2), &[], &[a, b], int(2000)).unwrap();
        assert_eq!(ledger.passenger_total(a).unwrap(), int(3));
        assert_eq!(ledger.passenger_total(b).unwrap(), int(1));
        assert_eq!(ledger.billed_cost(), int(4));
    }

    #[test]
    fn dead_running_is_recorded_but_unbilled() {
        let a = PersonId(4);
        let mut ledger = LegLedger::new(int(1), NodeIx(0)).unwrap();
        ledger.on_stop_event(NodeIx(3), &[a], &[], int(700)).unwrap();
        ledger.on_stop_event(NodeIx(5), &[], &[a], int(10_000)).unwrap();
        ledger.finish(NodeIx(6), int(300)).unwrap();
        assert_eq!(ledger.legs().len(), 3);
        assert_eq!(ledger.path_cost(), int(11));
        assert_eq!(ledger.billed_cost(), int(10));
        assert_eq!(ledger.passenger_total(a).unwrap(), int(10));
        assert_eq!(ledger.total_length(), int(11_000));
    }

    #[test]
    fn zero_leg_rider_pays_nothing() {
        let a = PersonId(1);
        let mut ledger = LegLedger::new(int(1), NodeIx(0)).unwrap();
        ledger.on_stop_event(NodeIx(2), &[a], &[], int(100)).unwrap();
        ledger.on_stop_event(NodeIx(2), &[], &[a], int(0)).unwrap();
        assert_eq!(ledger.passenger_total(a).unwrap(), int(0));
        assert_eq!(ledger.legs().len(), 1);
    }

    #[test]
    fn accounting_errors() {
        let mut ledger = LegLedger::new(int(1), NodeIx(0)).unwrap();
        assert_eq!(
            ledger.on_stop_event(NodeIx(1), &[], &[PersonId(3)], int(10)),
            Err(CostError::NotAboard(PersonId(3)))
        );
        assert_eq!(
            ledger.passenger_total(PersonId(3)),
            Err(CostError::UnknownPassenger(PersonId(3)))
        );
        ledger.on_stop_event(NodeIx(1), &[PersonId(3)], &[], int(10)).unwrap();
        assert_eq!(
            ledger.on_stop_event(NodeIx(1), &[PersonId(3)], &[], int(0)),
            Err(CostError::AlreadyAboard(PersonId(3)))
        );
        // Alight-then-board of the same rider at one event is allowed.
        ledger
            .on_stop_event(NodeIx(2), &[PersonId(3)], &[PersonId(3)], int(5))
            .unwrap();
    }

    #[test]
    fn shared_and_symmetric_riders() {
        let (a, b) = (PersonId(1), PersonId(2));
        let mut ledger = LegLedger::new(1.0f64, NodeIx(0)).unwrap();
        ledger.on_stop_event(NodeIx(0), &[a, b], &[], 0.0).unwrap();
        ledger.on_stop_event(NodeIx(1), &[], &[], 4000.0).unwrap();
        ledger.on_stop_event(NodeIx(2), &[], &[a, b], 6000.0).unwrap();
        assert_eq!(ledger.passenger_total(a).unwrap(), 5.0);
        assert_eq!(ledger.passenger_total(a), ledger.passenger_total(b));
        // Sole rider over 10 km at 1/km.
        let mut solo = LegLedger::new(1.0f64, NodeIx(0)).unwrap();
        solo.on_stop_event(NodeIx(0), &[a], &[], 0.0).unwrap();
        solo.on_stop_event(NodeIx(9), &[], &[a], 10_000.0).unwrap();
        assert_eq!(solo.passenger_total(a).unwrap(), 10.0);
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(round_half_even(&r(1, 8), 2), "0.12");
        assert_eq!(round_half_even(&r(3, 8), 2), "0.38");
        assert_eq!(round_half_even(&r(37, 3), 2), "12.33");
        assert_eq!(round_half_even(&r(-5, 2), 0), "-2");
        assert_eq!(round_half_even(&int(7), 2), "7.00");
        assert_eq!(round_half_even(&r(-1, 200), 2), "0.00");
        assert_eq!(round_f64_half_even(2.605, 2), "2.60");
    }

    proptest! {
        /// Random ledgers conserve money exactly and charge non-negatively.
        #[test]
        fn conservation_and_monotonicity(events in prop::collection::vec((0u32..6, 0u32..4, 1u32..5000), 1..40)) {
            let mut ledger = LegLedger::new(r(3, 2), NodeIx(0)).unwrap();
            for (i, (who, action, meters)) in events.into_iter().enumerate() {
                let p = PersonId(who);
                let node = NodeIx(i as u32 + 1);
                let length = int(meters as i64);
                if ledger.aboard().contains(&p) && action == 0 {
                    ledger.on_stop_event(node, &[], &[p], length).unwrap();
                } else if !ledger.aboard().contains(&p) && action > 0 {
                    ledger.on_stop_event(node, &[p], &[], length).unwrap();
                } else {
                    ledger.on_stop_event(node, &[], &[], length).unwrap();
                }
            }
            let charged = ledger.charges().values().fold(int(0), |a, c| a + c);
            prop_assert_eq!(charged, ledger.billed_cost());
            prop_assert!(ledger.charges().values().all(|c| *c >= int(0)));
            for l in ledger.legs() {
                prop_assert_eq!(l.cost.clone(), l.length.clone() / int(1000) * r(3, 2));
                if l.passengers.len() >= 2 {
                    let mut fewer = l.clone();
                    fewer.passengers.pop();
                    let more = split_leg(l).unwrap()[0].1.clone();
                    let less = split_leg(&fewer).unwrap()[0].1.clone();
                    prop_assert!(more < less);
                }
            }
        }
    }
}
