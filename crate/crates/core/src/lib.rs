//! Agent-based simulation of self-organizing autonomous shuttle fleets doing
//! real-time dynamic ride-sharing on a road graph.
//!
//! The geometry, routing, insertion and fare-splitting layers are generic over
//! the scalar type ([`Scalar`] for lengths and times, [`costing::Currency`] for
//! money). The time-stepped simulation itself runs on the concrete aliases
//! exported below.

pub mod agents;
pub mod costing;
pub mod engine;
pub mod geodata;
pub mod harness;
pub mod ids;
pub mod metrics;
pub mod output;
pub mod scalar;
pub mod selforg;
pub mod validate;

pub use ids::{CarId, PersonId, ShuttleId};
pub use scalar::Scalar;

/// Planar meters / seconds used by the simulation.
pub type Real = f64;
/// Exact money used by shuttle ledgers.
pub type Money = num_rational::BigRational;

pub type City = geodata::CityModel<Real>;
pub type Graph = geodata::RoadGraph<Real>;
pub type Route = geodata::Path<Real>;
pub type Point = geodata::Point<Real>;
pub type Ledger = costing::LegLedger<Money>;
pub type FloatLedger = costing::LegLedger<f64>;

/// Simulated seconds since midnight.
pub type SimTime = u64;

/// Seats per shuttle.
pub const SHUTTLE_CAPACITY: usize = 12;
