//! Time-stepped simulation of a city with people, shuttles and cars.

pub mod movement;
pub mod trace;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{
    cancel_rider, step_common_car, step_person, step_shuttle, AgentError, AgentParams, Clock,
    CommonCar, NearIndex, Person, PersonCtx, RequestBoard, Shuttle, ShuttleCtx,
};
use crate::costing::CostError;
use crate::geodata::{EdgeIx, NodeIx, RoadGraph};
use crate::metrics::{summarize, Collector, MetricsReport, SAMPLE_INTERVAL};
use crate::{CarId, Ledger, Money, PersonId, ShuttleId, SimTime};
use movement::Route;
use trace::Trace;

pub const DEFAULT_ALPHA: f64 = 0.25;

/// Seconds in the simulated day.
pub const DAY: u64 = 24 * 3600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid engine setting: {0}")]
    Config(String),
}

/// Speed multiplier for an edge carrying `vehicles` over `lanes` lanes.
pub fn congestion_coefficient(alpha: f64, vehicles: u32, lanes: u32) -> f64 {
    1.0 / (1.0 + alpha * vehicles as f64 / lanes.max(1) as f64)
}

/// Recounts vehicles per edge and sets every edge's coefficient.
pub fn update_congestion(
    graph: &mut RoadGraph<f64>,
    occupied: impl IntoIterator<Item = EdgeIx>,
    alpha: f64,
) {
    let mut counts = vec![0u32; graph.edge_count()];
    for e in occupied {
        counts[e.index()] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let e = EdgeIx(i as u32);
        let lanes = graph.edge(e).lanes;
        graph.set_congestion(e, c, congestion_coefficient(alpha, c, lanes));
    }
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub params: AgentParams,
    pub alpha: f64,
    pub day_start: SimTime,
    /// Ticks to run before giving up on stranded persons.
    pub max_ticks: u64,
    pub sample_interval: u64,
    pub cost_per_km: Money,
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let params = AgentParams::default();
        Self {
            max_ticks: DAY / params.step_seconds,
            params,
            alpha: DEFAULT_ALPHA,
            day_start: 7 * 3600,
            sample_interval: SAMPLE_INTERVAL,
            cost_per_km: Money::from_integer(1.into()),
            trace: false,
        }
    }
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Trace,
    pub ledgers: Vec<(ShuttleId, Ledger)>,
}

pub struct World {
    pub tick: u64,
    pub clock: SimTime,
    pub graph: RoadGraph<f64>,
    pub persons: Vec<Person>,
    pub shuttles: Vec<Shuttle>,
    pub cars: Vec<CommonCar>,
    pub board: RequestBoard,
    pub trace: Trace,
    pub config: EngineConfig,
    rng: ChaCha8Rng,
    near: NearIndex,
    collector: Collector,
    ticks_run: u64,
    cancellations: Vec<(ShuttleId, PersonId)>,
}

impl World {
    /// Persons must be numbered by position; shuttles and cars are placed on
    /// the given nodes.
    pub fn new(
        graph: RoadGraph<f64>,
        persons: Vec<Person>,
        shuttle_nodes: &[NodeIx],
        car_nodes: &[NodeIx],
        config: EngineConfig,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let step = config.params.step_seconds;
        if step == 0 {
            return Err(EngineError::Config("step_seconds must be positive".into()));
        }
        if config.day_start % step != 0 {
            return Err(EngineError::Config(
                "day start must be a whole number of steps".into(),
            ));
        }
        if persons.iter().enumerate().any(|(i, p)| p.id.index() != i) {
            return Err(EngineError::Config("person ids must be 0..n in order".into()));
        }
        let mut shuttles = Vec::with_capacity(shuttle_nodes.len());
        for (i, &n) in shuttle_nodes.iter().enumerate() {
            let ledger = Ledger::new(config.cost_per_km.clone(), n)?;
            shuttles.push(Shuttle::new(
                ShuttleId(i as u32),
                n,
                config.params.shuttle_speed,
                ledger,
            ));
        }
        let cars = car_nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| CommonCar::new(CarId(i as u32), n, config.params.car_speed))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(Self {
            tick: config.day_start / step,
            clock: config.day_start,
            near: NearIndex::new(&graph, config.params.pickup_radius),
            board: RequestBoard::new(graph.node_count()),
            collector: Collector::new(config.day_start, config.sample_interval),
            trace: Trace::new(config.trace),
            graph,
            persons,
            shuttles,
            cars,
            config,
            rng,
            ticks_run: 0,
            cancellations: Vec::new(),
        })
    }

    /// Every person is back home for the day.
    pub fn done(&self) -> bool {
        self.persons.iter().all(|p| p.day_done)
    }

    pub fn ticks_run(&self) -> u64 {
        self.ticks_run
    }

    /// Edges currently occupied by vehicles and people driving alone.
    fn occupied_edges(&self) -> Vec<EdgeIx> {
        let on = |r: &Option<Route>| r.as_ref().and_then(Route::current_edge);
        self.shuttles
            .iter()
            .filter_map(|s| on(&s.route))
            .chain(self.cars.iter().filter_map(|c| on(&c.route)))
            .chain(
                self.persons
                    .iter()
                    .filter(|p| p.aboard.is_none())
                    .filter_map(|p| on(&p.route)),
            )
            .collect()
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let clock = Clock {
            tick: self.tick,
            now: self.clock,
        };
        let params = &self.config.params;

        self.board.expire(clock.now);

        {
            let mut ctx = PersonCtx {
                graph: &self.graph,
                board: &mut self.board,
                trace: &mut self.trace,
                params,
                clock,
                cancellations: &mut self.cancellations,
            };
            for p in &mut self.persons {
                step_person(p, &mut ctx);
            }
        }
        for (s, p) in self.cancellations.drain(..) {
            cancel_rider(&mut self.shuttles[s.index()], p, &mut self.trace, clock);
        }

        {
            let mut ctx = ShuttleCtx {
                graph: &self.graph,
                board: &mut self.board,
                persons: &mut self.persons,
                trace: &mut self.trace,
                rng: &mut self.rng,
                near: &self.near,
                params,
                clock,
            };
            for s in &mut self.shuttles {
                step_shuttle(s, &mut ctx)?;
            }
        }

        let dt = params.step_seconds as f64;
        for c in &mut self.cars {
            step_common_car(c, &self.graph, &mut self.rng, dt);
        }

        let occupied = self.occupied_edges();
        update_congestion(&mut self.graph, occupied, self.config.alpha);

        self.collector
            .collect(clock.now, &self.persons, &self.shuttles);

        self.tick += 1;
        self.clock += params.step_seconds;
        self.ticks_run += 1;
        Ok(())
    }

    /// Steps until everyone is home or the tick budget runs out.
    pub fn run(mut self) -> Result<RunOutput, EngineError> {
        while !self.done() && self.ticks_run < self.config.max_ticks {
            self.step()?;
        }
        let incomplete = !self.done();
        let end = self.clock;
        for s in &mut self.shuttles {
            let leg = Money::from_float(s.leg_distance).unwrap_or_else(Money::zero);
            s.ledger.finish(s.node, leg)?;
            s.leg_distance = 0.0;
        }
        self.collector.finish(end, &self.persons, &self.shuttles);
        let series = self.collector.series.clone();
        let report = summarize(
            &self.persons,
            &self.shuttles,
            series,
            end,
            self.ticks_run,
            incomplete,
        );
        Ok(RunOutput {
            report,
            trace: self.trace,
            ledgers: self
                .shuttles
                .into_iter()
                .map(|s| (s.id, s.ledger))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::PersonState;
    use crate::geodata::{build_road_graph, generate_grid_city};

    fn grid() -> RoadGraph<f64> {
        build_road_graph(&generate_grid_city(4, 4, 100.0, 0).unwrap()).unwrap()
    }

    #[test]
    fn coefficient_formula() {
        assert_eq!(congestion_coefficient(0.25, 0, 1), 1.0);
        assert_eq!(congestion_coefficient(0.25, 4, 1), 0.5);
        assert!((congestion_coefficient(0.25, 4, 2) - 2.0 / 3.0).abs() < 1e-15);
        let mut g = grid();
        update_congestion(&mut g, [EdgeIx(0); 4], 0.25);
        assert_eq!(g.edge(EdgeIx(0)).speed_coefficient, 0.5);
        assert_eq!(g.edge(EdgeIx(1)).speed_coefficient, 1.0);
    }

    #[test]
    fn empty_world_only_advances_the_clock() {
        let mut w = World::new(grid(), vec![], &[], &[], EngineConfig::default(), 1).unwrap();
        let before = w.clock;
        w.step().unwrap();
        assert_eq!(w.clock, before + 1);
        assert_eq!(w.clock, w.tick * w.config.params.step_seconds);

        let out = World::new(grid(), vec![], &[], &[], EngineConfig::default(), 1)
            .unwrap()
            .run()
            .unwrap();
        assert_eq!(out.report.users_served, 0);
        assert!(!out.report.incomplete);
    }

    fn one_rider(trace: bool) -> World {
        let g = grid();
        let (home, work) = (g.node_ix(0).unwrap(), g.node_ix(15).unwrap());
        let p = Person::new(PersonId(0), home, work, 8 * 3600, 16 * 3600, 30.0 / 3.6);
        let config = EngineConfig {
            trace,
            ..EngineConfig::default()
        };
        World::new(g, vec![p], &[NodeIx(1)], &[], config, 3).unwrap()
    }

    #[test]
    fn single_person_is_served() {
        let out = one_rider(true).run().unwrap();
        let r = &out.report;
        assert!(!r.incomplete);
        assert_eq!(r.users_served, 1);
        assert_eq!(r.users_boarded, 1);
        assert_eq!(r.total_gain, r.total_charged);
        assert_eq!(r.lifts, vec![2], "to work and back home");
        let last = r.series.samples.last().unwrap();
        assert_eq!(last.served_users, r.users_served);
        assert_eq!(last.late_users, r.served_late_count);
    }

    #[test]
    fn request_is_seen_by_shuttles_in_the_same_tick() {
        let mut w = one_rider(true);
        let search = w.persons[0].work_start - w.config.params.lookahead;
        while w.clock < search {
            w.step().unwrap();
        }
        w.shuttles[0].route = None;
        w.shuttles[0].node = w.persons[0].home;
        w.step().unwrap();
        assert_eq!(w.persons[0].state, PersonState::SearchLiftToWork);
        assert!(w.shuttles[0].riders.contains_key(&PersonId(0)));
    }

    #[test]
    fn same_seed_same_trace() {
        let a = one_rider(true).run().unwrap();
        let b = one_rider(true).run().unwrap();
        assert_eq!(a.trace.events, b.trace.events);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn budget_exhaustion_flags_incomplete() {
        let mut w = one_rider(false);
        w.config.max_ticks = 100;
        let out = w.run().unwrap();
        assert!(out.report.incomplete);
        assert_eq!(out.report.ticks, 100);
    }
}
