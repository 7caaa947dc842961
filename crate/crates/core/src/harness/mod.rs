//! Scenario construction, single runs and seed-swept experiment suites.

mod config;
mod population;
mod sweep;

pub use config::{
    resolve_seed, CitySource, ScenarioConfig, TimeOfDay, WorkWindow, WorkplaceMode, DEFAULT_SEED,
    SEED_ENV,
};
pub use population::{build_population, Population};
pub use sweep::{
    run_experiment_suite, summary_csv, Aggregate, PointSummary, RunRecord, SuiteResult,
    SweepParameter, SweepSpec, SUMMARY_CSV,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{EngineError, RunOutput, World};
use crate::geodata::{build_road_graph, generate_grid_city, load_city_file, GeoError};
use crate::City;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub fn load_city(source: &CitySource) -> Result<City, HarnessError> {
    Ok(match source {
        CitySource::Grid {
            rows,
            cols,
            block_m,
            seed,
        } => generate_grid_city(*rows, *cols, *block_m, *seed)?,
        CitySource::File { path } => load_city_file(path)?,
    })
}

/// The config as recorded in a run directory: the seed filled in.
pub fn pinned_config(config: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed: Some(seed),
        ..config.clone()
    }
}

/// Content hash naming the run directory of `(config, seed)`.
pub fn run_id(config: &ScenarioConfig, seed: u64) -> String {
    let pinned = serde_json::to_string(&pinned_config(config, seed)).expect("config serializes");
    let mut h = Sha256::new();
    h.update(pinned.as_bytes());
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

/// Builds the city and population for `seed` and runs the day.
pub fn run_scenario(
    config: &ScenarioConfig,
    seed: u64,
    trace: bool,
) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let city = load_city(&config.city)?;
    let graph = build_road_graph(&city)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop = build_population(config, &city, &graph, &mut rng)?;
    let world = World::new(
        graph,
        pop.persons,
        &pop.shuttle_nodes,
        &pop.car_nodes,
        config.engine_config(trace)?,
        seed,
    )?;
    Ok(world.run()?)
}
