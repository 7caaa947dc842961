use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, ScenarioConfig, WorkplaceMode};
use crate::agents::Person;
use crate::geodata::{BuildingCategory, NodeIx, RoadGraph};
use crate::{City, PersonId};

/// Draws before giving up on finding a home away from the workplace.
const HOME_DRAWS: usize = 1000;

/// Agents placed on the map before the first tick.
#[derive(Clone, Debug)]
pub struct Population {
    pub persons: Vec<Person>,
    pub shuttle_nodes: Vec<NodeIx>,
    pub car_nodes: Vec<NodeIx>,
}

/// Nodes nearest to the buildings of `category`, or every node when the
/// city has no such building.
fn building_nodes(city: &City, graph: &RoadGraph<f64>, category: BuildingCategory) -> Vec<NodeIx> {
    let v: Vec<NodeIx> = city
        .buildings
        .iter()
        .filter(|b| b.category == category)
        .map(|b| graph.nearest_node(b.centroid))
        .collect();
    if v.is_empty() && city.buildings.is_empty() {
        graph.node_ixs().collect()
    } else {
        v
    }
}

/// Picks `k` workplaces on distinct nodes.
fn distinct_workplaces(
    industrial: &[NodeIx],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<NodeIx>, HarnessError> {
    let mut nodes = industrial.to_vec();
    nodes.sort();
    nodes.dedup();
    if nodes.len() < k {
        return Err(HarnessError::Config(format!(
            "workplace mode needs {k} industrial sites, city has {}",
            nodes.len()
        )));
    }
    Ok(nodes.choose_multiple(rng, k).copied().collect())
}

/// Homes, workplaces and work hours for every user, then start nodes for
/// the fleet and the background cars, all drawn from `rng` in that order.
pub fn build_population(
    config: &ScenarioConfig,
    city: &City,
    graph: &RoadGraph<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Population, HarnessError> {
    let homes = building_nodes(city, graph, BuildingCategory::Residential);
    let industrial = building_nodes(city, graph, BuildingCategory::Industrial);
    if config.user_count > 0 && (homes.is_empty() || industrial.is_empty()) {
        return Err(HarnessError::Config(
            "city needs residential and industrial buildings".into(),
        ));
    }
    let fixed = match config.workplace_mode {
        WorkplaceMode::Diversified => Vec::new(),
        WorkplaceMode::Two => distinct_workplaces(&industrial, 2, rng)?,
        WorkplaceMode::One => distinct_workplaces(&industrial, 1, rng)?,
    };

    let (start, end) = (
        config.work_window.start.seconds(),
        config.work_window.end.seconds(),
    );
    let minutes = (end - start) / 60;
    let speed = config.solo_speed_kmh / 3.6;
    let mut persons = Vec::with_capacity(config.user_count);
    for i in 0..config.user_count {
        let work = match config.workplace_mode {
            WorkplaceMode::Diversified => industrial[rng.gen_range(0..industrial.len())],
            _ => fixed[i % fixed.len()],
        };
        let mut home = None;
        for _ in 0..HOME_DRAWS {
            let h = homes[rng.gen_range(0..homes.len())];
            if h != work {
                home = Some(h);
                break;
            }
        }
        let home = home.ok_or_else(|| {
            HarnessError::Config("no residential site away from the workplace".into())
        })?;
        let work_start = start + 60 * rng.gen_range(0..=minutes);
        persons.push(Person::new(
            PersonId(i as u32),
            home,
            work,
            work_start,
            work_start + config.work_seconds(),
            speed,
        ));
    }

    let n = graph.node_count() as u32;
    let mut place = |k: usize| -> Vec<NodeIx> { (0..k).map(|_| NodeIx(rng.gen_range(0..n))).collect() };
    let shuttle_nodes = place(config.fleet_size);
    let car_nodes = place(config.car_count());
    Ok(Population {
        persons,
        shuttle_nodes,
        car_nodes,
    })
}
