#![allow(dead_code)]

use std::sync::Arc;
use streetsim::city::{generate_city, CityMap, CitySpec, Difficulty};
use streetsim::env::ScanParams;
use streetsim::episode::TaskSpec;
use streetsim::mmnav::{generate_mmnav_task, MMNavConfig, MMNavTask};
use streetsim::mrs::{generate_mrs_task, MrsConfig, MrsTask};
use streetsim::rng::{indexed_rng, stage};
use streetsim::waypoint::WaypointGraph;
use streetsim_server::config::{ClockMode, ServerConfig};
use streetsim_server::session::Session;

pub fn easy_map(seed: u64) -> Arc<CityMap> {
    Arc::new(generate_city(&CitySpec::preset(seed, Difficulty::Easy)).unwrap())
}

pub fn mmnav_task(map: &CityMap, seed: u64) -> MMNavTask {
    let g = WaypointGraph::build(map);
    let mut rng = indexed_rng(seed, stage::MMNAV, 0);
    generate_mmnav_task(map, &g, &mut rng, 0, &MMNavConfig::default(), &ScanParams::default()).unwrap()
}

pub fn mrs_task(map: &CityMap, seed: u64) -> MrsTask {
    let g = WaypointGraph::build(map);
    let mut rng = indexed_rng(seed, stage::MRS, 0);
    generate_mrs_task(map, &g, &mut rng, 0, &MrsConfig::default(), &ScanParams::default()).unwrap()
}

pub fn fast_config() -> ServerConfig {
    ServerConfig { port: 0, mode: ClockMode::Fast, ..ServerConfig::default() }
}

pub fn mmnav_session(seed: u64, config: ServerConfig) -> (Arc<Session>, MMNavTask) {
    let map = easy_map(seed);
    let task = mmnav_task(&map, seed);
    (Session::new(map, TaskSpec::Mmnav(task.clone()), config).unwrap(), task)
}

pub fn mrs_session(seed: u64, config: ServerConfig) -> (Arc<Session>, MrsTask) {
    let map = easy_map(seed);
    let task = mrs_task(&map, seed);
    (Session::new(map, TaskSpec::Mrs(task.clone()), config).unwrap(), task)
}
