//! Multi-robot search: a main robot with landmark memory and a follower
//! with none must find each other.

use crate::city::{Building, CityMap, Difficulty};
use crate::env::{Env, EnvError, Scan, ScanParams};
use crate::geometry::{Cardinal, Pose};
use crate::mmnav::capture_hint;
use crate::rng::SimRng;
use crate::waypoint::{dijkstra_costs, plan_fewest_turns, WaypointGraph, WaypointKind};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const TASK_SCHEMA: &str = "streetsim.mrs_task";
pub const TASK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum MrsError {
    #[error("only {available} streets carry {per_street} or more buildings; {wanted} requested")]
    InsufficientLandmarks { wanted: usize, per_street: usize, available: usize },
    #[error("no spawn pair satisfied the distance window after {0} attempts")]
    NoSpawnPair(usize),
    #[error("task file: {0}")]
    Io(#[from] std::io::Error),
    #[error("task file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("task file schema {0} v{1} not supported")]
    Schema(String, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub landmark: u32,
    pub street: u32,
    pub position: crate::geometry::Vec2,
    pub description: String,
    pub hint: Scan,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LandmarkMemory {
    pub entries: Vec<MemoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrsTask {
    pub id: u32,
    pub map_seed: u64,
    pub map_hash: String,
    pub difficulty: Difficulty,
    /// Given to the main robot only.
    pub memory: LandmarkMemory,
    pub spawn_main: Pose,
    pub spawn_follower: Pose,
    pub step_budget: usize,
    /// Waypoint-graph distance between the spawns.
    pub initial_distance: f64,
    pub oracle_path: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrsConfig {
    pub streets: usize,
    pub per_street: usize,
    pub min_spawn_distance: f64,
    pub max_spawn_distance: f64,
    pub step_budget: usize,
    pub max_attempts: usize,
}

impl Default for MrsConfig {
    fn default() -> Self {
        Self {
            streets: 10,
            per_street: 2,
            min_spawn_distance: 100.0,
            max_spawn_distance: 1000.0,
            step_budget: 600,
            max_attempts: 1000,
        }
    }
}

/// Streets are maximal straight runs of road segments joined head to tail
/// through intersections. Returns street id (lowest member road id) per road.
pub fn street_of_roads(map: &CityMap) -> Vec<u32> {
    let mut parent: Vec<u32> = (0..map.roads.len() as u32).collect();
    fn find(p: &mut [u32], x: u32) -> u32 {
        let mut r = x;
        while p[r as usize] != r {
            r = p[r as usize];
        }
        let mut c = x;
        while p[c as usize] != r {
            let next = p[c as usize];
            p[c as usize] = r;
            c = next;
        }
        r
    }
    for inter in &map.intersections {
        for (i, &a) in inter.arms.iter().enumerate() {
            for &b in &inter.arms[i + 1..] {
                let (da, db) = (map.arm_direction(inter.id, a), map.arm_direction(inter.id, b));
                if da.opposite() == db {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi as usize] = lo;
                }
            }
        }
    }
    (0..map.roads.len() as u32).map(|r| find(&mut parent, r)).collect()
}

/// Buildings grouped by street, each group sorted by id.
pub fn buildings_by_street(map: &CityMap) -> BTreeMap<u32, Vec<&Building>> {
    let streets = street_of_roads(map);
    let mut out: BTreeMap<u32, Vec<&Building>> = BTreeMap::new();
    for b in &map.buildings {
        out.entry(streets[b.facing_road as usize]).or_default().push(b);
    }
    out
}

/// Pose at a building's front door, facing it.
pub fn door_pose(b: &Building) -> Pose {
    Pose::new(b.door, b.facing.heading())
}

pub fn build_landmark_memory(
    map: &CityMap,
    streets: usize,
    per_street: usize,
    rng: &mut SimRng,
    params: &ScanParams,
) -> Result<LandmarkMemory, MrsError> {
    let by_street = buildings_by_street(map);
    let eligible: Vec<u32> = by_street
        .iter()
        .filter(|(_, bs)| bs.len() >= per_street)
        .map(|(s, _)| *s)
        .collect();
    if eligible.len() < streets {
        return Err(MrsError::InsufficientLandmarks { wanted: streets, per_street, available: eligible.len() });
    }
    let static_map = map.static_base();
    let mut chosen: Vec<u32> = eligible.choose_multiple(rng, streets).copied().collect();
    chosen.sort_unstable();
    let mut entries = Vec::new();
    for street in chosen {
        let mut picks: Vec<&Building> = by_street[&street].choose_multiple(rng, per_street).copied().collect();
        picks.sort_by_key(|b| b.id);
        for b in picks {
            if entries.iter().any(|e: &MemoryEntry| e.landmark == b.id) {
                continue;
            }
            entries.push(MemoryEntry {
                landmark: b.id,
                street,
                position: b.door,
                description: b.attributes.describe(),
                hint: capture_hint(&static_map, door_pose(b), params),
            });
        }
    }
    Ok(LandmarkMemory { entries })
}

pub fn generate_mrs_task(
    map: &CityMap,
    graph: &WaypointGraph,
    rng: &mut SimRng,
    id: u32,
    config: &MrsConfig,
    params: &ScanParams,
) -> Result<MrsTask, MrsError> {
    let memory = build_landmark_memory(map, config.streets, config.per_street, rng, params)?;
    let sidewalk: Vec<u32> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == WaypointKind::Road)
        .map(|n| n.id)
        .collect();
    if sidewalk.len() < 2 {
        return Err(MrsError::NoSpawnPair(0));
    }
    for _ in 0..config.max_attempts {
        let a = sidewalk[rng.gen_range(0..sidewalk.len())];
        let b = sidewalk[rng.gen_range(0..sidewalk.len())];
        let (ha, hb) = (Cardinal::ALL[rng.gen_range(0..4)], Cardinal::ALL[rng.gen_range(0..4)]);
        if a == b {
            continue;
        }
        let d = dijkstra_costs(graph, a)[b as usize];
        if !(config.min_spawn_distance..=config.max_spawn_distance).contains(&d) {
            continue;
        }
        let path = plan_fewest_turns(graph, a, b).expect("reachable by distance check");
        return Ok(MrsTask {
            id,
            map_seed: map.spec.seed,
            map_hash: map.hash(),
            difficulty: map.spec.difficulty(),
            memory,
            spawn_main: Pose::new(graph.position(a), ha.heading()),
            spawn_follower: Pose::new(graph.position(b), hb.heading()),
            step_budget: config.step_budget,
            initial_distance: d,
            oracle_path: path.nodes,
        });
    }
    Err(MrsError::NoSpawnPair(config.max_attempts))
}

/// Rendezvous holds when the issuer can see the other robot right now.
pub fn check_meetup(env: &Env, issuer: u32, other: u32) -> Result<bool, EnvError> {
    env.visible(issuer, other)
}

#[derive(Serialize, Deserialize)]
struct TaskDocument {
    schema: String,
    version: u32,
    tasks: Vec<MrsTask>,
}

pub fn save_tasks(tasks: &[MrsTask], path: &Path) -> Result<(), MrsError> {
    let doc = TaskDocument { schema: TASK_SCHEMA.into(), version: TASK_SCHEMA_VERSION, tasks: tasks.to_vec() };
    std::fs::write(path, serde_json::to_string(&doc)?)?;
    Ok(())
}

pub fn load_tasks(path: &Path) -> Result<Vec<MrsTask>, MrsError> {
    let doc: TaskDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if doc.schema != TASK_SCHEMA || doc.version != TASK_SCHEMA_VERSION {
        return Err(MrsError::Schema(doc.schema, doc.version));
    }
    Ok(doc.tasks)
}
