//! Multimodal instruction-following navigation tasks: generation from a
//! planned sidewalk path, templated instructions and success checks.

mod instruction;

pub use instruction::{render_instruction, RelativeSide};

use crate::city::{Building, CityMap, Difficulty};
use crate::env::{scan, Env, EnvError, Scan, ScanParams, View};
use crate::geometry::{angle_diff, ray_aabb, Aabb, Cardinal, Pose, Vec2};
use crate::rng::SimRng;
use crate::waypoint::{plan_fewest_turns, WaypointGraph};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TASK_SCHEMA: &str = "streetsim.mmnav_task";
pub const TASK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum MMNavError {
    #[error("no endpoint pair produced a valid task after {0} attempts")]
    NoValidPair(usize),
    #[error("map has too few buildings")]
    TooFewBuildings,
    #[error("task file: {0}")]
    Io(#[from] std::io::Error),
    #[error("task file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("task file schema {0} v{1} not supported")]
    Schema(String, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskCategory {
    OrientationAlignment,
    MoveAlongRoad,
    TurnAtIntersection,
    ReachDestination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub pose: Pose,
    pub position_tolerance: f64,
    pub heading_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub category: SubtaskCategory,
    pub instruction: String,
    pub hint: Scan,
    pub goal: GoalSpec,
    pub landmark: Option<u32>,
    pub landmark_text: Option<String>,
    pub landmark_side: Option<RelativeSide>,
    /// Signed turn at the intersection: set on turns and on the move
    /// leading into one.
    pub turn_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMNavTask {
    pub id: u32,
    pub map_seed: u64,
    pub map_hash: String,
    pub difficulty: Difficulty,
    pub start: Pose,
    pub start_building: u32,
    pub goal_building: u32,
    pub subtasks: Vec<Subtask>,
    /// Waypoint ids of the planned route.
    pub oracle_path: Vec<u32>,
    /// Door-to-door polyline through the route.
    pub route: Vec<Vec2>,
    pub path_length: f64,
}

impl MMNavTask {
    pub fn goal(&self) -> &GoalSpec {
        &self.subtasks.last().expect("task has subtasks").goal
    }

    pub fn categories(&self) -> Vec<SubtaskCategory> {
        self.subtasks.iter().map(|s| s.category).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MMNavConfig {
    pub position_tolerance: f64,
    pub heading_tolerance: f64,
    pub min_instructions: usize,
    pub max_instructions: usize,
    /// Door-to-door Manhattan window for endpoint pairs.
    pub min_goal_distance: f64,
    pub max_goal_distance: f64,
    pub max_attempts: usize,
    /// Landmark search radius around a turn corner.
    pub landmark_radius: f64,
}

impl Default for MMNavConfig {
    fn default() -> Self {
        Self {
            position_tolerance: 10.0,
            heading_tolerance: 45.0,
            min_instructions: 2,
            max_instructions: 4,
            min_goal_distance: 150.0,
            max_goal_distance: 850.0,
            max_attempts: 2000,
            landmark_radius: 60.0,
        }
    }
}

fn nearest_building(map: &CityMap, p: Vec2) -> &Building {
    map.buildings
        .iter()
        .min_by(|a, b| a.door.distance(p).total_cmp(&b.door.distance(p)).then(a.id.cmp(&b.id)))
        .expect("map has buildings")
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 < 1e-12 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Door-to-door polyline. Route ends that overshoot a door are trimmed so
/// the walk never doubles back.
fn route_polyline(g: &WaypointGraph, nodes: &mut Vec<u32>, start: Vec2, goal: Vec2) -> Vec<Vec2> {
    const ON_EDGE: f64 = 0.5;
    while nodes.len() >= 2 && point_segment_distance(start, g.position(nodes[0]), g.position(nodes[1])) < ON_EDGE {
        nodes.remove(0);
    }
    while nodes.len() >= 2 {
        let n = nodes.len();
        if point_segment_distance(goal, g.position(nodes[n - 2]), g.position(nodes[n - 1])) < ON_EDGE {
            nodes.pop();
        } else {
            break;
        }
    }
    let mut pts = vec![start];
    pts.extend(nodes.iter().map(|&n| g.position(n)));
    pts.push(goal);
    pts.dedup_by(|b, a| a.distance(*b) < ON_EDGE);
    pts
}

/// A maximal straight stretch of a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub heading: Cardinal,
    pub from: Vec2,
    pub to: Vec2,
}

impl Leg {
    pub fn length(&self) -> f64 {
        self.from.distance(self.to)
    }
}

pub fn legs(points: &[Vec2]) -> Vec<Leg> {
    let mut out: Vec<Leg> = Vec::new();
    for w in points.windows(2) {
        let heading = Cardinal::from_heading(w[0].bearing_to(w[1]));
        match out.last_mut() {
            Some(l) if l.heading == heading => l.to = w[1],
            _ => out.push(Leg { heading, from: w[0], to: w[1] }),
        }
    }
    out
}

/// Number of instructions a route decomposes into.
pub fn instruction_count(turns: usize) -> usize {
    if turns == 0 {
        3
    } else {
        2 + 2 * turns
    }
}

/// True when a road carriageway lies between the two points.
fn across_street(map: &CityMap, from: Vec2, to: Vec2) -> bool {
    let d = to - from;
    let len = d.length();
    if len < 1e-9 {
        return false;
    }
    let dir = d * (1.0 / len);
    let half = map.spec.half_road();
    map.roads.iter().any(|r| {
        let carriage = Aabb::from_corners(r.centerline[0], r.centerline[1]).expanded(half);
        ray_aabb(from, dir, &carriage).is_some_and(|t| t < len)
    })
}

pub fn relative_side(map: &CityMap, pose: &Pose, building: &Building) -> RelativeSide {
    let target = building.footprint.closest_point(pose.position);
    if across_street(map, pose.position, building.door) {
        return RelativeSide::Opposite;
    }
    let lateral = (target - pose.position).dot(pose.forward().right_normal());
    if lateral < 0.0 {
        RelativeSide::Left
    } else {
        RelativeSide::Right
    }
}

/// Building nearest the turn corner among those on the approach.
fn turn_landmark<'m>(map: &'m CityMap, corner: Vec2, approach: Cardinal, radius: f64) -> Option<&'m Building> {
    let u = approach.unit();
    let key = |b: &&Building| b.door.distance(corner);
    map.buildings
        .iter()
        .filter(|b| (b.door - corner).dot(u) <= 0.0 && b.door.distance(corner) <= radius)
        .min_by(|a, b| key(a).total_cmp(&key(b)).then(a.id.cmp(&b.id)))
        .or_else(|| {
            map.buildings
                .iter()
                .min_by(|a, b| key(a).total_cmp(&key(b)).then(a.id.cmp(&b.id)))
        })
}

/// Scan used as a hint: cast on the static part of the map only.
pub fn capture_hint(static_map: &CityMap, pose: Pose, params: &ScanParams) -> Scan {
    scan(static_map, &[], pose, View::Level, params)
}

struct Builder<'a> {
    map: &'a CityMap,
    static_map: &'a CityMap,
    config: &'a MMNavConfig,
    params: &'a ScanParams,
    out: Vec<Subtask>,
}

impl Builder<'_> {
    fn push(
        &mut self,
        category: SubtaskCategory,
        pose: Pose,
        landmark: Option<&Building>,
        turn_angle: Option<f64>,
    ) {
        let mut s = Subtask {
            category,
            instruction: String::new(),
            hint: capture_hint(self.static_map, pose, self.params),
            goal: GoalSpec {
                pose,
                position_tolerance: self.config.position_tolerance,
                heading_tolerance: self.config.heading_tolerance,
            },
            landmark: landmark.map(|b| b.id),
            landmark_text: landmark.map(|b| b.attributes.describe()),
            landmark_side: landmark.map(|b| relative_side(self.map, &pose, b)),
            turn_angle,
        };
        s.instruction = render_instruction(&s);
        self.out.push(s);
    }
}

/// Decomposes a door-to-door route into subtasks.
pub fn decompose(
    map: &CityMap,
    static_map: &CityMap,
    route: &[Vec2],
    start: &Building,
    goal: &Building,
    config: &MMNavConfig,
    params: &ScanParams,
) -> Vec<Subtask> {
    let legs = legs(route);
    let mut b = Builder { map, static_map, config, params, out: Vec::new() };
    let first = legs[0].heading.heading();
    b.push(SubtaskCategory::OrientationAlignment, Pose::new(route[0], first), Some(start), None);
    for w in legs.windows(2) {
        let (prev, next) = (w[0], w[1]);
        let corner = prev.to;
        let angle = angle_diff(prev.heading.heading(), next.heading.heading());
        let landmark = turn_landmark(map, corner, prev.heading, config.landmark_radius);
        b.push(
            SubtaskCategory::MoveAlongRoad,
            Pose::new(corner, prev.heading.heading()),
            landmark,
            Some(angle),
        );
        b.push(SubtaskCategory::TurnAtIntersection, Pose::new(corner, next.heading.heading()), None, Some(angle));
    }
    let end = *route.last().unwrap();
    if legs.len() == 1 {
        b.push(SubtaskCategory::MoveAlongRoad, Pose::new(end, first), Some(goal), None);
    }
    b.push(SubtaskCategory::ReachDestination, Pose::new(end, goal.facing.heading()), Some(goal), None);
    b.out
}

/// Samples endpoint pairs until one yields a route with an allowed number
/// of instructions.
pub fn generate_mmnav_task(
    map: &CityMap,
    graph: &WaypointGraph,
    rng: &mut SimRng,
    id: u32,
    config: &MMNavConfig,
    params: &ScanParams,
) -> Result<MMNavTask, MMNavError> {
    if map.buildings.len() < 2 {
        return Err(MMNavError::TooFewBuildings);
    }
    let static_map = map.static_base();
    let bounds = map.content_bounds();
    for _ in 0..config.max_attempts {
        let p_start = Vec2::new(rng.gen_range(bounds.min.x..bounds.max.x), rng.gen_range(bounds.min.y..bounds.max.y));
        let p_goal = Vec2::new(rng.gen_range(bounds.min.x..bounds.max.x), rng.gen_range(bounds.min.y..bounds.max.y));
        let spawn_heading = Cardinal::ALL[rng.gen_range(0..4)];
        let (sb, gb) = (nearest_building(map, p_start), nearest_building(map, p_goal));
        if sb.id == gb.id {
            continue;
        }
        let dist = sb.door.manhattan(gb.door);
        if dist < config.min_goal_distance || dist > config.max_goal_distance {
            continue;
        }
        let s_node = graph.nearest_on_chain(sb.facing_road, sb.side, sb.door);
        let g_node = graph.nearest_on_chain(gb.facing_road, gb.side, gb.door);
        let Ok(path) = plan_fewest_turns(graph, s_node, g_node) else { continue };
        let mut nodes = path.nodes;
        let route = route_polyline(graph, &mut nodes, sb.door, gb.door);
        if route.len() < 2 {
            continue;
        }
        let n = instruction_count(legs(&route).len() - 1);
        if n < config.min_instructions || n > config.max_instructions {
            continue;
        }
        let subtasks = decompose(map, &static_map, &route, sb, gb, config, params);
        let path_length = route.windows(2).map(|w| w[0].distance(w[1])).sum();
        return Ok(MMNavTask {
            id,
            map_seed: map.spec.seed,
            map_hash: map.hash(),
            difficulty: map.spec.difficulty(),
            start: Pose::new(sb.door, spawn_heading.heading()),
            start_building: sb.id,
            goal_building: gb.id,
            subtasks,
            oracle_path: nodes,
            route,
            path_length,
        });
    }
    Err(MMNavError::NoValidPair(config.max_attempts))
}

/// Position and heading within tolerance; the final subtask also needs
/// its landmark in view.
pub fn subtask_satisfied(pose: &Pose, visible: &Scan, subtask: &Subtask) -> bool {
    let g = &subtask.goal;
    let near = pose.position.manhattan(g.pose.position) <= g.position_tolerance;
    let aligned = angle_diff(pose.heading, g.pose.heading).abs() <= g.heading_tolerance;
    let seen = match (subtask.category, subtask.landmark) {
        (SubtaskCategory::ReachDestination, Some(id)) => visible.sees_building(id),
        _ => true,
    };
    near && aligned && seen
}

pub fn check_subtask_success(env: &Env, agent: u32, subtask: &Subtask) -> Result<bool, EnvError> {
    let pose = env.robot(agent)?.pose;
    let scan = env.scan_from(agent, View::Level)?;
    Ok(subtask_satisfied(&pose, &scan, subtask))
}

#[derive(Serialize, Deserialize)]
struct TaskDocument {
    schema: String,
    version: u32,
    tasks: Vec<MMNavTask>,
}

pub fn save_tasks(tasks: &[MMNavTask], path: &Path) -> Result<(), MMNavError> {
    let doc = TaskDocument {
        schema: TASK_SCHEMA.into(),
        version: TASK_SCHEMA_VERSION,
        tasks: tasks.to_vec(),
    };
    std::fs::write(path, serde_json::to_string(&doc)?)?;
    Ok(())
}

pub fn load_tasks(path: &Path) -> Result<Vec<MMNavTask>, MMNavError> {
    let doc: TaskDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if doc.schema != TASK_SCHEMA || doc.version != TASK_SCHEMA_VERSION {
        return Err(MMNavError::Schema(doc.schema, doc.version));
    }
    Ok(doc.tasks)
}

#[cfg(test)]
mod tests;
