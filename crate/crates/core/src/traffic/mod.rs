//! Fixed-timestep background traffic: signal lights, PID-driven vehicles on
//! road lanes, and pedestrians walking the sidewalk waypoint graph.

mod light;
mod pedestrian;
mod vehicle;

pub use light::{signal_gate, GateVerdict, Phase, TrafficLight, DEFAULT_GREEN, PROCEED_THRESHOLD};
pub use pedestrian::{PedestrianAgent, PedestrianParams, MAX_WALK_SPEED};
pub use vehicle::{Pid, PidGains, RoutePoint, RoutePointKind, StopLineCrossing, VehicleAgent, VehicleParams, VehicleStep};

use crate::city::CityMap;
use crate::geometry::{Aabb, Axis, Cardinal, Pose, Vec2};
use crate::rng::{indexed_rng, stage, stage_rng};
use crate::waypoint::{sample_route_from, EdgeKind, RoadGraph, RouteWeights, WaypointGraph};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::sync::Arc;

pub const DEFAULT_DT: f64 = 1.0 / 60.0;

/// Vehicle footprint (length, width) used for perception and collisions.
pub const VEHICLE_SIZE: (f64, f64) = (4.5, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub dt: f64,
    pub green_duration: f64,
    pub vehicle: VehicleParams,
    pub pedestrian: PedestrianParams,
    pub vehicle_weights: RouteWeights,
    pub pedestrian_weights: RouteWeights,
    /// Intersections per sampled vehicle route.
    pub vehicle_hops: usize,
    /// Waypoints per sampled pedestrian route.
    pub pedestrian_hops: usize,
    /// Lateral offset of the driving lane from the road centerline.
    pub lane_offset: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            green_duration: DEFAULT_GREEN,
            vehicle: VehicleParams::default(),
            pedestrian: PedestrianParams::default(),
            vehicle_weights: RouteWeights::default(),
            pedestrian_weights: RouteWeights::default(),
            vehicle_hops: 8,
            pedestrian_hops: 30,
            lane_offset: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub tick: u64,
    pub dt: f64,
}

impl SimClock {
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Robot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkEntry {
    pub tick: u64,
    pub kind: AgentKind,
    pub id: u32,
    pub intersection: u32,
    pub axis: Axis,
    pub verdict: GateVerdict,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickEvents {
    pub tick: u64,
    pub entries: Vec<CrosswalkEntry>,
    /// (kind, id, intersection) for agents held by a signal this tick.
    pub waits: Vec<(AgentKind, u32, u32)>,
    /// (kind, id) for agents that completed a route this tick.
    pub arrivals: Vec<(AgentKind, u32)>,
    /// (pedestrian id, waypoint id) in the order reached.
    pub reached: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tick: u64,
    pub id: u32,
    pub kind: AgentKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Serialize)]
struct DynamicState<'a> {
    clock: &'a SimClock,
    lights: &'a [TrafficLight],
    vehicles: &'a [VehicleAgent],
    pedestrians: &'a [PedestrianAgent],
}

#[derive(Debug, Clone)]
pub struct TrafficWorld {
    pub map: Arc<CityMap>,
    pub graph: Arc<WaypointGraph>,
    pub config: TrafficConfig,
    pub clock: SimClock,
    /// Indexed by signal id.
    pub lights: Vec<TrafficLight>,
    pub vehicles: Vec<VehicleAgent>,
    pub pedestrians: Vec<PedestrianAgent>,
}

fn route_key(kind: AgentKind, id: u32, issue: u32) -> u64 {
    ((kind as u64) << 56) ^ ((id as u64) << 24) ^ issue as u64
}

impl TrafficWorld {
    /// Lights for every signalized intersection plus agents for the map's
    /// traffic population.
    pub fn new(map: Arc<CityMap>, graph: Arc<WaypointGraph>, config: TrafficConfig) -> Self {
        let mut rng = stage_rng(map.spec.seed, stage::SIGNALS);
        let cycle_ticks = (2.0 * config.green_duration / config.dt).round() as u64;
        let mut lights = Vec::new();
        for inter in &map.intersections {
            if let Some(signal) = inter.signal {
                debug_assert_eq!(signal as usize, lights.len());
                let offset = rng.gen_range(0..cycle_ticks.max(1)) as f64 * config.dt;
                lights.push(TrafficLight::new(inter.id, config.green_duration, offset));
            }
        }
        let mut world = Self {
            map: map.clone(),
            graph,
            clock: SimClock { tick: 0, dt: config.dt },
            config,
            lights,
            vehicles: Vec::new(),
            pedestrians: Vec::new(),
        };
        for spawn in &map.population.vehicles {
            world.spawn_vehicle(spawn.id, spawn.from, spawn.to);
        }
        for spawn in &map.population.pedestrians {
            world.spawn_pedestrian(spawn.id, spawn.road, spawn.side, spawn.along, spawn.walk_speed);
        }
        world
    }

    pub fn light_at(&self, intersection: u32) -> Option<&TrafficLight> {
        self.map.intersection(intersection).signal.map(|s| &self.lights[s as usize])
    }

    fn lane_points(&self, prev: Option<u32>, nodes: &[u32]) -> Vec<RoutePoint> {
        let half = self.map.spec.corridor_half();
        let lane = self.config.lane_offset;
        let mut out = Vec::new();
        let mut before = prev;
        for w in nodes.windows(2) {
            let a = self.map.intersection(w[0]);
            let b = self.map.intersection(w[1]);
            let u = (b.center - a.center).normalized();
            let n = u.right_normal();
            if let Some(p) = before {
                let incoming = (a.center - self.map.intersection(p).center).normalized();
                if incoming.dot(u) < -0.5 {
                    out.push(RoutePoint { position: a.center, kind: RoutePointKind::Turn });
                }
            }
            out.push(RoutePoint {
                position: a.center + u * half + n * lane,
                kind: RoutePointKind::Lane,
            });
            out.push(RoutePoint {
                position: b.center - u * half + n * lane,
                kind: RoutePointKind::StopLine {
                    intersection: b.id,
                    axis: Cardinal::from_heading(Vec2::ZERO.bearing_to(u)).axis(),
                    signal: b.signal,
                },
            });
            before = Some(w[0]);
        }
        out
    }

    fn issue_vehicle_route(&mut self, idx: usize, prev: Option<u32>, start: u32) {
        let v = &self.vehicles[idx];
        let mut rng = indexed_rng(self.map.spec.seed, stage::SIM, route_key(AgentKind::Vehicle, v.id, v.routes_issued));
        let graph = RoadGraph { map: &self.map };
        let nodes = sample_route_from(&graph, prev, start, self.config.vehicle_hops, &self.config.vehicle_weights, &mut rng);
        let points = self.lane_points(prev, &nodes);
        let v = &mut self.vehicles[idx];
        v.route = points;
        v.nodes = nodes;
        v.progress = 0;
        v.routes_issued += 1;
    }

    pub fn spawn_vehicle(&mut self, id: u32, from: u32, to: u32) {
        let a = self.map.intersection(from).center;
        let b = self.map.intersection(to).center;
        let u = (b - a).normalized();
        let start = a + u * self.map.spec.corridor_half() + u.right_normal() * self.config.lane_offset;
        let pose = Pose::new(start, Vec2::ZERO.bearing_to(u));
        self.vehicles.push(VehicleAgent::new(id, pose, &self.config.vehicle));
        let idx = self.vehicles.len() - 1;
        // first leg from the spawn point, then a sampled continuation
        let mut rng = indexed_rng(self.map.spec.seed, stage::SIM, route_key(AgentKind::Vehicle, id, u32::MAX));
        let graph = RoadGraph { map: &self.map };
        let mut nodes = vec![from];
        nodes.extend(sample_route_from(&graph, Some(from), to, self.config.vehicle_hops, &self.config.vehicle_weights, &mut rng));
        let mut points = self.lane_points(None, &nodes);
        points.remove(0);
        let v = &mut self.vehicles[idx];
        v.route = points;
        v.nodes = nodes;
    }

    pub fn spawn_pedestrian(&mut self, id: u32, road: u32, side: crate::city::Side, along: f64, walk_speed: f64) {
        let chain = self.graph.chain(road, side).to_vec();
        let pos = |n: u32| self.graph.position(n);
        let total: f64 = chain.windows(2).map(|w| pos(w[0]).distance(pos(w[1]))).sum();
        let mut s = along.clamp(0.0, 1.0) * total;
        let mut seg = 0;
        while seg + 2 < chain.len() {
            let l = pos(chain[seg]).distance(pos(chain[seg + 1]));
            if s <= l {
                break;
            }
            s -= l;
            seg += 1;
        }
        let (a, b) = (chain[seg], chain[seg + 1]);
        let dir = (pos(b) - pos(a)).normalized();
        let start = pos(a) + dir * s.min(pos(a).distance(pos(b)));
        let mut rng = indexed_rng(self.map.spec.seed, stage::SIM, route_key(AgentKind::Pedestrian, id, u32::MAX));
        let (prev, target) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let mut route = vec![prev];
        route.extend(sample_route_from(
            &*self.graph,
            Some(prev),
            target,
            self.config.pedestrian_hops,
            &self.config.pedestrian_weights,
            &mut rng,
        ));
        let pose = Pose::new(start, start.bearing_to(pos(target)));
        let mut p = PedestrianAgent::new(id, pose, walk_speed, &self.config.pedestrian);
        p.route = route;
        p.progress = 1;
        self.pedestrians.push(p);
    }

    fn issue_pedestrian_route(&mut self, idx: usize) {
        let p = &self.pedestrians[idx];
        let last = *p.route.last().unwrap();
        let prev = p.route.len().checked_sub(2).map(|i| p.route[i]);
        let mut rng = indexed_rng(self.map.spec.seed, stage::SIM, route_key(AgentKind::Pedestrian, p.id, p.routes_issued));
        let route = sample_route_from(
            &*self.graph,
            prev,
            last,
            self.config.pedestrian_hops,
            &self.config.pedestrian_weights,
            &mut rng,
        );
        let p = &mut self.pedestrians[idx];
        p.route = route;
        p.progress = 1;
        p.routes_issued += 1;
    }

    /// Signal gate for the edge a pedestrian is about to walk, if gated.
    fn crossing_gate(&self, a: u32, b: u32) -> Option<(u32, Axis, GateVerdict)> {
        let edge = self.graph.edge_between(a, b)?;
        if let EdgeKind::Crosswalk { intersection, axis, .. } = edge.kind {
            let light = self.light_at(intersection)?;
            return Some((intersection, axis, signal_gate(light, axis)));
        }
        None
    }

    /// Advances lights, then vehicles, then pedestrians, each by ascending id.
    pub fn tick(&mut self) -> TickEvents {
        let dt = self.clock.dt;
        self.clock.tick += 1;
        let tick = self.clock.tick;
        let mut ev = TickEvents { tick, ..Default::default() };
        for l in &mut self.lights {
            *l = l.advance(dt);
        }

        for idx in 0..self.vehicles.len() {
            let lights = &self.lights;
            let params = self.config.vehicle;
            let step = self.vehicles[idx].control_step(dt, &params, |s| &lights[s as usize]);
            let v = &self.vehicles[idx];
            if let Some(c) = step.crossing {
                ev.entries.push(CrosswalkEntry {
                    tick,
                    kind: AgentKind::Vehicle,
                    id: v.id,
                    intersection: c.intersection,
                    axis: c.axis,
                    verdict: signal_gate(&self.lights[c.signal as usize], c.axis),
                });
            }
            if let Some(i) = step.waiting_at {
                ev.waits.push((AgentKind::Vehicle, v.id, i));
            }
            if v.finished() {
                ev.arrivals.push((AgentKind::Vehicle, v.id));
                let n = v.nodes.len();
                let (prev, last) = (v.nodes.get(n.wrapping_sub(2)).copied(), v.nodes[n - 1]);
                self.issue_vehicle_route(idx, prev, last);
            }
        }

        let arrival = self.config.pedestrian.arrival_radius;
        for idx in 0..self.pedestrians.len() {
            let p = &self.pedestrians[idx];
            let id = p.id;
            if p.waiting {
                let (a, b) = (p.route[p.progress - 1], p.route[p.progress]);
                match self.crossing_gate(a, b) {
                    Some((inter, _, GateVerdict::Wait)) => {
                        ev.waits.push((AgentKind::Pedestrian, id, inter));
                        continue;
                    }
                    Some((inter, axis, verdict)) => {
                        ev.entries.push(CrosswalkEntry { tick, kind: AgentKind::Pedestrian, id, intersection: inter, axis, verdict });
                    }
                    None => {}
                }
                self.pedestrians[idx].waiting = false;
            }
            let p = &self.pedestrians[idx];
            let target_id = p.route[p.progress];
            let target = self.graph.position(target_id);
            let from = p.leg_start;
            let p = &mut self.pedestrians[idx];
            if !p.step_toward(target, from, dt, arrival) {
                continue;
            }
            p.leg_start = target;
            p.progress += 1;
            ev.reached.push((id, target_id));
            if p.finished() {
                ev.arrivals.push((AgentKind::Pedestrian, id));
                self.issue_pedestrian_route(idx);
            }
            let p = &self.pedestrians[idx];
            let (a, b) = (p.route[p.progress - 1], p.route[p.progress]);
            match self.crossing_gate(a, b) {
                Some((inter, _, GateVerdict::Wait)) => {
                    self.pedestrians[idx].waiting = true;
                    ev.waits.push((AgentKind::Pedestrian, id, inter));
                }
                Some((inter, axis, verdict)) => {
                    ev.entries.push(CrosswalkEntry { tick, kind: AgentKind::Pedestrian, id, intersection: inter, axis, verdict });
                }
                None => {}
            }
        }
        ev
    }

    /// Hex SHA-256 over the serialized dynamic state.
    pub fn state_hash(&self) -> String {
        let state = DynamicState {
            clock: &self.clock,
            lights: &self.lights,
            vehicles: &self.vehicles,
            pedestrians: &self.pedestrians,
        };
        let bytes = serde_json::to_vec(&state).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn vehicle_box(v: &VehicleAgent) -> Aabb {
        let (len, width) = VEHICLE_SIZE;
        let (hw, hh) = match v.pose.cardinal().axis() {
            Axis::NS => (width * 0.5, len * 0.5),
            Axis::EW => (len * 0.5, width * 0.5),
        };
        Aabb::from_center(v.pose.position, hw, hh)
    }

    pub fn trajectory_records(&self) -> Vec<TrajectoryRecord> {
        let tick = self.clock.tick;
        let vehicles = self.vehicles.iter().map(|v| TrajectoryRecord {
            tick,
            id: v.id,
            kind: AgentKind::Vehicle,
            x: v.pose.position.x,
            y: v.pose.position.y,
            heading: v.pose.heading,
            speed: v.speed,
        });
        let peds = self.pedestrians.iter().map(|p| TrajectoryRecord {
            tick,
            id: p.id,
            kind: AgentKind::Pedestrian,
            x: p.pose.position.x,
            y: p.pose.position.y,
            heading: p.pose.heading,
            speed: if p.waiting { 0.0 } else { p.walk_speed },
        });
        vehicles.chain(peds).collect()
    }

    /// Writes the current agent records as JSON lines.
    pub fn dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for r in self.trajectory_records() {
            serde_json::to_writer(&mut *out, &r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::city::{generate_city, CitySpec, Difficulty};

    fn world(seed: u64, vehicles: u32, pedestrians: u32) -> TrafficWorld {
        let mut spec = CitySpec::preset(seed, Difficulty::Hard);
        spec.traffic.vehicles = vehicles;
        spec.traffic.pedestrians = pedestrians;
        let map = Arc::new(generate_city(&spec).unwrap());
        let graph = Arc::new(WaypointGraph::build(&map));
        TrafficWorld::new(map, graph, TrafficConfig::default())
    }

    #[test]
    fn empty_world_only_advances_clock() {
        let mut w = world(1, 0, 0);
        let lights = w.lights.clone();
        let ev = w.tick();
        assert_eq!(w.clock.tick, 1);
        assert!(ev.entries.is_empty() && ev.arrivals.is_empty());
        assert_eq!(w.lights.len(), lights.len());
    }

    #[test]
    fn replay_gives_same_hash() {
        let mut a = world(5, 20, 40);
        let mut b = world(5, 20, 40);
        for _ in 0..600 {
            a.tick();
            b.tick();
        }
        assert_eq!(a.state_hash(), b.state_hash());
    }

    #[test]
    fn no_entries_under_wait_and_bounded_kinematics() {
        let mut w = world(2, 30, 60);
        let dt = w.clock.dt;
        let mut entries = 0;
        for _ in 0..3000 {
            let speeds: Vec<f64> = w.vehicles.iter().map(|v| v.speed).collect();
            let headings: Vec<f64> = w.pedestrians.iter().map(|p| p.pose.heading).collect();
            let ev = w.tick();
            entries += ev.entries.len();
            assert!(ev.entries.iter().all(|e| e.verdict == GateVerdict::Proceed));
            for (v, s) in w.vehicles.iter().zip(&speeds) {
                assert!((v.speed - s).abs() / dt <= 6.0 + 1e-9);
                assert!(v.speed >= 0.0 && v.speed <= 10.0);
            }
            for (p, h) in w.pedestrians.iter().zip(&headings) {
                let dh = crate::geometry::angle_diff(*h, p.pose.heading).abs();
                assert!(dh <= p.max_turn_rate * dt + 1e-9);
            }
        }
        assert!(entries > 0);
    }

    #[test]
    fn pedestrians_reach_waypoints_in_route_order() {
        let mut w = world(3, 0, 10);
        let routes: Vec<Vec<u32>> = w.pedestrians.iter().map(|p| p.route[1..].to_vec()).collect();
        let mut seen: Vec<Vec<u32>> = vec![Vec::new(); routes.len()];
        let issued: Vec<u32> = w.pedestrians.iter().map(|p| p.routes_issued).collect();
        for _ in 0..6000 {
            let ev = w.tick();
            for (id, node) in ev.reached {
                let i = id as usize;
                if w.pedestrians[i].routes_issued == issued[i] || seen[i].len() < routes[i].len() {
                    seen[i].push(node);
                }
            }
        }
        for (r, s) in routes.iter().zip(&seen) {
            assert!(!s.is_empty());
            let n = s.len().min(r.len());
            assert_eq!(&s[..n], &r[..n]);
        }
    }

    #[test]
    fn vehicles_make_progress() {
        let mut w = world(4, 10, 0);
        let start: Vec<Vec2> = w.vehicles.iter().map(|v| v.pose.position).collect();
        for _ in 0..1200 {
            w.tick();
        }
        let moved = w.vehicles.iter().zip(&start).filter(|(v, s)| v.pose.position.distance(**s) > 20.0).count();
        assert!(moved >= 8, "{moved}");
    }
}
