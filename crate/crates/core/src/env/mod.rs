//! Controllable robots on top of the traffic world: discrete actions,
//! ray-scan observations, the polling control buffer and safety events.

mod action;
mod events;
mod scan;

pub use action::{nominal_pose, ActionTiming, RobotAction, View, MESSAGE_LIMIT};
pub use events::{
    crosswalk_bands, static_contacts, CrosswalkBand, EntityRef, EventCounts, SafetyEvent, SafetyKind, CONTACT_EPS,
};
pub use scan::{
    element_class, ground_class, relative_bearing, scan, DynamicBody, LandmarkSighting, RayLabel, Scan, ScanParams,
    SemanticClass, Shape,
};

use crate::city::CityMap;
use crate::geometry::{angle_diff, normalize_heading, sweep_disc_aabb, Aabb, Cardinal, Pose, Vec2};
use crate::traffic::{TickEvents, TrafficConfig, TrafficWorld};
use crate::waypoint::WaypointGraph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::sync::Arc;

pub const ROBOT_RADIUS: f64 = 0.4;
pub const STEP_LENGTH: f64 = 5.0;
pub const POLL_INTERVAL: f64 = 0.01;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub robot_radius: f64,
    pub step_length: f64,
    pub timing: ActionTiming,
    pub poll_interval: f64,
    pub scan: ScanParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            robot_radius: ROBOT_RADIUS,
            step_length: STEP_LENGTH,
            timing: ActionTiming::default(),
            poll_interval: POLL_INTERVAL,
            scan: ScanParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown agent {0}")]
    UnknownAgent(u32),
    #[error("agent {0} is busy")]
    AgentBusy(u32),
    #[error("message of {0} characters exceeds the limit")]
    MessageTooLong(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from: u32,
    pub tick: u64,
    pub text: String,
}

/// Task-specific text handed out with each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPayload {
    pub index: usize,
    pub text: String,
    pub hint: Option<Scan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub agent: u32,
    pub tick: u64,
    pub time: f64,
    pub cardinal: Cardinal,
    pub scan: Scan,
    pub messages: Vec<Message>,
    pub instruction: Option<InstructionPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub action: RobotAction,
    pub start: Pose,
    pub end: Pose,
    pub started_at: f64,
    pub started_tick: u64,
    pub duration: f64,
    /// Set when a translation was cut short by a static footprint.
    pub blocked_by: Option<EntityRef>,
    pub events: Vec<SafetyEvent>,
}

impl Execution {
    fn pose_at(&self, t: f64) -> Pose {
        if self.duration <= 0.0 {
            return self.end;
        }
        let f = ((t - self.started_at) / self.duration).clamp(0.0, 1.0);
        let position = self.start.position + (self.end.position - self.start.position) * f;
        let heading = normalize_heading(self.start.heading + angle_diff(self.start.heading, self.end.heading) * f);
        Pose::new(position, if f >= 1.0 { self.end.heading } else { heading })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub agent: u32,
    pub action: RobotAction,
    pub start: Pose,
    pub pose: Pose,
    pub duration: f64,
    pub blocked: bool,
    pub started_tick: u64,
    pub finished_tick: u64,
    pub events: Vec<SafetyEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: u32,
    pub pose: Pose,
    pub available: bool,
    pub pending: Option<RobotAction>,
    pub current: Option<Execution>,
    pub inbox: Vec<Message>,
    pub latest: Option<Observation>,
    contacts: BTreeSet<EntityRef>,
    bands: BTreeSet<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PollReport {
    pub tick: u64,
    pub time: f64,
    pub started: Vec<(u32, RobotAction)>,
    pub completed: Vec<ActionOutcome>,
    pub events: Vec<SafetyEvent>,
    pub traffic: Vec<TickEvents>,
}

pub struct Env {
    pub world: TrafficWorld,
    pub config: EnvConfig,
    pub robots: Vec<Robot>,
    pub bands: Vec<CrosswalkBand>,
    pub events: Vec<SafetyEvent>,
    polls: u64,
}

impl Env {
    pub fn new(map: Arc<CityMap>, graph: Arc<WaypointGraph>, config: EnvConfig, traffic: TrafficConfig) -> Self {
        let bands = crosswalk_bands(&map);
        Self {
            world: TrafficWorld::new(map, graph, traffic),
            config,
            robots: Vec::new(),
            bands,
            events: Vec::new(),
            polls: 0,
        }
    }

    pub fn map(&self) -> &CityMap {
        &self.world.map
    }

    pub fn time(&self) -> f64 {
        self.polls as f64 * self.config.poll_interval
    }

    pub fn tick(&self) -> u64 {
        self.world.clock.tick
    }

    /// Buffer polls performed so far.
    pub fn polls(&self) -> u64 {
        self.polls
    }

    pub fn add_robot(&mut self, pose: Pose) -> u32 {
        let id = self.robots.len() as u32;
        let bands = self.bands_containing(pose.position);
        let contacts = static_contacts(&self.world.map, pose.position, self.config.robot_radius)
            .into_iter()
            .collect();
        self.robots.push(Robot {
            id,
            pose,
            available: true,
            pending: None,
            current: None,
            inbox: Vec::new(),
            latest: None,
            contacts,
            bands,
        });
        id
    }

    pub fn robot(&self, id: u32) -> Result<&Robot, EnvError> {
        self.robots.get(id as usize).ok_or(EnvError::UnknownAgent(id))
    }

    /// Queues an action for the next poll. Busy agents are rejected.
    pub fn submit(&mut self, id: u32, action: RobotAction) -> Result<(), EnvError> {
        let robot = self.robots.get_mut(id as usize).ok_or(EnvError::UnknownAgent(id))?;
        if let RobotAction::SendMessage { text } = &action {
            let n = text.chars().count();
            if n > MESSAGE_LIMIT {
                return Err(EnvError::MessageTooLong(n));
            }
        }
        if !robot.available || robot.pending.is_some() {
            return Err(EnvError::AgentBusy(id));
        }
        robot.pending = Some(action);
        Ok(())
    }

    fn bands_containing(&self, p: Vec2) -> BTreeSet<usize> {
        self.bands
            .iter()
            .enumerate()
            .filter(|(_, b)| b.area.contains_point(p))
            .map(|(i, _)| i)
            .collect()
    }

    /// Bodies visible to `observer`'s rays: all traffic plus other robots.
    pub fn dynamic_bodies(&self, observer: Option<u32>) -> Vec<DynamicBody> {
        let mut out = Vec::with_capacity(self.world.vehicles.len() + self.world.pedestrians.len() + self.robots.len());
        for v in &self.world.vehicles {
            out.push(DynamicBody {
                class: SemanticClass::Vehicle,
                id: v.id,
                shape: Shape::Box(TrafficWorld::vehicle_box(v)),
            });
        }
        let pr = self.world.config.pedestrian.radius;
        for p in &self.world.pedestrians {
            out.push(DynamicBody {
                class: SemanticClass::Pedestrian,
                id: p.id,
                shape: Shape::Disc { center: p.pose.position, radius: pr },
            });
        }
        for r in &self.robots {
            if Some(r.id) != observer {
                out.push(DynamicBody {
                    class: SemanticClass::Robot,
                    id: r.id,
                    shape: Shape::Disc { center: r.pose.position, radius: self.config.robot_radius },
                });
            }
        }
        out
    }

    pub fn scan_from(&self, id: u32, view: View) -> Result<Scan, EnvError> {
        let r = self.robot(id)?;
        Ok(scan(&self.world.map, &self.dynamic_bodies(Some(id)), r.pose, view, &self.config.scan))
    }

    /// Current observation. Does not consume queued messages.
    pub fn observe(&self, id: u32) -> Result<Observation, EnvError> {
        let r = self.robot(id)?;
        let scan = self.scan_from(id, View::Level)?;
        Ok(Observation {
            agent: id,
            tick: self.tick(),
            time: self.time(),
            cardinal: r.pose.cardinal(),
            scan,
            messages: r.inbox.clone(),
            instruction: None,
        })
    }

    /// True when at least one of the observer's rays lands on the target.
    pub fn visible(&self, observer: u32, target: u32) -> Result<bool, EnvError> {
        self.robot(target)?;
        let s = self.scan_from(observer, View::Level)?;
        Ok(s.sees(SemanticClass::Robot, target))
    }

    /// Where `action` would leave the robot if started now, and the static
    /// entity that would stop it.
    pub fn preview(&self, id: u32, action: &RobotAction) -> Result<(Pose, Option<EntityRef>), EnvError> {
        Ok(self.sweep(self.robot(id)?.pose, action))
    }

    /// End pose of a translation, truncated at the first static contact.
    fn sweep(&self, start: Pose, action: &RobotAction) -> (Pose, Option<EntityRef>) {
        let nominal = nominal_pose(start, action, self.config.step_length);
        let Some(off) = action.translation_offset() else {
            return (nominal, None);
        };
        let dir = Vec2::from_heading(start.heading + off);
        let r = self.config.robot_radius;
        let window = Aabb::from_corners(start.position, nominal.position).expanded(r + CONTACT_EPS);
        let mut best: Option<(f64, EntityRef)> = None;
        let map = &self.world.map;
        map.index.visit(&window, |entity, bbox| {
            let other = match entity {
                crate::city::MapEntity::Building(id) => EntityRef { class: SemanticClass::Building, id },
                crate::city::MapEntity::Element(id) => EntityRef {
                    class: element_class(map.elements[id as usize].class),
                    id,
                },
                crate::city::MapEntity::Road(_) => return,
            };
            if let Some(t) = sweep_disc_aabb(start.position, dir, r, bbox) {
                if t < self.config.step_length && best.map_or(true, |(bt, bo)| (t, other) < (bt, bo)) {
                    best = Some((t, other));
                }
            }
        });
        match best {
            Some((t, other)) => (Pose::new(start.position + dir * t, start.heading), Some(other)),
            None => (nominal, None),
        }
    }

    /// One buffer poll: advance the clock, run world ticks up to the new
    /// time, finish elapsed actions, then start queued ones.
    pub fn poll(&mut self) -> PollReport {
        self.polls += 1;
        let now = self.time();
        let mut report = PollReport::default();
        let dt = self.world.config.dt;
        while (self.world.clock.tick + 1) as f64 * dt <= now + TIME_EPS {
            report.traffic.push(self.world.tick());
            let t = self.world.clock.time();
            for i in 0..self.robots.len() {
                if let Some(exec) = &self.robots[i].current {
                    self.robots[i].pose = exec.pose_at(t);
                }
            }
            let fresh = self.detect_events();
            report.events.extend(fresh);
        }

        for i in 0..self.robots.len() {
            let done = matches!(&self.robots[i].current, Some(e) if now + TIME_EPS >= e.started_at + e.duration);
            if !done {
                continue;
            }
            let exec = self.robots[i].current.take().unwrap();
            self.robots[i].pose = exec.end;
            let id = self.robots[i].id;
            let view = match exec.action {
                RobotAction::Look { view } => view,
                _ => View::Level,
            };
            let scan = self.scan_from(id, view).unwrap();
            let robot = &mut self.robots[i];
            robot.available = true;
            let messages = std::mem::take(&mut robot.inbox);
            robot.latest = Some(Observation {
                agent: id,
                tick: self.world.clock.tick,
                time: now,
                cardinal: robot.pose.cardinal(),
                scan,
                messages,
                instruction: None,
            });
            report.completed.push(ActionOutcome {
                agent: id,
                action: exec.action,
                start: exec.start,
                pose: exec.end,
                duration: exec.duration,
                blocked: exec.blocked_by.is_some(),
                started_tick: exec.started_tick,
                finished_tick: self.world.clock.tick,
                events: exec.events,
            });
        }

        for i in 0..self.robots.len() {
            if !self.robots[i].available {
                continue;
            }
            let Some(action) = self.robots[i].pending.take() else { continue };
            let start = self.robots[i].pose;
            let (end, blocked_by) = self.sweep(start, &action);
            let id = self.robots[i].id;
            if let RobotAction::SendMessage { text } = &action {
                let tick = self.world.clock.tick;
                for other in self.robots.iter_mut().filter(|r| r.id != id) {
                    other.inbox.push(Message { from: id, tick, text: text.clone() });
                }
            }
            let robot = &mut self.robots[i];
            robot.available = false;
            robot.current = Some(Execution {
                action: action.clone(),
                start,
                end,
                started_at: now,
                started_tick: self.world.clock.tick,
                duration: self.config.timing.duration(&action),
                blocked_by,
                events: Vec::new(),
            });
            report.started.push((id, action));
        }
        report.tick = self.world.clock.tick;
        report.time = now;
        report
    }

    /// Contact and crosswalk checks at the current tick. Each continuous
    /// contact or band stay yields a single event.
    fn detect_events(&mut self) -> Vec<SafetyEvent> {
        let tick = self.world.clock.tick;
        let r = self.config.robot_radius;
        let pr = self.world.config.pedestrian.radius;
        let mut fresh = Vec::new();
        for i in 0..self.robots.len() {
            let pos = self.robots[i].pose.position;
            let agent = self.robots[i].id;
            let mut contacts: BTreeSet<EntityRef> = static_contacts(&self.world.map, pos, r).into_iter().collect();
            let statics = contacts.clone();
            for v in &self.world.vehicles {
                if TrafficWorld::vehicle_box(v).distance_to(pos) <= r + CONTACT_EPS {
                    contacts.insert(EntityRef { class: SemanticClass::Vehicle, id: v.id });
                }
            }
            for p in &self.world.pedestrians {
                if p.pose.position.distance(pos) <= r + pr + CONTACT_EPS {
                    contacts.insert(EntityRef { class: SemanticClass::Pedestrian, id: p.id });
                }
            }
            for other in contacts.difference(&self.robots[i].contacts) {
                let kind = if statics.contains(other) {
                    SafetyKind::StaticCollision
                } else {
                    SafetyKind::DynamicCollision
                };
                fresh.push(SafetyEvent { kind, tick, agent, other: *other });
            }
            let bands = self.bands_containing(pos);
            for &b in bands.difference(&self.robots[i].bands) {
                let band = &self.bands[b];
                let green = self.world.lights[band.signal as usize].is_green(band.walk_axis);
                if !green {
                    fresh.push(SafetyEvent {
                        kind: SafetyKind::RedLightViolation,
                        tick,
                        agent,
                        other: EntityRef { class: SemanticClass::Driveway, id: band.intersection },
                    });
                }
            }
            let robot = &mut self.robots[i];
            robot.contacts = contacts;
            robot.bands = bands;
        }
        for e in &fresh {
            if let Some(exec) = &mut self.robots[e.agent as usize].current {
                exec.events.push(*e);
            }
        }
        self.events.extend_from_slice(&fresh);
        fresh
    }

    /// Submits and polls until this agent's action completes.
    pub fn run_action(&mut self, id: u32, action: RobotAction) -> Result<ActionOutcome, EnvError> {
        self.submit(id, action)?;
        loop {
            let report = self.poll();
            if let Some(done) = report.completed.into_iter().find(|o| o.agent == id) {
                return Ok(done);
            }
        }
    }

    /// Polls until every robot is idle with nothing queued.
    pub fn settle(&mut self) {
        while self.robots.iter().any(|r| !r.available || r.pending.is_some()) {
            self.poll();
        }
    }

    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.world.state_hash().as_bytes());
        h.update(serde_json::to_vec(&self.robots).expect("robots serialize"));
        h.update(serde_json::to_vec(&self.events).expect("events serialize"));
        h.update(self.polls.to_le_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests;
