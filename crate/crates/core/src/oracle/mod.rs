//! Scripted agents: the closed-loop oracle for both benchmarks and a
//! uniform random baseline.

use crate::city::CityMap;
use crate::env::{RobotAction, CONTACT_EPS};
use crate::episode::{Episode, EpisodeError, EpisodeStatus, TaskSpec};
use crate::geometry::{angle_diff, Cardinal, Pose, Vec2};
use crate::rng::SimRng;
use crate::traffic::TrafficWorld;
use crate::waypoint::runs;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Consecutive stays tolerated before giving up.
    pub wait_budget: u32,
    /// Green time beyond the action duration required to enter a crosswalk.
    pub signal_margin: f64,
    /// Extra gap kept from traffic when stepping.
    pub clearance: f64,
    /// Hard cap on actions per episode.
    pub max_actions: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { wait_budget: 600, signal_margin: 1.0, clearance: 0.5, max_actions: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle blocked at {at:?}: {reason}")]
    Blocked { agent: u32, at: Pose, reason: String },
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("oracle does not handle this task kind")]
    Unsupported,
}

/// Quarter turns taking heading `from` to heading `to`.
pub fn rotations(from: f64, to: f64) -> Vec<RobotAction> {
    let d = angle_diff(from, to);
    let quarters = (d / 90.0).round() as i32;
    match quarters {
        0 => vec![],
        1 => vec![RobotAction::TurnRight],
        -1 => vec![RobotAction::TurnLeft],
        _ => vec![RobotAction::TurnRight, RobotAction::TurnRight],
    }
}

/// Steps of length `step` covering `dist`, leaving a residual in
/// `(slack - step, slack]`.
fn step_count(dist: f64, step: f64, slack: f64) -> usize {
    ((dist - slack) / step - 1e-9).ceil().max(0.0) as usize
}

fn travel_cardinal(d: Vec2) -> Cardinal {
    if d.x.abs() >= d.y.abs() {
        if d.x >= 0.0 { Cardinal::E } else { Cardinal::W }
    } else if d.y >= 0.0 {
        Cardinal::N
    } else {
        Cardinal::S
    }
}

/// Open-loop action list from `pose` to `goal`: face the dominant travel
/// direction, strafe out lateral offset, walk, then turn to the goal heading.
/// Positive `bias` stops short of the goal, negative overshoots, by up to
/// that many meters beyond the usual half step.
pub fn plan_motion_biased(pose: Pose, goal: Pose, step: f64, bias: f64) -> Vec<RobotAction> {
    let mut out = Vec::new();
    let d = goal.position - pose.position;
    let travel = travel_cardinal(d);
    let half = step / 2.0;
    let mut h = pose.heading;
    if step_count(d.x.abs().max(d.y.abs()), step, half + bias.abs()) > 0 {
        out.extend(rotations(h, travel.heading()));
        h = travel.heading();
    }
    let fwd = Vec2::from_heading(h);
    let along = d.dot(fwd);
    let lateral = d.dot(fwd.right_normal());
    let side = if lateral >= 0.0 { RobotAction::MoveRight } else { RobotAction::MoveLeft };
    out.extend(std::iter::repeat(side).take(step_count(lateral.abs(), step, half + bias.abs())));
    let ahead = if along >= 0.0 { RobotAction::MoveForward } else { RobotAction::MoveBackward };
    out.extend(std::iter::repeat(ahead).take(step_count(along.abs(), step, half + bias)));
    out.extend(rotations(h, goal.heading));
    out
}

pub fn plan_motion(pose: Pose, goal: Pose, step: f64) -> Vec<RobotAction> {
    plan_motion_biased(pose, goal, step, 0.0)
}

/// Rounding bias near a corner: end on the side away from the intersection,
/// so the leftover offset never pushes the next leg into the carriageway.
pub fn corner_bias(map: &CityMap, pose: Pose, goal: Pose) -> f64 {
    const REACH: f64 = 16.0;
    const BIAS: f64 = 1.0;
    let d = goal.position - pose.position;
    let Some(c) = map
        .intersections
        .iter()
        .map(|i| i.center)
        .filter(|c| c.distance(goal.position) <= REACH)
        .min_by(|a, b| a.distance(goal.position).total_cmp(&b.distance(goal.position)))
    else {
        return 0.0;
    };
    let u = Vec2::from_heading(travel_cardinal(d).heading());
    let beyond = (goal.position - c).dot(u);
    if beyond > 0.5 {
        -BIAS
    } else if beyond < -0.5 {
        BIAS
    } else {
        0.0
    }
}

/// Plan the oracle follows from `pose` to `goal` on `map`.
pub fn oracle_plan(map: &CityMap, pose: Pose, goal: Pose, step: f64) -> Vec<RobotAction> {
    plan_motion_biased(pose, goal, step, corner_bias(map, pose, goal))
}

enum Verdict {
    Go,
    Wait(&'static str),
    Blocked,
}

fn segment_samples(a: Vec2, b: Vec2) -> impl Iterator<Item = Vec2> {
    let n = ((a.distance(b) / 0.25).ceil() as usize).max(1);
    (1..=n).map(move |i| a + (b - a) * (i as f64 / n as f64))
}

/// Safety screen for a translation about to start.
fn screen(ep: &Episode, agent: u32, action: &RobotAction, cfg: &OracleConfig) -> Result<Verdict, EpisodeError> {
    if action.translation_offset().is_none() {
        return Ok(Verdict::Go);
    }
    let env = &ep.env;
    let (end, blocked) = env.preview(agent, action)?;
    if blocked.is_some() {
        return Ok(Verdict::Blocked);
    }
    let start = env.robot(agent)?.pose.position;
    let r = env.config.robot_radius;
    let duration = env.config.timing.duration(action);
    for band in &env.bands {
        if band.area.contains_point(start) {
            continue;
        }
        if segment_samples(start, end.position).any(|p| band.area.contains_point(p)) {
            let light = &env.world.lights[band.signal as usize];
            if !light.is_green(band.walk_axis) || light.remaining < duration + cfg.signal_margin {
                return Ok(Verdict::Wait("signal"));
            }
        }
    }
    let pr = env.world.config.pedestrian.radius;
    let gap = r + cfg.clearance + CONTACT_EPS;
    for p in segment_samples(start, end.position) {
        if env.world.vehicles.iter().any(|v| TrafficWorld::vehicle_box(v).distance_to(p) <= gap) {
            return Ok(Verdict::Wait("vehicle"));
        }
        if env.world.pedestrians.iter().any(|q| q.pose.position.distance(p) <= gap + pr) {
            return Ok(Verdict::Wait("pedestrian"));
        }
    }
    Ok(Verdict::Go)
}

/// Hook called before each oracle action with the chosen action.
pub trait StepObserver {
    fn before(&mut self, ep: &Episode, agent: u32, action: &RobotAction, goal: Pose);
}

impl<F: FnMut(&Episode, u32, &RobotAction, Pose)> StepObserver for F {
    fn before(&mut self, ep: &Episode, agent: u32, action: &RobotAction, goal: Pose) {
        self(ep, agent, action, goal)
    }
}

struct Walker<'a> {
    cfg: &'a OracleConfig,
    waits: u32,
    actions: u32,
    /// Along-track steps still owed after a sidestep, taken before any
    /// lateral correction.
    detour: u32,
    /// Recent positions, used to refuse lateral moves that undo progress.
    recent: Vec<Vec2>,
}

impl Walker<'_> {
    /// Picks the next action toward `goal`, or None once there.
    fn next(&mut self, ep: &Episode, agent: u32, goal: Pose) -> Result<Option<RobotAction>, OracleError> {
        let pose = ep.env.robot(agent).map_err(EpisodeError::from)?.pose;
        let step = ep.env.config.step_length;
        let plan = oracle_plan(ep.env.map(), pose, goal, step);
        let Some(first) = plan.first().cloned() else { return Ok(None) };
        let blocked = |reason: &str| OracleError::Blocked { agent, at: pose, reason: reason.to_string() };
        if self.actions >= self.cfg.max_actions {
            return Err(blocked("action cap reached"));
        }
        // a blocked strafe falls back to the along-track move, then to a sidestep
        let along = plan.iter().find(|a| matches!(a, RobotAction::MoveForward | RobotAction::MoveBackward)).cloned();
        let lateral = matches!(first, RobotAction::MoveLeft | RobotAction::MoveRight);
        let mut candidates = Vec::new();
        if lateral && self.detour > 0 {
            candidates.extend(along.clone());
        }
        candidates.push(first.clone());
        if lateral {
            candidates.extend(along);
        }
        let mut seen = Vec::new();
        candidates.retain(|a| if seen.contains(a) { false } else { seen.push(a.clone()); true });
        let primary = candidates.len();
        if first.translation_offset().is_some() {
            for side in [RobotAction::MoveLeft, RobotAction::MoveRight] {
                if !candidates.contains(&side) {
                    candidates.push(side);
                }
            }
        }
        for (i, a) in candidates.into_iter().enumerate() {
            if matches!(a, RobotAction::MoveLeft | RobotAction::MoveRight) {
                let (end, _) = ep.env.preview(agent, &a).map_err(EpisodeError::from)?;
                if self.recent.iter().any(|p| p.distance(end.position) < 0.5) && self.detour > 0 {
                    continue;
                }
            }
            match screen(ep, agent, &a, self.cfg)? {
                Verdict::Go => {
                    self.waits = 0;
                    if i >= primary {
                        self.detour = 2;
                    } else if matches!(a, RobotAction::MoveForward | RobotAction::MoveBackward) {
                        self.detour = self.detour.saturating_sub(1);
                    }
                    return Ok(Some(a));
                }
                Verdict::Wait(why) => {
                    self.waits += 1;
                    if self.waits > self.cfg.wait_budget {
                        return Err(blocked(&format!("waited too long for {why}")));
                    }
                    return Ok(Some(RobotAction::Stay));
                }
                Verdict::Blocked => continue,
            }
        }
        Err(blocked("no unobstructed move"))
    }

    fn act(
        &mut self,
        ep: &mut Episode,
        agent: u32,
        action: RobotAction,
        goal: Pose,
        obs: &mut impl StepObserver,
    ) -> Result<(), OracleError> {
        obs.before(ep, agent, &action, goal);
        self.actions += 1;
        if action.translation_offset().is_some() {
            let here = ep.env.robot(agent).map_err(EpisodeError::from)?.pose.position;
            self.recent.push(here);
            if self.recent.len() > 8 {
                self.recent.remove(0);
            }
        }
        ep.step(agent, action)?;
        Ok(())
    }
}

/// Walks every subtask goal in turn and evaluates there.
pub fn run_mmnav_oracle(ep: &mut Episode, cfg: &OracleConfig, obs: &mut impl StepObserver) -> Result<(), OracleError> {
    let TaskSpec::Mmnav(task) = &ep.task else { return Err(OracleError::Unsupported) };
    let goals: Vec<Pose> = task.subtasks.iter().map(|s| s.goal.pose).collect();
    let mut w = Walker { cfg, waits: 0, actions: 0, detour: 0, recent: Vec::new() };
    for goal in goals {
        while ep.status == EpisodeStatus::Running {
            match w.next(ep, 0, goal)? {
                Some(a) => w.act(ep, 0, a, goal, obs)?,
                None => {
                    w.act(ep, 0, RobotAction::Evaluate, goal, obs)?;
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Main robot walks the planned route toward the follower, using ground
/// truth to decide when the follower is in view.
pub fn run_mrs_oracle(ep: &mut Episode, cfg: &OracleConfig, obs: &mut impl StepObserver) -> Result<(), OracleError> {
    let TaskSpec::Mrs(task) = &ep.task else { return Err(OracleError::Unsupported) };
    let graph = ep.env.world.graph.clone();
    let nodes = task.oracle_path.clone();
    let mut goals: Vec<Pose> = runs(&graph, &nodes)
        .iter()
        .map(|r| Pose::new(graph.position(nodes[r.to]), r.heading.heading()))
        .collect();
    if goals.is_empty() {
        goals.push(task.spawn_follower);
    }
    let mut w = Walker { cfg, waits: 0, actions: 0, detour: 0, recent: Vec::new() };
    for goal in goals {
        loop {
            if ep.status != EpisodeStatus::Running {
                return Ok(());
            }
            if ep.env.visible(0, 1).map_err(EpisodeError::from)? {
                w.act(ep, 0, RobotAction::CheckTaskComplete, goal, obs)?;
                continue;
            }
            match w.next(ep, 0, goal)? {
                Some(a) => w.act(ep, 0, a, goal, obs)?,
                None => break,
            }
        }
    }
    // at the follower's spawn without sight: turn in place and look
    for _ in 0..4 {
        if ep.status != EpisodeStatus::Running {
            break;
        }
        let goal = ep.env.robot(0).map_err(EpisodeError::from)?.pose;
        if ep.env.visible(0, 1).map_err(EpisodeError::from)? {
            w.act(ep, 0, RobotAction::CheckTaskComplete, goal, obs)?;
        } else {
            w.act(ep, 0, RobotAction::TurnRight, goal, obs)?;
        }
    }
    Ok(())
}

pub fn run_oracle(ep: &mut Episode, cfg: &OracleConfig) -> Result<(), OracleError> {
    let mut none = |_: &Episode, _: u32, _: &RobotAction, _: Pose| {};
    match &ep.task {
        TaskSpec::Mmnav(_) => run_mmnav_oracle(ep, cfg, &mut none),
        TaskSpec::Mrs(_) => run_mrs_oracle(ep, cfg, &mut none),
        TaskSpec::Free { .. } => Err(OracleError::Unsupported),
    }
}

/// Uniform choice over movement, stay and the task's judged action, until
/// the episode ends. Agents alternate on search tasks.
pub fn run_random_agent(ep: &mut Episode, rng: &mut SimRng, max_actions: u32) -> Result<(), EpisodeError> {
    let judged = match ep.task {
        TaskSpec::Mrs(_) => RobotAction::CheckTaskComplete,
        _ => RobotAction::Evaluate,
    };
    let alphabet = [
        RobotAction::MoveForward,
        RobotAction::MoveBackward,
        RobotAction::MoveLeft,
        RobotAction::MoveRight,
        RobotAction::TurnLeft,
        RobotAction::TurnRight,
        RobotAction::Stay,
        judged,
    ];
    let agents = ep.agents();
    let mut i = 0;
    while ep.status == EpisodeStatus::Running && i < max_actions {
        let agent = agents[i as usize % agents.len()];
        let a = alphabet[rng.gen_range(0..alphabet.len())].clone();
        ep.step(agent, a)?;
        i += 1;
    }
    Ok(())
}
