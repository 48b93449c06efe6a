use super::light::{signal_gate, GateVerdict, TrafficLight, PROCEED_THRESHOLD};
use crate::geometry::{angle_diff, normalize_heading, Axis, Pose, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// PID channel with conditional-integration anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pid {
    pub gains: PidGains,
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_error: None,
        }
    }

    /// Output clamped to `[lo, hi]`. The integrator only advances while the
    /// output is unsaturated.
    pub fn step(&mut self, error: f64, dt: f64, lo: f64, hi: f64) -> f64 {
        let g = self.gains;
        let derivative = self.prev_error.map_or(0.0, |p| (error - p) / dt);
        self.prev_error = Some(error);
        let trial = self.integral + error * dt;
        let raw = g.kp * error + g.ki * trial + g.kd * derivative;
        let out = raw.clamp(lo, hi);
        if out == raw {
            self.integral = trial;
        }
        out
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    pub max_turn_rate: f64,
    pub arrival_radius: f64,
    pub speed_gains: PidGains,
    pub heading_gains: PidGains,
    /// Distance kept before the stop line when holding.
    pub stop_margin: f64,
    /// Extra seconds of slack demanded when committing to a crossing.
    pub commit_slack: f64,
    /// Deceleration at which a vehicle starts braking for a stop line.
    pub brake_trigger: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            max_speed: 10.0,
            max_accel: 3.0,
            max_brake: 6.0,
            max_turn_rate: 120.0,
            arrival_radius: 1.0,
            speed_gains: PidGains { kp: 0.8, ki: 0.1, kd: 0.05 },
            heading_gains: PidGains { kp: 2.0, ki: 0.0, kd: 0.2 },
            stop_margin: 0.5,
            commit_slack: 1.0,
            brake_trigger: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RoutePointKind {
    Lane,
    /// Entry into an intersection box; `signal` is set when it is signalized.
    StopLine { intersection: u32, axis: Axis, signal: Option<u32> },
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutePoint {
    pub position: Vec2,
    pub kind: RoutePointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleAgent {
    pub id: u32,
    pub pose: Pose,
    pub speed: f64,
    pub target_speed: f64,
    pub route: Vec<RoutePoint>,
    pub progress: usize,
    /// Intersection sequence behind the route points.
    pub nodes: Vec<u32>,
    pub speed_pid: Pid,
    pub heading_pid: Pid,
    /// Cleared to cross the upcoming stop line.
    pub committed: bool,
    pub routes_issued: u32,
    /// Where the current leg began; used to detect overshoot.
    pub leg_start: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopLineCrossing {
    pub intersection: u32,
    pub axis: Axis,
    pub signal: u32,
    /// Gate verdict recomputed at the crossing tick.
    pub verdict: GateVerdict,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VehicleStep {
    pub crossing: Option<StopLineCrossing>,
    pub waiting_at: Option<u32>,
    pub consumed: bool,
}

impl VehicleAgent {
    pub fn new(id: u32, pose: Pose, params: &VehicleParams) -> Self {
        Self {
            id,
            pose,
            speed: 0.0,
            target_speed: params.max_speed,
            route: Vec::new(),
            progress: 0,
            nodes: Vec::new(),
            speed_pid: Pid::new(params.speed_gains),
            heading_pid: Pid::new(params.heading_gains),
            committed: false,
            routes_issued: 0,
            leg_start: pose.position,
        }
    }

    pub fn finished(&self) -> bool {
        self.progress >= self.route.len()
    }

    /// One control tick. `light_of` resolves a signal id to its light.
    pub fn control_step<'a>(
        &mut self,
        dt: f64,
        params: &VehicleParams,
        light_of: impl Fn(u32) -> &'a TrafficLight,
    ) -> VehicleStep {
        let mut out = VehicleStep::default();
        if self.finished() {
            return out;
        }
        let target = self.route[self.progress];
        let to_target = target.position - self.pose.position;
        let distance = to_target.length();
        let bearing = self.pose.position.bearing_to(target.position);
        let heading_error = if distance > 1e-9 { angle_diff(self.pose.heading, bearing) } else { 0.0 };

        let cruise = self.target_speed * (1.0 - heading_error.abs() / 180.0).max(0.4);
        let mut accel = self.speed_pid.step(cruise - self.speed, dt, -params.max_brake, params.max_accel);

        let mut hold = false;
        if let RoutePointKind::StopLine { axis, signal: Some(signal), intersection } = target.kind {
            if !self.committed {
                let light = light_of(signal);
                let eta = distance / (0.9 * self.speed).max(1.0) + params.commit_slack;
                if signal_gate(light, axis) == GateVerdict::Proceed && eta < light.remaining - PROCEED_THRESHOLD {
                    self.committed = true;
                }
            }
            if !self.committed {
                out.waiting_at = Some(intersection);
                let stop_gap = distance - params.stop_margin;
                if stop_gap <= 0.05 {
                    accel = -(self.speed / dt).min(params.max_brake);
                    hold = self.speed <= params.max_brake * dt;
                } else {
                    let needed = self.speed * self.speed / (2.0 * stop_gap);
                    if needed >= params.brake_trigger {
                        accel = -needed.min(params.max_brake);
                    } else {
                        // creep without building up more speed than can be shed
                        let cap = (2.0 * params.brake_trigger * stop_gap).sqrt();
                        if self.speed >= cap {
                            accel = accel.min(0.0);
                        }
                    }
                }
            }
        }

        if hold {
            self.speed = 0.0;
            self.speed_pid.reset();
            return out;
        }

        let turn = self.heading_pid.step(heading_error, dt, -params.max_turn_rate, params.max_turn_rate);
        self.pose.heading = normalize_heading(self.pose.heading + turn * dt);
        self.speed = (self.speed + accel * dt).clamp(0.0, params.max_speed);
        let mut step = self.pose.forward() * (self.speed * dt);
        if let RoutePointKind::StopLine { signal: Some(_), .. } = target.kind {
            if !self.committed {
                // never roll past the holding point
                let room = (distance - params.stop_margin).max(0.0);
                if step.length() > room {
                    step = step.normalized() * room;
                }
            }
        }
        self.pose.position = self.pose.position + step;

        let from = self.leg_start;
        let after = target.position - self.pose.position;
        let passed = (target.position - from).dot(after) < 0.0;
        let gated = matches!(target.kind, RoutePointKind::StopLine { signal: Some(_), .. }) && !self.committed;
        if !gated && (after.length() <= params.arrival_radius || passed) {
            if let RoutePointKind::StopLine { intersection, axis, signal: Some(signal) } = target.kind {
                out.crossing = Some(StopLineCrossing {
                    intersection,
                    axis,
                    signal,
                    verdict: signal_gate(light_of(signal), axis),
                });
            }
            self.committed = false;
            self.leg_start = target.position;
            self.progress += 1;
            out.consumed = true;
        }
        out
    }
}
