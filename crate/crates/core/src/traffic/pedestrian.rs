use crate::geometry::{angle_diff, normalize_heading, Pose, Vec2};
use serde::{Deserialize, Serialize};

pub const MAX_WALK_SPEED: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianParams {
    pub max_turn_rate: f64,
    pub arrival_radius: f64,
    pub radius: f64,
}

impl Default for PedestrianParams {
    fn default() -> Self {
        Self {
            max_turn_rate: 180.0,
            arrival_radius: 0.3,
            radius: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianAgent {
    pub id: u32,
    pub pose: Pose,
    pub walk_speed: f64,
    /// Waypoint ids; `route[progress]` is the current target.
    pub route: Vec<u32>,
    pub progress: usize,
    pub max_turn_rate: f64,
    /// Holding at a corner for the signal.
    pub waiting: bool,
    pub routes_issued: u32,
    /// Where the current leg began; used to detect overshoot.
    pub leg_start: Vec2,
}

impl PedestrianAgent {
    pub fn new(id: u32, pose: Pose, walk_speed: f64, params: &PedestrianParams) -> Self {
        Self {
            id,
            pose,
            walk_speed: walk_speed.clamp(0.0, MAX_WALK_SPEED),
            route: Vec::new(),
            progress: 0,
            max_turn_rate: params.max_turn_rate,
            waiting: false,
            routes_issued: 0,
            leg_start: pose.position,
        }
    }

    pub fn finished(&self) -> bool {
        self.progress >= self.route.len()
    }

    /// Turns toward `target` by at most the rate limit, then walks. Returns
    /// true when the target is reached or passed this tick.
    pub fn step_toward(&mut self, target: Vec2, from: Vec2, dt: f64, arrival_radius: f64) -> bool {
        let offset = target - self.pose.position;
        if offset.length() > 1e-9 {
            let err = angle_diff(self.pose.heading, self.pose.position.bearing_to(target));
            let limit = self.max_turn_rate * dt;
            self.pose.heading = normalize_heading(self.pose.heading + err.clamp(-limit, limit));
        }
        let stride = self.walk_speed * dt;
        self.pose.position = self.pose.position + self.pose.forward() * stride;
        let after = target - self.pose.position;
        after.length() <= arrival_radius || (target - from).dot(after) < 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_walks_straight() {
        let p = PedestrianParams::default();
        let mut a = PedestrianAgent::new(0, Pose::new(Vec2::ZERO, 90.0), 1.5, &p);
        a.step_toward(Vec2::new(100.0, 0.0), Vec2::ZERO, 1.0, 0.3);
        assert_eq!(a.pose.heading, 90.0);
        assert!((a.pose.position.x - 1.5).abs() < 1e-12);
        assert!(a.pose.position.y.abs() < 1e-12);
    }

    #[test]
    fn turn_rate_is_clamped() {
        let p = PedestrianParams { max_turn_rate: 90.0, ..Default::default() };
        let mut a = PedestrianAgent::new(0, Pose::new(Vec2::ZERO, 0.0), 1.0, &p);
        a.step_toward(Vec2::new(0.0, -50.0), Vec2::ZERO, 1.0, 0.3);
        assert!((angle_diff(0.0, a.pose.heading).abs() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn speed_is_capped() {
        let a = PedestrianAgent::new(0, Pose::new(Vec2::ZERO, 0.0), 9.0, &PedestrianParams::default());
        assert_eq!(a.walk_speed, MAX_WALK_SPEED);
    }
}
