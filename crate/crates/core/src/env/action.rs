use crate::geometry::{normalize_heading, Pose, Vec2};
use serde::{Deserialize, Serialize};

pub const MESSAGE_LIMIT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    #[default]
    Level,
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RobotAction {
    MoveForward,
    MoveBackward,
    MoveLeft,
    MoveRight,
    TurnLeft,
    TurnRight,
    Stay,
    Evaluate,
    Look { view: View },
    SendMessage { text: String },
    CheckTaskComplete,
}

impl RobotAction {
    /// Heading offset of a translation relative to the body, in degrees.
    pub fn translation_offset(&self) -> Option<f64> {
        match self {
            RobotAction::MoveForward => Some(0.0),
            RobotAction::MoveRight => Some(90.0),
            RobotAction::MoveBackward => Some(180.0),
            RobotAction::MoveLeft => Some(270.0),
            _ => None,
        }
    }

    pub fn rotation(&self) -> Option<f64> {
        match self {
            RobotAction::TurnLeft => Some(-90.0),
            RobotAction::TurnRight => Some(90.0),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RobotAction::MoveForward => "move_forward",
            RobotAction::MoveBackward => "move_backward",
            RobotAction::MoveLeft => "move_left",
            RobotAction::MoveRight => "move_right",
            RobotAction::TurnLeft => "turn_left",
            RobotAction::TurnRight => "turn_right",
            RobotAction::Stay => "stay",
            RobotAction::Evaluate => "evaluate",
            RobotAction::Look { .. } => "look",
            RobotAction::SendMessage { .. } => "send_message",
            RobotAction::CheckTaskComplete => "check_task_complete",
        }
    }

    /// Parses the bare action names used in transcripts and the protocol.
    pub fn from_name(name: &str) -> Option<RobotAction> {
        Some(match name {
            "move_forward" => RobotAction::MoveForward,
            "move_backward" => RobotAction::MoveBackward,
            "move_left" => RobotAction::MoveLeft,
            "move_right" => RobotAction::MoveRight,
            "turn_left" => RobotAction::TurnLeft,
            "turn_right" => RobotAction::TurnRight,
            "stay" => RobotAction::Stay,
            "evaluate" => RobotAction::Evaluate,
            "check_task_complete" => RobotAction::CheckTaskComplete,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTiming {
    pub translation: f64,
    pub rotation: f64,
    pub stay: f64,
}

impl Default for ActionTiming {
    fn default() -> Self {
        Self {
            translation: 2.0,
            rotation: 1.0,
            stay: 0.5,
        }
    }
}

impl ActionTiming {
    pub fn duration(&self, action: &RobotAction) -> f64 {
        if action.translation_offset().is_some() {
            self.translation
        } else if action.rotation().is_some() {
            self.rotation
        } else if *action == RobotAction::Stay {
            self.stay
        } else {
            0.0
        }
    }
}

/// Pose after an unobstructed action.
pub fn nominal_pose(pose: Pose, action: &RobotAction, step: f64) -> Pose {
    if let Some(off) = action.translation_offset() {
        let dir = Vec2::from_heading(pose.heading + off);
        Pose::new(pose.position + dir * step, pose.heading)
    } else if let Some(rot) = action.rotation() {
        Pose::new(pose.position, normalize_heading(pose.heading + rot))
    } else {
        pose
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_from_origin_facing_north() {
        let p = nominal_pose(Pose::new(Vec2::ZERO, 0.0), &RobotAction::MoveForward, 5.0);
        assert!(p.position.distance(Vec2::new(0.0, 5.0)) < 1e-12);
        assert_eq!(p.heading, 0.0);
    }

    #[test]
    fn right_then_left_is_identity() {
        let start = Pose::new(Vec2::ZERO, 0.0);
        let p = nominal_pose(nominal_pose(start, &RobotAction::TurnRight, 5.0), &RobotAction::TurnLeft, 5.0);
        assert_eq!(p, start);
    }

    #[test]
    fn strafes_are_body_relative() {
        let p = nominal_pose(Pose::new(Vec2::ZERO, 90.0), &RobotAction::MoveLeft, 5.0);
        assert!(p.position.distance(Vec2::new(0.0, 5.0)) < 1e-12);
    }

    #[test]
    fn names_round_trip() {
        for a in [RobotAction::MoveForward, RobotAction::TurnLeft, RobotAction::Evaluate, RobotAction::CheckTaskComplete] {
            assert_eq!(RobotAction::from_name(a.name()), Some(a));
        }
    }
}
