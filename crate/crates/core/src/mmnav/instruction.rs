use super::{Subtask, SubtaskCategory};
use crate::geometry::Cardinal;
use serde::{Deserialize, Serialize};

/// Where a landmark sits as seen from the goal pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeSide {
    Left,
    Right,
    /// Across the street.
    Opposite,
}

impl RelativeSide {
    fn phrase(self) -> &'static str {
        match self {
            RelativeSide::Left => "on your left",
            RelativeSide::Right => "on your right",
            RelativeSide::Opposite => "on the opposite side",
        }
    }
}

fn turn_word(angle: f64) -> &'static str {
    if angle.abs() > 135.0 {
        "around"
    } else if angle > 0.0 {
        "right"
    } else {
        "left"
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Fills the category template from the subtask's structured fields.
pub fn render_instruction(s: &Subtask) -> String {
    let landmark = s.landmark_text.as_deref().unwrap_or("a building");
    let side = s.landmark_side.map_or("nearby", |x| x.phrase());
    let cardinal = Cardinal::from_heading(s.goal.pose.heading);
    match s.category {
        SubtaskCategory::OrientationAlignment => {
            format!("Face {}. You will see {} {}.", cardinal.name(), landmark, side)
        }
        SubtaskCategory::MoveAlongRoad if s.turn_angle.is_some() => format!(
            "Move along the road and stop at the intersection when you see {} {}.",
            landmark, side
        ),
        SubtaskCategory::MoveAlongRoad => format!("Move along the road and stop when you see {} {}.", landmark, side),
        SubtaskCategory::TurnAtIntersection => format!(
            "Turn {} at the intersection and you should see this view.",
            turn_word(s.turn_angle.unwrap_or(0.0))
        ),
        SubtaskCategory::ReachDestination => format!(
            "{} {} is your destination. Stop in front of it and face its entrance.",
            capitalize(landmark),
            side
        ),
    }
}
