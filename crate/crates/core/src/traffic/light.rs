use crate::geometry::Axis;
use serde::{Deserialize, Serialize};

/// Minimum green time left for an agent to start crossing.
pub const PROCEED_THRESHOLD: f64 = 15.0;
pub const DEFAULT_GREEN: f64 = 30.0;

/// Slack for deciding that a countdown has reached zero.
const ZERO_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NsGreen,
    EwGreen,
}

impl Phase {
    pub fn green_axis(self) -> Axis {
        match self {
            Phase::NsGreen => Axis::NS,
            Phase::EwGreen => Axis::EW,
        }
    }

    pub fn flipped(self) -> Phase {
        match self {
            Phase::NsGreen => Phase::EwGreen,
            Phase::EwGreen => Phase::NsGreen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub intersection: u32,
    pub phase: Phase,
    pub remaining: f64,
    pub green_duration: f64,
    /// Seconds into the cycle at time zero.
    pub offset: f64,
}

impl TrafficLight {
    /// Light whose cycle is `offset` seconds in at time zero. The cycle
    /// starts with north-south green.
    pub fn new(intersection: u32, green_duration: f64, offset: f64) -> Self {
        let cycle = 2.0 * green_duration;
        let t = offset.rem_euclid(cycle);
        let (phase, into) = if t < green_duration {
            (Phase::NsGreen, t)
        } else {
            (Phase::EwGreen, t - green_duration)
        };
        Self {
            intersection,
            phase,
            remaining: green_duration - into,
            green_duration,
            offset,
        }
    }

    pub fn advance(&self, dt: f64) -> TrafficLight {
        let mut next = *self;
        next.remaining -= dt;
        if next.remaining <= ZERO_EPS {
            next.phase = next.phase.flipped();
            next.remaining = next.green_duration;
        }
        next
    }

    pub fn is_green(&self, axis: Axis) -> bool {
        self.phase.green_axis() == axis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateVerdict {
    Proceed,
    Wait,
}

/// Proceed only on green with more than the threshold left.
pub fn signal_gate(light: &TrafficLight, axis: Axis) -> GateVerdict {
    if light.is_green(axis) && light.remaining > PROCEED_THRESHOLD {
        GateVerdict::Proceed
    } else {
        GateVerdict::Wait
    }
}
