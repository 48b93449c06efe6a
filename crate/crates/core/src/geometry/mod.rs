//! Planar geometry shared by every other module.
//!
//! World coordinates are meters with `x` pointing east and `y` pointing north.
//! Headings use the compass convention: 0° is north and angles grow clockwise.

mod quadtree;
mod ray;

pub use quadtree::QuadTree;
pub use ray::{raycast, ray_aabb, ray_circle, sweep_disc_aabb, RayHit};

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along a compass heading.
    pub fn from_heading(heading_deg: f64) -> Self {
        let rad = heading_deg.to_radians();
        Self::new(rad.sin(), rad.cos())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    pub fn manhattan(self, other: Vec2) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn normalized(self) -> Vec2 {
        let len = self.length();
        if len == 0.0 {
            Vec2::ZERO
        } else {
            Vec2::new(self.x / len, self.y / len)
        }
    }

    /// Compass bearing from `self` towards `target`, in `[0, 360)`.
    pub fn bearing_to(self, target: Vec2) -> f64 {
        let d = target - self;
        normalize_heading(d.x.atan2(d.y).to_degrees())
    }

    /// Vector rotated 90° clockwise (to the right of a heading).
    pub fn right_normal(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps any angle in degrees into `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Signed smallest rotation from `from` to `to`, in `(-180, 180]`.
pub fn angle_diff(from: f64, to: f64) -> f64 {
    let d = normalize_heading(to - from);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinal {
    N,
    E,
    S,
    W,
}

impl Cardinal {
    pub const ALL: [Cardinal; 4] = [Cardinal::N, Cardinal::E, Cardinal::S, Cardinal::W];

    /// Nearest cardinal direction to a heading.
    pub fn from_heading(heading_deg: f64) -> Self {
        let idx = (normalize_heading(heading_deg) / 90.0).round() as usize % 4;
        Self::ALL[idx]
    }

    pub fn heading(self) -> f64 {
        match self {
            Cardinal::N => 0.0,
            Cardinal::E => 90.0,
            Cardinal::S => 180.0,
            Cardinal::W => 270.0,
        }
    }

    pub fn unit(self) -> Vec2 {
        match self {
            Cardinal::N => Vec2::new(0.0, 1.0),
            Cardinal::E => Vec2::new(1.0, 0.0),
            Cardinal::S => Vec2::new(0.0, -1.0),
            Cardinal::W => Vec2::new(-1.0, 0.0),
        }
    }

    pub fn opposite(self) -> Self {
        Cardinal::from_heading(self.heading() + 180.0)
    }

    pub fn axis(self) -> Axis {
        match self {
            Cardinal::N | Cardinal::S => Axis::NS,
            Cardinal::E | Cardinal::W => Axis::EW,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cardinal::N => "north",
            Cardinal::E => "east",
            Cardinal::S => "south",
            Cardinal::W => "west",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    NS,
    EW,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::NS => Axis::EW,
            Axis::EW => Axis::NS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Left,
    Right,
}

/// Rotates a heading by a quarter turn: left is -90°, right is +90°.
pub fn turn_heading(heading_deg: f64, turn: Turn) -> f64 {
    match turn {
        Turn::Left => normalize_heading(heading_deg - 90.0),
        Turn::Right => normalize_heading(heading_deg + 90.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_heading(heading),
        }
    }

    pub fn cardinal(&self) -> Cardinal {
        Cardinal::from_heading(self.heading)
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_heading(self.heading)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y, "inverted aabb");
        Self { min, max }
    }

    /// Box from two arbitrary corners.
    pub fn from_corners(a: Vec2, b: Vec2) -> Self {
        Self {
            min: Vec2::new(a.x.min(b.x), a.y.min(b.y)),
            max: Vec2::new(a.x.max(b.x), a.y.max(b.y)),
        }
    }

    pub fn from_center(center: Vec2, half_w: f64, half_h: f64) -> Self {
        Self::new(
            Vec2::new(center.x - half_w, center.y - half_h),
            Vec2::new(center.x + half_w, center.y + half_h),
        )
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x <= self.max.x && self.min.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new((self.min.x + self.max.x) * 0.5, (self.min.y + self.max.y) * 0.5)
    }

    /// Closed intersection test: touching boxes intersect.
    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    /// Open intersection test: boxes sharing only an edge do not overlap.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && other.max.x <= self.max.x
            && other.max.y <= self.max.y
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Vec2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x - margin, self.min.y - margin),
            max: Vec2::new(self.max.x + margin, self.max.y + margin),
        }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    pub fn quadrants(&self) -> [Aabb; 4] {
        let c = self.center();
        [
            Aabb::new(Vec2::new(c.x, c.y), self.max),
            Aabb::new(Vec2::new(c.x, self.min.y), Vec2::new(self.max.x, c.y)),
            Aabb::new(self.min, c),
            Aabb::new(Vec2::new(self.min.x, c.y), Vec2::new(c.x, self.max.y)),
        ]
    }
}

/// True when the disc overlaps the box (touching counts within `eps`).
pub fn disc_touches_aabb(center: Vec2, radius: f64, aabb: &Aabb, eps: f64) -> bool {
    aabb.distance_to(center) <= radius + eps
}
