use super::action::View;
use crate::city::{CityMap, ElementClass, MapEntity};
use crate::geometry::{angle_diff, normalize_heading, ray_aabb, ray_circle, Aabb, Cardinal, Pose, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    pub rays: usize,
    pub fov: f64,
    pub max_range: f64,
    /// Ground sample distance for the downward view.
    pub ground_range: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            rays: 64,
            fov: 90.0,
            max_range: 120.0,
            ground_range: 3.0,
        }
    }
}

impl ScanParams {
    pub fn ray_width(&self) -> f64 {
        self.fov / self.rays as f64
    }

    /// Absolute heading of ray `i` for a body heading.
    pub fn ray_heading(&self, heading: f64, i: usize) -> f64 {
        normalize_heading(heading - self.fov / 2.0 + (i as f64 + 0.5) * self.ray_width())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticClass {
    Building,
    Tree,
    Sidewalk,
    Driveway,
    Vehicle,
    Pedestrian,
    Robot,
    Element,
    Sky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RayLabel {
    pub class: SemanticClass,
    pub id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSighting {
    pub building: u32,
    pub bearing: f64,
    pub range: f64,
}

/// One ray fan. Hint snapshots are stored in this form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub pose: Pose,
    pub view: View,
    pub depth: Vec<f64>,
    pub semantic: Vec<RayLabel>,
    pub landmarks: Vec<LandmarkSighting>,
}

impl Scan {
    pub fn cardinal(&self) -> Cardinal {
        self.pose.cardinal()
    }

    pub fn sees_building(&self, id: u32) -> bool {
        self.landmarks.iter().any(|l| l.building == id)
    }

    pub fn sees(&self, class: SemanticClass, id: u32) -> bool {
        self.semantic.iter().any(|l| l.class == class && l.id == Some(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disc { center: Vec2, radius: f64 },
    Box(Aabb),
}

impl Shape {
    fn ray(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match *self {
            Shape::Disc { center, radius } => ray_circle(origin, dir, center, radius),
            Shape::Box(b) => ray_aabb(origin, dir, &b),
        }
    }

    fn center(&self) -> Vec2 {
        match *self {
            Shape::Disc { center, .. } => center,
            Shape::Box(b) => b.center(),
        }
    }

    fn reach(&self) -> f64 {
        match *self {
            Shape::Disc { radius, .. } => radius,
            Shape::Box(b) => 0.5 * b.width().hypot(b.height()),
        }
    }
}

/// A moving body that rays can hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicBody {
    pub class: SemanticClass,
    pub id: u32,
    pub shape: Shape,
}

pub fn element_class(c: ElementClass) -> SemanticClass {
    match c {
        ElementClass::Tree => SemanticClass::Tree,
        _ => SemanticClass::Element,
    }
}

struct Candidate {
    label: RayLabel,
    shape: Shape,
}

fn static_candidates(map: &CityMap, origin: Vec2, range: f64, buildings_only: bool) -> Vec<Candidate> {
    let window = Aabb::from_center(origin, range, range);
    let mut out = Vec::new();
    map.index.visit(&window, |entity, bbox| {
        let label = match entity {
            MapEntity::Building(id) => RayLabel { class: SemanticClass::Building, id: Some(id) },
            MapEntity::Element(id) if !buildings_only => RayLabel {
                class: element_class(map.elements[id as usize].class),
                id: Some(id),
            },
            _ => return,
        };
        out.push(Candidate { label, shape: Shape::Box(*bbox) });
    });
    // index order depends on tree layout; fix it so ties resolve stably
    out.sort_by_key(|c| (c.label.class, c.label.id));
    out
}

/// Ground class under a point: driveway on carriageways, sidewalk elsewhere.
pub fn ground_class(map: &CityMap, p: Vec2) -> RayLabel {
    let half = map.spec.half_road();
    let window = Aabb::from_center(p, 0.01, 0.01);
    let mut label = RayLabel { class: SemanticClass::Sidewalk, id: None };
    map.index.visit(&window, |entity, _| {
        if let MapEntity::Building(id) = entity {
            if map.buildings[id as usize].footprint.contains_point(p) {
                label = RayLabel { class: SemanticClass::Building, id: Some(id) };
            }
        }
    });
    if label.class == SemanticClass::Building {
        return label;
    }
    for inter in &map.intersections {
        if Aabb::from_center(inter.center, half, half).contains_point(p) {
            return RayLabel { class: SemanticClass::Driveway, id: None };
        }
    }
    for road in &map.roads {
        let carriage = Aabb::from_corners(road.centerline[0], road.centerline[1]).expanded(half);
        if carriage.contains_point(p) {
            return RayLabel { class: SemanticClass::Driveway, id: Some(road.id) };
        }
    }
    label
}

/// Casts the fan from `pose`. `dynamic` lists every moving body the rays
/// may hit; the observer itself must not be in it.
pub fn scan(map: &CityMap, dynamic: &[DynamicBody], pose: Pose, view: View, params: &ScanParams) -> Scan {
    let origin = pose.position;
    let range = match view {
        View::Down => params.ground_range,
        _ => params.max_range,
    };
    let buildings_only = view == View::Up;
    let mut candidates = static_candidates(map, origin, range, buildings_only);
    if !buildings_only {
        for body in dynamic {
            if body.shape.center().distance(origin) - body.shape.reach() <= range {
                candidates.push(Candidate {
                    label: RayLabel { class: body.class, id: Some(body.id) },
                    shape: body.shape,
                });
            }
        }
    }

    let mut depth = Vec::with_capacity(params.rays);
    let mut semantic = Vec::with_capacity(params.rays);
    let mut landmarks: Vec<LandmarkSighting> = Vec::new();
    for i in 0..params.rays {
        let heading = params.ray_heading(pose.heading, i);
        let dir = Vec2::from_heading(heading);
        let mut best: Option<(f64, RayLabel)> = None;
        for c in &candidates {
            if let Some(t) = c.shape.ray(origin, dir) {
                if t <= range && best.map_or(true, |(d, _)| t < d) {
                    best = Some((t, c.label));
                }
            }
        }
        let (d, label) = match (best, view) {
            (Some(hit), _) => hit,
            (None, View::Down) => (range, ground_class(map, origin + dir * range)),
            (None, _) => (range, RayLabel { class: SemanticClass::Sky, id: None }),
        };
        if let (SemanticClass::Building, Some(id)) = (label.class, label.id) {
            match landmarks.iter_mut().find(|l| l.building == id) {
                Some(l) if d < l.range => {
                    l.range = d;
                    l.bearing = heading;
                }
                Some(_) => {}
                None => landmarks.push(LandmarkSighting { building: id, bearing: heading, range: d }),
            }
        }
        depth.push(d);
        semantic.push(label);
    }
    landmarks.sort_by_key(|l| l.building);
    Scan { pose, view, depth, semantic, landmarks }
}

/// Relative bearing of a sighting from the body heading, in (-180, 180].
pub fn relative_bearing(pose: &Pose, absolute: f64) -> f64 {
    angle_diff(pose.heading, absolute)
}
