use super::{Aabb, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit<C, I> {
    pub distance: f64,
    pub class: C,
    pub id: I,
}

/// Entry distance of a ray into a box, or `None` on a miss.
///
/// `dir` must be a unit vector. A ray starting inside the box hits at 0.
pub fn ray_aabb(origin: Vec2, dir: Vec2, bbox: &Aabb) -> Option<f64> {
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for (o, d, lo, hi) in [
        (origin.x, dir.x, bbox.min.x, bbox.max.x),
        (origin.y, dir.y, bbox.min.y, bbox.max.y),
    ] {
        if d.abs() < 1e-12 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (a, b) = ((lo - o) * inv, (hi - o) * inv);
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            t_min = t_min.max(a);
            t_max = t_max.min(b);
            if t_min > t_max {
                return None;
            }
        }
    }
    if t_max < 0.0 {
        return None;
    }
    Some(t_min.max(0.0))
}

/// Entry distance of a ray into a disc.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

/// Nearest entity hit by a ray within `max_range`.
///
/// Ties on distance go to the entity listed first.
pub fn raycast<C: Copy, I: Copy>(
    entities: &[(I, C, Aabb)],
    origin: Vec2,
    heading_deg: f64,
    max_range: f64,
) -> Option<RayHit<C, I>> {
    let dir = Vec2::from_heading(heading_deg);
    let mut best: Option<RayHit<C, I>> = None;
    for &(id, class, bbox) in entities {
        if let Some(t) = ray_aabb(origin, dir, &bbox) {
            if t <= max_range && best.map_or(true, |b| t < b.distance) {
                best = Some(RayHit {
                    distance: t,
                    class,
                    id,
                });
            }
        }
    }
    best
}

/// Distance a disc can travel along `dir` before touching `bbox`.
///
/// Exact swept test against the box's Minkowski sum with the disc (box
/// grown along each axis plus rounded corners). Returns `Some(0.0)` when
/// the disc already touches the box and is not moving away from it.
pub fn sweep_disc_aabb(origin: Vec2, dir: Vec2, radius: f64, bbox: &Aabb) -> Option<f64> {
    const EPS: f64 = 1e-9;
    let closest = bbox.closest_point(origin);
    let gap = closest.distance(origin);
    if gap <= radius + EPS {
        // in contact: blocked only if moving towards the box
        let away = if gap > 0.0 {
            origin - closest
        } else {
            // center inside the box: push out through the nearest face
            let c = bbox.center();
            let dx = (origin.x - c.x) / bbox.width().max(EPS);
            let dy = (origin.y - c.y) / bbox.height().max(EPS);
            if dx.abs() >= dy.abs() {
                Vec2::new(dx.signum(), 0.0)
            } else {
                Vec2::new(0.0, dy.signum())
            }
        };
        return (dir.dot(away) <= 0.0).then_some(0.0);
    }
    let grown_x = Aabb::new(
        Vec2::new(bbox.min.x - radius, bbox.min.y),
        Vec2::new(bbox.max.x + radius, bbox.max.y),
    );
    let grown_y = Aabb::new(
        Vec2::new(bbox.min.x, bbox.min.y - radius),
        Vec2::new(bbox.max.x, bbox.max.y + radius),
    );
    let corners = [
        bbox.min,
        bbox.max,
        Vec2::new(bbox.min.x, bbox.max.y),
        Vec2::new(bbox.max.x, bbox.min.y),
    ];
    let mut best: Option<f64> = None;
    let mut take = |t: Option<f64>| {
        if let Some(t) = t {
            if best.map_or(true, |b| t < b) {
                best = Some(t);
            }
        }
    };
    take(ray_aabb(origin, dir, &grown_x));
    take(ray_aabb(origin, dir, &grown_y));
    for c in corners {
        take(ray_circle(origin, dir, c, radius));
    }
    best
}
