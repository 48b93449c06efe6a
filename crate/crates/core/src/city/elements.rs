use super::{Building, CitySpec, ElementClass, RoadSegment, Side, StreetElement, Zone};
use crate::geometry::{Aabb, QuadTree, Vec2};
use crate::rng::{splitmix64, SimRng};
use rand::{Rng, SeedableRng};

/// Along-road margin kept clear at each end of a segment, so elements stay
/// out of the intersection box.
const END_MARGIN: f64 = 10.0;
const PLACEMENT_ATTEMPTS: usize = 8;

fn band(road: &RoadSegment) -> Option<(f64, f64)> {
    let (s0, s1) = (END_MARGIN, road.length() - END_MARGIN);
    (s1 > s0).then_some((s0, s1))
}

/// Number of elements of one class on one sidewalk band.
pub fn element_count(density_per_100m: f64, band_length: f64) -> usize {
    (density_per_100m * band_length / 100.0).floor().max(0.0) as usize
}

/// Lateral interval (inner, outer) of a class inside its zone band.
fn lateral_extent(class: ElementClass, spec: &CitySpec) -> (f64, f64) {
    let (_, across) = class.size();
    match class.zone() {
        Zone::Sidewalk => {
            let curb = spec.half_road();
            (curb, curb + across)
        }
        Zone::BuildingAdjacent => {
            let mid = spec.corridor_half() + spec.buildings.setback * 0.5;
            (mid - across * 0.5, mid + across * 0.5)
        }
    }
}

fn element_box(road: &RoadSegment, side: Side, class: ElementClass, spec: &CitySpec, along: f64) -> Aabb {
    let (len, _) = class.size();
    let (inner, outer) = lateral_extent(class, spec);
    let s = side.sign();
    Aabb::from_corners(
        road.point_at(along - len * 0.5, inner * s),
        road.point_at(along + len * 0.5, outer * s),
    )
}

/// Widest free strip of the sidewalk band left beside an element, in meters.
pub fn sidewalk_passage(element: &StreetElement, road: &RoadSegment, spec: &CitySpec) -> f64 {
    let n = road.direction().right_normal();
    let origin = road.centerline[0];
    let corners = [
        element.footprint.min,
        element.footprint.max,
        Vec2::new(element.footprint.min.x, element.footprint.max.y),
        Vec2::new(element.footprint.max.x, element.footprint.min.y),
    ];
    let s = element.side.sign();
    let lat: Vec<f64> = corners.iter().map(|p| (*p - origin).dot(n) * s).collect();
    let lo = lat.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (w0, w1) = (spec.half_road(), spec.corridor_half());
    if hi <= w0 || lo >= w1 {
        return w1 - w0;
    }
    (lo - w0).max(0.0).max(w1 - hi.min(w1))
}

/// Scatters street elements over the sidewalk and setback bands.
///
/// Each (road, side, class) triple draws positions from its own stream, so
/// raising one density only appends elements and never moves earlier ones.
pub fn place_street_elements(
    roads: &[RoadSegment],
    buildings: &[Building],
    spec: &CitySpec,
    rng: &mut SimRng,
) -> Vec<StreetElement> {
    let base: u64 = rng.gen();
    let mut out = Vec::new();
    if ElementClass::ALL.iter().all(|c| spec.elements.get(*c) <= 0.0) || roads.is_empty() {
        return out;
    }
    let region = roads
        .iter()
        .map(|r| r.corridor(spec.frontage_offset()))
        .chain(buildings.iter().map(|b| b.footprint))
        .reduce(|a, b| a.union(&b))
        .expect("at least one road");
    let mut index = QuadTree::new(region);
    for b in buildings {
        index.insert(b.id, b.footprint);
    }

    for road in roads {
        let Some((s0, s1)) = band(road) else { continue };
        for side in Side::BOTH {
            for (ci, class) in ElementClass::ALL.into_iter().enumerate() {
                let count = element_count(spec.elements.get(class), s1 - s0);
                if count == 0 {
                    continue;
                }
                let key = splitmix64(base ^ splitmix64(((road.id as u64) << 8) | ((side as u64) << 4) | ci as u64));
                let mut stream = SimRng::seed_from_u64(key);
                let half_len = class.size().0 * 0.5;
                for _ in 0..count {
                    let mut placed = None;
                    for _ in 0..PLACEMENT_ATTEMPTS {
                        let along = stream.gen_range(s0 + half_len..=s1 - half_len);
                        let bbox = element_box(road, side, class, spec, along);
                        if index.query(&bbox).is_empty() {
                            placed = Some(bbox);
                            break;
                        }
                    }
                    if let Some(footprint) = placed {
                        out.push(StreetElement {
                            id: out.len() as u32,
                            class,
                            footprint,
                            zone: class.zone(),
                            road: road.id,
                            side,
                        });
                    }
                }
            }
        }
    }
    out
}
