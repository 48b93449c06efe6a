use super::catalog::{self, AssetEntry};
use super::{Building, CitySpec, Intersection, MapEntity, RoadSegment, Side};
use crate::geometry::{Aabb, Cardinal, QuadTree, Vec2};
use crate::rng::SimRng;
use rand::Rng;

fn sample_range(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

struct Placer<'a> {
    spec: &'a CitySpec,
    assets: Vec<AssetEntry>,
    index: QuadTree<MapEntity>,
    out: Vec<Building>,
}

impl Placer<'_> {
    fn footprint(&self, road: &RoadSegment, side: Side, start: f64, width: f64, depth: f64) -> Aabb {
        let front = self.spec.frontage_offset() * side.sign();
        let back = (self.spec.frontage_offset() + depth) * side.sign();
        Aabb::from_corners(road.point_at(start, front), road.point_at(start + width, back))
    }

    /// Far along-road extent of whatever the box would overlap.
    fn blocked_until(&self, road: &RoadSegment, bbox: &Aabb) -> Option<f64> {
        let mut hit: Option<f64> = None;
        let u = road.direction();
        let origin = road.centerline[0];
        self.index.visit(bbox, |_, other| {
            if other.overlaps(bbox) {
                let far = [other.min, other.max, Vec2::new(other.min.x, other.max.y), Vec2::new(other.max.x, other.min.y)]
                    .iter()
                    .map(|p| (*p - origin).dot(u))
                    .fold(f64::NEG_INFINITY, f64::max);
                hit = Some(hit.map_or(far, |h: f64| h.max(far)));
            }
        });
        hit
    }

    fn place(&mut self, rng: &mut SimRng, road: &RoadSegment, side: Side, start: f64, width: f64, depth: f64) {
        let footprint = self.footprint(road, side, start, width, depth);
        let id = self.out.len() as u32;
        let asset = &self.assets[rng.gen_range(0..self.assets.len())];
        let door = road.point_at(start + width * 0.5, self.spec.sidewalk_offset() * side.sign());
        let facing_vec = road.direction().right_normal() * side.sign();
        self.index.insert(MapEntity::Building(id), footprint);
        self.out.push(Building {
            id,
            asset: asset.tag.clone(),
            footprint,
            door,
            facing_road: road.id,
            side,
            facing: Cardinal::from_heading(Vec2::ZERO.bearing_to(facing_vec)),
            attributes: asset.attributes.clone(),
        });
    }

    fn fill_side(&mut self, rng: &mut SimRng, road: &RoadSegment, side: Side) {
        let b = &self.spec.buildings;
        let (min_fp, max_fp, max_gap) = (b.min_footprint, b.max_footprint, b.max_gap);
        let fill_threshold = b.fill_gap_threshold.max(min_fp);
        let setback_line = self.spec.frontage_offset();
        let s0 = setback_line;
        let s1 = road.length() - setback_line;
        if s1 - s0 < min_fp {
            return;
        }

        // collision-aware sampling along the frontage
        let mut cursor = s0;
        loop {
            let gap = sample_range(rng, 0.0, max_gap);
            let width = sample_range(rng, min_fp, max_fp);
            let start = cursor + gap;
            if start + width > s1 {
                break;
            }
            let depth = sample_range(rng, min_fp, max_fp);
            let bbox = self.footprint(road, side, start, width, depth);
            match self.blocked_until(road, &bbox) {
                Some(until) => cursor = until.max(start + 1.0),
                None => {
                    self.place(rng, road, side, start, width, depth);
                    cursor = start + width;
                }
            }
        }

        // greedy fill of what is left near the segment end
        while s1 - cursor >= fill_threshold {
            let width = (s1 - cursor).min(max_fp);
            let depth = sample_range(rng, min_fp, max_fp);
            let bbox = self.footprint(road, side, cursor, width, depth);
            match self.blocked_until(road, &bbox) {
                Some(until) => cursor = until.max(cursor + 1.0),
                None => {
                    self.place(rng, road, side, cursor, width, depth);
                    cursor += width;
                }
            }
        }
    }
}

/// Places buildings along both sides of every road segment.
///
/// Footprints are front-aligned to the setback line. Candidates that would
/// overlap a road corridor or an earlier building are rejected through a
/// quadtree query. Leftover frontage at the far end of each side is then
/// filled greedily with the widest footprint that fits.
pub fn place_buildings(
    roads: &[RoadSegment],
    intersections: &[Intersection],
    spec: &CitySpec,
    rng: &mut SimRng,
) -> Vec<Building> {
    let half = spec.corridor_half();
    let reach = spec.frontage_offset() + spec.buildings.max_footprint + 1.0;
    let region = roads
        .iter()
        .map(|r| r.corridor(reach))
        .chain(intersections.iter().map(|i| Aabb::from_center(i.center, reach, reach)))
        .reduce(|a, b| a.union(&b))
        .unwrap_or(Aabb::new(Vec2::ZERO, Vec2::ZERO));
    let mut index = QuadTree::new(region);
    for r in roads {
        index.insert(MapEntity::Road(r.id), r.corridor(half));
    }
    let mut placer = Placer {
        spec,
        assets: catalog::assets(spec.catalog),
        index,
        out: Vec::new(),
    };
    for road in roads {
        for side in Side::BOTH {
            placer.fill_side(rng, road, side);
        }
    }
    placer.out
}
