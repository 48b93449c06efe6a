use super::{CityError, CitySpec, Intersection, RoadSegment, CORNER_SIGNS};
use crate::geometry::{Axis, Cardinal, Vec2};
use crate::rng::SimRng;
use rand::seq::SliceRandom;
use rand::Rng;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub roads: Vec<RoadSegment>,
    pub intersections: Vec<Intersection>,
}

type Cell = (i32, i32);

fn step(cell: Cell, dir: Cardinal) -> Cell {
    match dir {
        Cardinal::N => (cell.0, cell.1 + 1),
        Cardinal::E => (cell.0 + 1, cell.1),
        Cardinal::S => (cell.0, cell.1 - 1),
        Cardinal::W => (cell.0 - 1, cell.1),
    }
}

fn left_of(dir: Cardinal) -> Cardinal {
    Cardinal::from_heading(dir.heading() - 90.0)
}

fn right_of(dir: Cardinal) -> Cardinal {
    Cardinal::from_heading(dir.heading() + 90.0)
}

/// Pending growth step, ordered by (depth, random tiebreak, insertion order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    depth: u32,
    tiebreak: u64,
    seq: u64,
    from: Cell,
    dir: Cardinal,
}

struct Growth<'a> {
    spec: &'a CitySpec,
    lattice_n: i32,
    origin: Vec2,
    nodes: Vec<(Cell, Vec2)>,
    node_of: HashMap<Cell, usize>,
    segments: Vec<(usize, usize)>,
    arms: Vec<u8>,
    queue: BinaryHeap<Reverse<Candidate>>,
    seq: u64,
}

impl<'a> Growth<'a> {
    fn position(&self, cell: Cell) -> Vec2 {
        let b = self.spec.roads.block_size;
        Vec2::new(
            self.origin.x + cell.0 as f64 * b,
            self.origin.y + cell.1 as f64 * b,
        )
    }

    fn in_bounds(&self, cell: Cell) -> bool {
        (0..=self.lattice_n).contains(&cell.0) && (0..=self.lattice_n).contains(&cell.1)
    }

    fn add_node(&mut self, cell: Cell) -> usize {
        let id = self.nodes.len();
        self.nodes.push((cell, self.position(cell)));
        self.node_of.insert(cell, id);
        self.arms.push(0);
        id
    }

    fn has_segment(&self, a: usize, b: usize) -> bool {
        self.segments
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    fn add_segment(&mut self, a: usize, b: usize) {
        self.segments.push((a, b));
        self.arms[a] += 1;
        self.arms[b] += 1;
    }

    fn push(&mut self, rng: &mut SimRng, from: Cell, dir: Cardinal, depth: u32) {
        let c = Candidate {
            depth,
            tiebreak: rng.gen(),
            seq: self.seq,
            from,
            dir,
        };
        self.seq += 1;
        self.queue.push(Reverse(c));
    }

    /// Queues continuation of a road end: straight always, each side
    /// branch with the configured probability.
    fn expand(&mut self, rng: &mut SimRng, end: Cell, dir: Cardinal, depth: u32) {
        if depth > self.spec.roads.max_depth {
            return;
        }
        let p = self.spec.roads.branch_probability;
        self.push(rng, end, dir, depth);
        if rng.gen::<f64>() < p {
            self.push(rng, end, left_of(dir), depth);
        }
        if rng.gen::<f64>() < p {
            self.push(rng, end, right_of(dir), depth);
        }
    }

    /// Existing intersection within snap tolerance of `p`, if any.
    fn snap_target(&self, p: Vec2) -> Option<usize> {
        let tol = self.spec.roads.snap_tolerance;
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, (_, q))| q.distance(p) <= tol)
            .min_by(|a, b| a.1 .1.distance(p).total_cmp(&b.1 .1.distance(p)))
            .map(|(i, _)| i)
    }

    /// Rejects a new segment that runs too close to an unrelated
    /// intersection or crosses an existing segment.
    fn passes_intersection_check(&self, from: usize, to_pos: Vec2) -> bool {
        let from_pos = self.nodes[from].1;
        let spacing = self.spec.roads.min_intersection_spacing;
        for (i, (_, q)) in self.nodes.iter().enumerate() {
            if i == from {
                continue;
            }
            if point_segment_distance(*q, from_pos, to_pos) < spacing {
                return false;
            }
        }
        self.segments.iter().all(|&(a, b)| {
            let (pa, pb) = (self.nodes[a].1, self.nodes[b].1);
            let shares = a == from || b == from;
            shares || !segments_cross(from_pos, to_pos, pa, pb)
        })
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// True when two segments intersect anywhere (endpoints included).
pub fn segments_cross(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    }
    fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    }
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

/// Grows an axis-aligned road network on a lattice of `block_size` cells.
///
/// Initial roads radiate from the lattice center with depth 0. Each
/// accepted segment queues its far end for continuation at depth + 1;
/// candidates are expanded lowest depth first. A candidate landing on an
/// existing intersection attaches to it instead of spawning a new one.
pub fn generate_roads(spec: &CitySpec, rng: &mut SimRng) -> Result<RoadNetwork, CityError> {
    spec.validate()?;
    let side = spec.target_area_km2.sqrt() * 1000.0;
    let margin = spec.frontage_offset() + spec.buildings.max_footprint;
    let lattice_n = ((side - 2.0 * margin) / spec.roads.block_size).floor();
    if lattice_n < 1.0 {
        return Err(CityError::SpecInfeasible(format!(
            "a {:.3} km² area cannot hold one {} m block",
            spec.target_area_km2, spec.roads.block_size
        )));
    }
    let lattice_n = lattice_n as i32;
    let half_span = lattice_n as f64 * spec.roads.block_size * 0.5;
    let mut g = Growth {
        spec,
        lattice_n,
        origin: Vec2::new(-half_span, -half_span),
        nodes: Vec::new(),
        node_of: HashMap::new(),
        segments: Vec::new(),
        arms: Vec::new(),
        queue: BinaryHeap::new(),
        seq: 0,
    };

    let center = (lattice_n / 2, lattice_n / 2);
    let root = g.add_node(center);
    let mut dirs = Cardinal::ALL;
    dirs.shuffle(rng);
    let initial = (spec.roads.initial_roads.max(1) as usize).min(4);
    for &dir in &dirs[..initial] {
        let cell = step(center, dir);
        if !g.in_bounds(cell) {
            continue;
        }
        let n = g.add_node(cell);
        g.add_segment(root, n);
        g.expand(rng, cell, dir, 1);
    }

    while let Some(Reverse(c)) = g.queue.pop() {
        let from = g.node_of[&c.from];
        let to_cell = step(c.from, c.dir);
        if !g.in_bounds(to_cell) || g.arms[from] >= 4 {
            continue;
        }
        let to_pos = g.position(to_cell);
        if let Some(existing) = g.snap_target(to_pos) {
            // road-end attachment
            if existing != from && !g.has_segment(from, existing) && g.arms[existing] < 4 {
                g.add_segment(from, existing);
            }
            continue;
        }
        if !g.passes_intersection_check(from, to_pos) {
            continue;
        }
        let to = g.add_node(to_cell);
        g.add_segment(from, to);
        g.expand(rng, to_cell, c.dir, c.depth + 1);
    }

    Ok(assemble(spec, &g))
}

fn assemble(spec: &CitySpec, g: &Growth<'_>) -> RoadNetwork {
    let corner = spec.sidewalk_offset();
    let mut roads = Vec::with_capacity(g.segments.len());
    let mut arms: Vec<Vec<u32>> = vec![Vec::new(); g.nodes.len()];
    for (i, &(a, b)) in g.segments.iter().enumerate() {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (pa, pb) = (g.nodes[lo].1, g.nodes[hi].1);
        let axis = if (pa.x - pb.x).abs() < 1e-9 { Axis::NS } else { Axis::EW };
        roads.push(RoadSegment {
            id: i as u32,
            endpoints: [lo as u32, hi as u32],
            axis,
            centerline: [pa, pb],
            width: spec.roads.road_width,
            sidewalk_offset: corner,
        });
        arms[lo].push(i as u32);
        arms[hi].push(i as u32);
    }
    let mut signal = 0u32;
    let intersections = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, (_, center))| {
            let mut a = arms[i].clone();
            a.sort_unstable();
            let sig = (a.len() >= 3).then(|| {
                signal += 1;
                signal - 1
            });
            Intersection {
                id: i as u32,
                center: *center,
                corners: CORNER_SIGNS
                    .iter()
                    .map(|&(sx, sy)| *center + Vec2::new(sx * corner, sy * corner))
                    .collect(),
                arms: a,
                signal: sig,
            }
        })
        .collect();
    RoadNetwork {
        roads,
        intersections,
    }
}
