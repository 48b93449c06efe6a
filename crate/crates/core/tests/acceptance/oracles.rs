//! Reference computations written against raw map and graph data, without
//! going through the library routines they check.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use streetsim::city::CityMap;
use streetsim::geometry::Aabb;
use streetsim::waypoint::WaypointGraph;

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Plain Dijkstra over the edge list. Costs are returned as exact sums in
/// f64 order of relaxation; callers use integer lengths when they need
/// bit-exact comparisons.
pub fn dijkstra(g: &WaypointGraph, start: u32) -> Vec<f64> {
    let n = g.nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.a as usize].push((e.b as usize, e.length));
        adj[e.b as usize].push((e.a as usize, e.length));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[start as usize] = 0.0;
    // f64 bits order like the values for non-negative finite numbers
    heap.push(Reverse((0f64.to_bits(), start as usize)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    dist
}

/// Wilson score bounds as the two roots of
/// (1 + z²/n) p² - (2p̂ + z²/n) p + p̂² = 0.
pub fn wilson_roots(s: u32, n: u32, z: f64) -> (f64, f64) {
    let (s, n) = (s as f64, n as f64);
    let ph = s / n;
    let a = 1.0 + z * z / n;
    let b = -(2.0 * ph + z * z / n);
    let c = ph * ph;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    let lo = (-b - disc) / (2.0 * a);
    let hi = (-b + disc) / (2.0 * a);
    (lo.max(0.0), hi.min(1.0))
}

/// Boxes sharing more than a sliver of area.
pub fn overlap(a: &Aabb, b: &Aabb) -> bool {
    const EPS: f64 = 1e-9;
    let w = a.max.x.min(b.max.x) - a.min.x.max(b.min.x);
    let h = a.max.y.min(b.max.y) - a.min.y.max(b.min.y);
    w > EPS && h > EPS
}

/// Corridor of a road (carriageway plus both sidewalks), from the raw
/// centerline endpoints.
pub fn corridor(map: &CityMap, road: usize) -> Aabb {
    let r = &map.roads[road];
    let half = map.spec.roads.road_width / 2.0 + map.spec.roads.sidewalk_width;
    let [p, q] = r.centerline;
    Aabb {
        min: streetsim::geometry::Vec2::new(p.x.min(q.x) - half, p.y.min(q.y) - half),
        max: streetsim::geometry::Vec2::new(p.x.max(q.x) + half, p.y.max(q.y) + half),
    }
}

/// Number of nodes reached from node 0 by breadth-first search.
pub fn reachable(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    if n == 0 {
        return 0;
    }
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count
}

/// Area of the box around every road corridor and building, in km².
pub fn content_area_km2(map: &CityMap) -> f64 {
    let boxes = (0..map.roads.len()).map(|i| corridor(map, i)).chain(map.buildings.iter().map(|b| b.footprint));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for b in boxes {
        x0 = x0.min(b.min.x);
        y0 = y0.min(b.min.y);
        x1 = x1.max(b.max.x);
        y1 = y1.max(b.max.y);
    }
    (x1 - x0) * (y1 - y0) / 1e6
}
