use super::WaypointGraph;
use crate::city::CityMap;
use crate::geometry::{angle_diff, Vec2};
use crate::rng::SimRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Anything agents can wander over: nodes with positions and neighbor lists.
pub trait RoutingGraph {
    fn position(&self, node: u32) -> Vec2;
    /// Neighbor ids in ascending order.
    fn neighbor_ids(&self, node: u32) -> Vec<u32>;
}

impl RoutingGraph for WaypointGraph {
    fn position(&self, node: u32) -> Vec2 {
        WaypointGraph::position(self, node)
    }

    fn neighbor_ids(&self, node: u32) -> Vec<u32> {
        self.neighbors(node).iter().map(|(n, _)| *n).collect()
    }
}

/// Intersection-level road graph used by vehicles.
pub struct RoadGraph<'a> {
    pub map: &'a CityMap,
}

impl RoutingGraph for RoadGraph<'_> {
    fn position(&self, node: u32) -> Vec2 {
        self.map.intersection(node).center
    }

    fn neighbor_ids(&self, node: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .map
            .intersection(node)
            .arms
            .iter()
            .map(|r| self.map.road(*r).other_end(node))
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnClass {
    Straight,
    Left,
    Right,
    Reverse,
}

impl TurnClass {
    pub fn classify(incoming_bearing: f64, outgoing_bearing: f64) -> TurnClass {
        let d = angle_diff(incoming_bearing, outgoing_bearing);
        if d.abs() <= 45.0 {
            TurnClass::Straight
        } else if d.abs() >= 135.0 {
            TurnClass::Reverse
        } else if d > 0.0 {
            TurnClass::Right
        } else {
            TurnClass::Left
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteWeights {
    pub straight: f64,
    pub left: f64,
    pub right: f64,
    pub reverse: f64,
}

impl Default for RouteWeights {
    fn default() -> Self {
        Self {
            straight: 0.5,
            left: 0.25,
            right: 0.25,
            reverse: 0.0,
        }
    }
}

impl RouteWeights {
    pub fn get(&self, class: TurnClass) -> f64 {
        match class {
            TurnClass::Straight => self.straight,
            TurnClass::Left => self.left,
            TurnClass::Right => self.right,
            TurnClass::Reverse => self.reverse,
        }
    }
}

/// Picks the next node after arriving at `cur` from `prev`.
fn choose<G: RoutingGraph>(g: &G, prev: Option<u32>, cur: u32, weights: &RouteWeights, rng: &mut SimRng) -> Option<u32> {
    let options = g.neighbor_ids(cur);
    if options.is_empty() {
        return None;
    }
    let Some(prev) = prev else {
        return Some(options[rng.gen_range(0..options.len())]);
    };
    let incoming = g.position(prev).bearing_to(g.position(cur));
    let here = g.position(cur);
    let classes: Vec<TurnClass> = options
        .iter()
        .map(|&n| {
            if n == prev {
                TurnClass::Reverse
            } else {
                TurnClass::classify(incoming, here.bearing_to(g.position(n)))
            }
        })
        .collect();
    // split each class weight evenly over its members
    let class_size = |c: TurnClass| classes.iter().filter(|k| **k == c).count() as f64;
    let mut w: Vec<f64> = classes.iter().map(|c| weights.get(*c) / class_size(*c)).collect();
    if w.iter().sum::<f64>() <= 0.0 {
        // nothing weighted is available: any non-reverse option, else reverse
        let forward: Vec<usize> = (0..options.len()).filter(|&i| classes[i] != TurnClass::Reverse).collect();
        let pool = if forward.is_empty() { (0..options.len()).collect() } else { forward };
        w = vec![0.0; options.len()];
        for i in pool {
            w[i] = 1.0;
        }
    }
    let total: f64 = w.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if *wi <= 0.0 {
            continue;
        }
        if pick < *wi {
            return Some(options[i]);
        }
        pick -= wi;
    }
    w.iter().rposition(|wi| *wi > 0.0).map(|i| options[i])
}

/// Random walk of `hops` steps from `start` with the default weights.
pub fn sample_route<G: RoutingGraph>(g: &G, start: u32, hops: usize, rng: &mut SimRng) -> Vec<u32> {
    sample_route_from(g, None, start, hops, &RouteWeights::default(), rng)
}

/// Random walk that continues a previous heading: `prev` is the node the
/// agent arrived from, if any.
pub fn sample_route_from<G: RoutingGraph>(
    g: &G,
    prev: Option<u32>,
    start: u32,
    hops: usize,
    weights: &RouteWeights,
    rng: &mut SimRng,
) -> Vec<u32> {
    let mut route = vec![start];
    let mut last = prev;
    let mut cur = start;
    for _ in 0..hops {
        match choose(g, last, cur, weights, rng) {
            Some(next) => {
                last = Some(cur);
                cur = next;
                route.push(next);
            }
            None => break,
        }
    }
    route
}
