//! City-wide waypoint graph: sidewalk chains along every road side joined
//! by corner waypoints at each intersection.

mod astar;
mod planner;
mod routing;

pub use astar::{astar_path, dijkstra_costs, Path, PathError};
pub use planner::{plan_fewest_turns, runs, Run};
pub use routing::{sample_route, sample_route_from, RoadGraph, RouteWeights, RoutingGraph, TurnClass};

use crate::city::{CityMap, Side, CORNER_SIGNS};
use crate::geometry::{Axis, Vec2};
use serde::{Deserialize, Serialize};

/// Spacing of road waypoints along a sidewalk chain.
pub const WAYPOINT_SPACING: f64 = 17.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointKind {
    Road,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: u32,
    pub kind: WaypointKind,
    pub position: Vec2,
    /// Road id for road waypoints, intersection id for corner waypoints.
    pub parent: u32,
    pub corner: Option<u8>,
    pub side: Option<Side>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeKind {
    Chain { road: u32, side: Side },
    /// Crossing of one arm at an intersection; `axis` is the walking axis.
    Crosswalk { intersection: u32, road: u32, axis: Axis },
    /// Sidewalk turning around a corner where no arm exists.
    Wrap { intersection: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub length: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointGraph {
    pub nodes: Vec<Waypoint>,
    pub edges: Vec<Edge>,
    /// Per node: (neighbor, edge index), sorted by neighbor id.
    pub adjacency: Vec<Vec<(u32, u32)>>,
    /// Corner waypoint ids per intersection, in NE, SE, SW, NW order.
    pub corners: Vec<[u32; 4]>,
    /// Chain node ids per road, `[right, left]`, from the lower-id end.
    pub chains: Vec<[Vec<u32>; 2]>,
}

/// Offsets of interior waypoints on a chain of the given length.
pub fn chain_offsets(length: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1.0;
    while k * WAYPOINT_SPACING < length - 1e-9 {
        out.push(k * WAYPOINT_SPACING);
        k += 1.0;
    }
    out
}

fn corner_index(offset: Vec2) -> u8 {
    let sx = if offset.x >= 0.0 { 1.0 } else { -1.0 };
    let sy = if offset.y >= 0.0 { 1.0 } else { -1.0 };
    CORNER_SIGNS.iter().position(|&(cx, cy)| cx == sx && cy == sy).unwrap() as u8
}

/// Cardinal step from corner `i` to corner `(i + 1) % 4`, and the arm
/// direction whose crossing joins them.
const CORNER_LINKS: [(usize, usize, (f64, f64)); 4] = [
    (0, 1, (1.0, 0.0)),  // NE-SE across the east arm
    (1, 2, (0.0, -1.0)), // SE-SW across the south arm
    (2, 3, (-1.0, 0.0)), // SW-NW across the west arm
    (3, 0, (0.0, 1.0)),  // NW-NE across the north arm
];

impl WaypointGraph {
    /// Builds a graph from raw parts; adjacency is derived. Used for maps
    /// and for synthetic graphs in tests.
    pub fn from_parts(nodes: Vec<Waypoint>, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.a as usize].push((e.b, i as u32));
            adjacency[e.b as usize].push((e.a, i as u32));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self {
            nodes,
            edges,
            adjacency,
            corners: Vec::new(),
            chains: Vec::new(),
        }
    }

    pub fn build(map: &CityMap) -> Self {
        let offset = map.spec.sidewalk_offset();
        let mut nodes: Vec<Waypoint> = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut corners = Vec::with_capacity(map.intersections.len());
        for inter in &map.intersections {
            let mut ids = [0u32; 4];
            for (k, (sx, sy)) in CORNER_SIGNS.iter().enumerate() {
                ids[k] = nodes.len() as u32;
                nodes.push(Waypoint {
                    id: ids[k],
                    kind: WaypointKind::Intersection,
                    position: inter.center + Vec2::new(sx * offset, sy * offset),
                    parent: inter.id,
                    corner: Some(k as u8),
                    side: None,
                });
            }
            corners.push(ids);
        }

        let push_edge = |nodes: &Vec<Waypoint>, edges: &mut Vec<Edge>, a: u32, b: u32, kind| {
            let length = nodes[a as usize].position.distance(nodes[b as usize].position);
            edges.push(Edge { a, b, length, kind });
        };

        let mut chains = Vec::with_capacity(map.roads.len());
        for road in &map.roads {
            let u = road.direction();
            let n = u.right_normal();
            let [lo, hi] = road.endpoints;
            let mut per_side: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
            for (si, side) in Side::BOTH.into_iter().enumerate() {
                let lateral = n * (offset * side.sign());
                let start = corners[lo as usize][corner_index(u * offset + lateral) as usize];
                let end = corners[hi as usize][corner_index(-u * offset + lateral) as usize];
                let origin = nodes[start as usize].position;
                let length = origin.distance(nodes[end as usize].position);
                let mut chain = vec![start];
                for s in chain_offsets(length) {
                    let id = nodes.len() as u32;
                    nodes.push(Waypoint {
                        id,
                        kind: WaypointKind::Road,
                        position: origin + u * s,
                        parent: road.id,
                        corner: None,
                        side: Some(side),
                    });
                    chain.push(id);
                }
                chain.push(end);
                for w in chain.windows(2) {
                    push_edge(&nodes, &mut edges, w[0], w[1], EdgeKind::Chain { road: road.id, side });
                }
                per_side[si] = chain;
            }
            chains.push(per_side);
        }

        for inter in &map.intersections {
            let ids = corners[inter.id as usize];
            for (i, j, (dx, dy)) in CORNER_LINKS {
                let arm_dir = Vec2::new(dx, dy);
                let arm = inter.arms.iter().copied().find(|&r| {
                    let other = map.intersection(map.road(r).other_end(inter.id)).center;
                    (other - inter.center).normalized().dot(arm_dir) > 0.5
                });
                let kind = match arm {
                    Some(road) => EdgeKind::Crosswalk {
                        intersection: inter.id,
                        road,
                        axis: if dx != 0.0 { Axis::NS } else { Axis::EW },
                    },
                    None => EdgeKind::Wrap { intersection: inter.id },
                };
                push_edge(&nodes, &mut edges, ids[i], ids[j], kind);
            }
        }

        let mut g = WaypointGraph::from_parts(nodes, edges);
        g.corners = corners;
        g.chains = chains;
        g
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, id: u32) -> Vec2 {
        self.nodes[id as usize].position
    }

    pub fn neighbors(&self, id: u32) -> &[(u32, u32)] {
        &self.adjacency[id as usize]
    }

    /// Edge joining two nodes, if any.
    pub fn edge_between(&self, a: u32, b: u32) -> Option<&Edge> {
        self.adjacency[a as usize]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, e)| &self.edges[*e as usize])
    }

    /// Nearest node to a point by Euclidean distance; ties go to the lower id.
    pub fn nearest(&self, p: Vec2) -> Option<u32> {
        self.nodes
            .iter()
            .map(|n| (n.position.distance(p), n.id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    /// Nearest node restricted to one road side chain.
    pub fn nearest_on_chain(&self, road: u32, side: Side, p: Vec2) -> u32 {
        let chain = &self.chains[road as usize][if side == Side::Right { 0 } else { 1 }];
        *chain
            .iter()
            .min_by(|a, b| self.position(**a).distance(p).total_cmp(&self.position(**b).distance(p)))
            .expect("chains are never empty")
    }

    pub fn chain(&self, road: u32, side: Side) -> &[u32] {
        &self.chains[road as usize][if side == Side::Right { 0 } else { 1 }]
    }

    /// Number of connected components, by union-find over the edges.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.a as usize), find(&mut parent, e.b as usize));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        (0..self.nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }
}
