use super::WaypointGraph;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<u32>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("no path from {0} to {1}")]
    NoPath(u32, u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: u32,
}

impl Eq for Open {}

impl Ord for Open {
    // min-heap on (f, node id)
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path by summed edge length, guided by the Manhattan distance
/// to the goal. Frontier ties are broken by the smaller node id.
pub fn astar_path(g: &WaypointGraph, start: u32, goal: u32) -> Result<Path, PathError> {
    let n = g.len();
    for id in [start, goal] {
        if id as usize >= n {
            return Err(PathError::UnknownNode(id));
        }
    }
    let target = g.position(goal);
    let h = |id: u32| g.position(id).manhattan(target);
    let mut best = vec![f64::INFINITY; n];
    let mut came_from = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    best[start as usize] = 0.0;
    open.push(Open { f: h(start), g: 0.0, node: start });
    while let Some(Open { g: cost, node, .. }) = open.pop() {
        if closed[node as usize] || cost > best[node as usize] {
            continue;
        }
        if node == goal {
            let mut nodes = vec![goal];
            let mut cur = goal;
            while cur != start {
                cur = came_from[cur as usize];
                nodes.push(cur);
            }
            nodes.reverse();
            return Ok(Path { nodes, cost });
        }
        closed[node as usize] = true;
        for &(next, e) in g.neighbors(node) {
            if closed[next as usize] {
                continue;
            }
            let tentative = cost + g.edges[e as usize].length;
            let slot = &mut best[next as usize];
            if tentative < *slot || (tentative == *slot && node < came_from[next as usize]) {
                *slot = tentative;
                came_from[next as usize] = node;
                open.push(Open {
                    f: tentative + h(next),
                    g: tentative,
                    node: next,
                });
            }
        }
    }
    Err(PathError::NoPath(start, goal))
}

/// Single-source shortest distances to every node (plain Dijkstra).
pub fn dijkstra_costs(g: &WaypointGraph, start: u32) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    dist[start as usize] = 0.0;
    heap.push(Open { f: 0.0, g: 0.0, node: start });
    while let Some(Open { g: d, node, .. }) = heap.pop() {
        if d > dist[node as usize] {
            continue;
        }
        for &(next, e) in g.neighbors(node) {
            let nd = d + g.edges[e as usize].length;
            if nd < dist[next as usize] {
                dist[next as usize] = nd;
                heap.push(Open { f: nd, g: nd, node: next });
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::super::{Edge, EdgeKind, Waypoint, WaypointKind};
    use super::*;
    use crate::city::Side;
    use crate::geometry::Vec2;

    fn graph(points: &[(f64, f64)], links: &[(u32, u32)]) -> WaypointGraph {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Waypoint {
                id: i as u32,
                kind: WaypointKind::Road,
                position: Vec2::new(x, y),
                parent: 0,
                corner: None,
                side: None,
            })
            .collect::<Vec<_>>();
        let edges = links
            .iter()
            .map(|&(a, b)| Edge {
                a,
                b,
                length: nodes[a as usize].position.distance(nodes[b as usize].position),
                kind: EdgeKind::Chain { road: 0, side: Side::Right },
            })
            .collect();
        WaypointGraph::from_parts(nodes, edges)
    }

    #[test]
    fn start_equals_goal() {
        let g = graph(&[(0.0, 0.0), (1.0, 0.0)], &[(0, 1)]);
        let p = astar_path(&g, 1, 1).unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn square_with_detour() {
        // 0-1 direct is missing, so the path goes around three sides
        let g = graph(
            &[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)],
            &[(0, 3), (3, 2), (2, 1)],
        );
        let p = astar_path(&g, 0, 1).unwrap();
        assert_eq!(p.nodes, vec![0, 3, 2, 1]);
        assert_eq!(p.cost, dijkstra_costs(&g, 0)[1]);
    }

    #[test]
    fn unreachable_goal() {
        let g = graph(&[(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)], &[(0, 1)]);
        assert_eq!(astar_path(&g, 0, 2), Err(PathError::NoPath(0, 2)));
    }

    #[test]
    fn ties_prefer_lower_ids() {
        // two equal routes 0-1-3 and 0-2-3
        let g = graph(
            &[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)],
            &[(0, 1), (1, 3), (0, 2), (2, 3)],
        );
        assert_eq!(astar_path(&g, 0, 3).unwrap().nodes, vec![0, 1, 3]);
        assert_eq!(astar_path(&g, 0, 3).unwrap().nodes, astar_path(&g, 0, 3).unwrap().nodes);
    }
}
