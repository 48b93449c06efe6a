use super::{Path, PathError, WaypointGraph};
use crate::geometry::Cardinal;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

const NO_HEADING: usize = 4;

fn heading_index(c: Cardinal) -> usize {
    Cardinal::ALL.iter().position(|k| *k == c).unwrap()
}

fn edge_heading(g: &WaypointGraph, a: u32, b: u32) -> Cardinal {
    Cardinal::from_heading(g.position(a).bearing_to(g.position(b)))
}

/// Among all shortest paths (lengths compared in whole millimeters), the
/// one with the fewest heading changes. The initial heading is free.
pub fn plan_fewest_turns(g: &WaypointGraph, start: u32, goal: u32) -> Result<Path, PathError> {
    let n = g.len();
    for id in [start, goal] {
        if id as usize >= n {
            return Err(PathError::UnknownNode(id));
        }
    }
    let state = |node: u32, h: usize| node as usize * 5 + h;
    let mut best: Vec<(u64, u32)> = vec![(u64::MAX, u32::MAX); n * 5];
    let mut back: Vec<usize> = vec![usize::MAX; n * 5];
    let mut heap = BinaryHeap::new();
    best[state(start, NO_HEADING)] = (0, 0);
    heap.push(Reverse((0u64, 0u32, start, NO_HEADING)));
    while let Some(Reverse((len, turns, node, h))) = heap.pop() {
        let s = state(node, h);
        if (len, turns) > best[s] {
            continue;
        }
        if node == goal {
            let mut nodes = vec![node];
            let mut cur = s;
            while back[cur] != usize::MAX {
                cur = back[cur];
                nodes.push((cur / 5) as u32);
            }
            nodes.reverse();
            let cost = nodes.windows(2).map(|w| g.edge_between(w[0], w[1]).unwrap().length).sum();
            return Ok(Path { nodes, cost });
        }
        for &(next, e) in g.neighbors(node) {
            let nh = heading_index(edge_heading(g, node, next));
            let nl = len + (g.edges[e as usize].length * 1000.0).round() as u64;
            let nt = turns + u32::from(h != NO_HEADING && h != nh);
            let ns = state(next, nh);
            if (nl, nt) < best[ns] {
                best[ns] = (nl, nt);
                back[ns] = s;
                heap.push(Reverse((nl, nt, next, nh)));
            }
        }
    }
    Err(PathError::NoPath(start, goal))
}

/// A maximal straight stretch of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub heading: Cardinal,
    /// Index into the path of the run's first node.
    pub from: usize,
    /// Index into the path of the run's last node.
    pub to: usize,
    pub length: f64,
}

/// Splits a node path into straight runs.
pub fn runs(g: &WaypointGraph, nodes: &[u32]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, w) in nodes.windows(2).enumerate() {
        let heading = edge_heading(g, w[0], w[1]);
        let len = g.position(w[0]).distance(g.position(w[1]));
        match out.last_mut() {
            Some(run) if run.heading == heading => {
                run.to = i + 1;
                run.length += len;
            }
            _ => out.push(Run {
                heading,
                from: i,
                to: i + 1,
                length: len,
            }),
        }
    }
    out
}
