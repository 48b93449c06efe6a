use super::Aabb;
use serde::{Deserialize, Serialize};

pub const DEFAULT_NODE_CAPACITY: usize = 8;
pub const DEFAULT_MAX_DEPTH: usize = 10;

/// Loose quadtree over axis-aligned boxes.
///
/// An entry lives at the deepest node whose region fully contains its box.
/// Entries that do not fit the root region are kept at the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadTree<T> {
    capacity: usize,
    max_depth: usize,
    nodes: Vec<Node<T>>,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node<T> {
    region: Aabb,
    depth: usize,
    entries: Vec<(T, Aabb)>,
    children: Option<[usize; 4]>,
}

impl<T: Copy> QuadTree<T> {
    pub fn new(region: Aabb) -> Self {
        Self::with_params(region, DEFAULT_NODE_CAPACITY, DEFAULT_MAX_DEPTH)
    }

    pub fn with_params(region: Aabb, capacity: usize, max_depth: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            max_depth,
            nodes: vec![Node {
                region,
                depth: 0,
                entries: Vec::new(),
                children: None,
            }],
            len: 0,
        }
    }

    pub fn region(&self) -> Aabb {
        self.nodes[0].region
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, id: T, bbox: Aabb) {
        self.len += 1;
        let mut idx = 0;
        loop {
            match self.nodes[idx].children {
                Some(children) => {
                    match children
                        .iter()
                        .copied()
                        .find(|&c| self.nodes[c].region.contains_box(&bbox))
                    {
                        Some(c) => idx = c,
                        None => {
                            self.nodes[idx].entries.push((id, bbox));
                            return;
                        }
                    }
                }
                None => {
                    self.nodes[idx].entries.push((id, bbox));
                    if self.nodes[idx].entries.len() > self.capacity
                        && self.nodes[idx].depth < self.max_depth
                    {
                        self.split(idx);
                    }
                    return;
                }
            }
        }
    }

    fn split(&mut self, idx: usize) {
        let depth = self.nodes[idx].depth + 1;
        let quads = self.nodes[idx].region.quadrants();
        let base = self.nodes.len();
        for region in quads {
            self.nodes.push(Node {
                region,
                depth,
                entries: Vec::new(),
                children: None,
            });
        }
        let children = [base, base + 1, base + 2, base + 3];
        self.nodes[idx].children = Some(children);
        let entries = std::mem::take(&mut self.nodes[idx].entries);
        for (id, bbox) in entries {
            match children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].region.contains_box(&bbox))
            {
                Some(c) => self.nodes[c].entries.push((id, bbox)),
                None => self.nodes[idx].entries.push((id, bbox)),
            }
        }
        for c in children {
            if self.nodes[c].entries.len() > self.capacity && depth < self.max_depth {
                self.split(c);
            }
        }
    }

    /// Ids of every entry whose box intersects `window` (closed test).
    pub fn query(&self, window: &Aabb) -> Vec<T> {
        let mut out = Vec::new();
        self.visit(window, |id, _| out.push(id));
        out
    }

    /// Calls `f` for each entry whose box intersects `window`.
    pub fn visit<F: FnMut(T, &Aabb)>(&self, window: &Aabb, mut f: F) {
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            // root may hold entries outside its region, so it is always scanned
            if idx != 0 && !node.region.intersects(window) {
                continue;
            }
            for (id, bbox) in &node.entries {
                if bbox.intersects(window) {
                    f(*id, bbox);
                }
            }
            if let Some(children) = node.children {
                if node.region.intersects(window) {
                    stack.extend(children.iter().rev());
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(T, Aabb)> {
        self.nodes.iter().flat_map(|n| n.entries.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn world() -> Aabb {
        Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(1000.0, 1000.0))
    }

    fn random_box(rng: &mut ChaCha8Rng, max_size: f64) -> Aabb {
        let x = rng.gen_range(0.0..1000.0);
        let y = rng.gen_range(0.0..1000.0);
        let w = rng.gen_range(0.0..max_size);
        let h = rng.gen_range(0.0..max_size);
        Aabb::from_corners(Vec2::new(x, y), Vec2::new(x + w, y + h))
    }

    #[test]
    fn empty_index_returns_nothing() {
        let qt: QuadTree<u32> = QuadTree::new(world());
        assert!(qt.query(&world()).is_empty());
    }

    #[test]
    fn self_window_finds_entry() {
        let mut qt = QuadTree::new(world());
        let b = Aabb::new(Vec2::new(10.0, 10.0), Vec2::new(20.0, 30.0));
        qt.insert(7u32, b);
        assert_eq!(qt.query(&b), vec![7]);
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut qt = QuadTree::new(world());
        let mut all = Vec::new();
        for id in 0..1000u32 {
            let b = random_box(&mut rng, 40.0);
            qt.insert(id, b);
            all.push((id, b));
        }
        assert_eq!(qt.len(), 1000);
        for _ in 0..100 {
            let w = random_box(&mut rng, 200.0);
            let got: BTreeSet<u32> = qt.query(&w).into_iter().collect();
            let want: BTreeSet<u32> = all
                .iter()
                .filter(|(_, b)| b.intersects(&w))
                .map(|(id, _)| *id)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn entries_outside_root_are_still_found() {
        let mut qt = QuadTree::with_params(world(), 1, 4);
        let outside = Aabb::new(Vec2::new(-50.0, -50.0), Vec2::new(-40.0, -40.0));
        qt.insert(1u32, outside);
        for i in 0..20u32 {
            let p = Vec2::new(10.0 * i as f64, 5.0);
            qt.insert(100 + i, Aabb::from_center(p, 1.0, 1.0));
        }
        assert_eq!(qt.query(&outside.expanded(1.0)), vec![1]);
    }

    #[test]
    fn query_order_is_deterministic() {
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut qt = QuadTree::new(world());
            for id in 0..300u32 {
                qt.insert(id, random_box(&mut rng, 30.0));
            }
            qt
        };
        let w = Aabb::new(Vec2::new(100.0, 100.0), Vec2::new(600.0, 500.0));
        assert_eq!(build().query(&w), build().query(&w));
    }

    proptest::proptest! {
        #[test]
        fn query_equals_brute_force(
            boxes in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0, 0.0f64..60.0, 0.0f64..60.0), 0..200),
            win in (0.0f64..1000.0, 0.0f64..1000.0, 0.0f64..300.0, 0.0f64..300.0),
        ) {
            let mut qt = QuadTree::with_params(world(), 4, 6);
            let mut all = Vec::new();
            for (i, (x, y, w, h)) in boxes.iter().enumerate() {
                let b = Aabb::from_corners(Vec2::new(*x, *y), Vec2::new(x + w, y + h));
                qt.insert(i, b);
                all.push(b);
            }
            let w = Aabb::from_corners(Vec2::new(win.0, win.1), Vec2::new(win.0 + win.2, win.1 + win.3));
            let mut got = qt.query(&w);
            got.sort_unstable();
            let want: Vec<usize> = (0..all.len()).filter(|&i| all[i].intersects(&w)).collect();
            proptest::prop_assert_eq!(got, want);
        }
    }
}
