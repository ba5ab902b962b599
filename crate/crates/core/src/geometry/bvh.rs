//! Binned-SAH bounding volume hierarchy over world-space primitives.

use crate::math::{Aabb, Vec3};

use super::primitive::Primitive;
use super::GeometryError;

const BIN_COUNT: usize = 16;
const MAX_LEAF: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the left child (right is `first + 1`).
    first: u32,
    /// Zero for interior nodes.
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Primitive indices, permuted so every leaf covers a contiguous run.
    order: Vec<u32>,
}

/// Nearest hit as `(t, primitive index)`.
pub type RawHit = (f64, u32);

/// Strict total order used by every intersection routine: smaller `t`, then lower index.
#[inline]
pub fn closer(t: f64, idx: u32, best: Option<RawHit>) -> bool {
    match best {
        None => true,
        Some((bt, bi)) => t < bt || (t == bt && idx < bi),
    }
}

struct Item {
    bounds: Aabb,
    centroid: Vec3,
    index: u32,
}

impl Bvh {
    pub fn build(primitives: &[Primitive]) -> Result<Bvh, GeometryError> {
        if primitives.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        let mut items: Vec<Item> = primitives
            .iter()
            .enumerate()
            .map(|(i, p)| Item { bounds: p.bounds(), centroid: p.centroid(), index: i as u32 })
            .collect();
        let mut nodes = Vec::with_capacity(2 * primitives.len() / MAX_LEAF + 1);
        nodes.push(Node { bounds: Aabb::EMPTY, first: 0, count: 0 });
        let len = items.len();
        build_node(&mut nodes, 0, &mut items, 0, len);
        Ok(Bvh { order: items.iter().map(|it| it.index).collect(), nodes })
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn intersect(
        &self,
        primitives: &[Primitive],
        origin: Vec3,
        dir: Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<RawHit> {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RawHit> = None;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut node_idx = 0u32;
        if self.nodes[0].bounds.hit(origin, inv, t_min, t_max).is_none() {
            return None;
        }
        loop {
            let node = &self.nodes[node_idx as usize];
            if node.count > 0 {
                let start = node.first as usize;
                for &pi in &self.order[start..start + node.count as usize] {
                    if let Some(t) = primitives[pi as usize].intersect(origin, dir, t_min, t_max) {
                        if closer(t, pi, best) {
                            best = Some((t, pi));
                        }
                    }
                }
            } else {
                let limit = best.map_or(t_max, |b| b.0);
                let l = node.first;
                let r = node.first + 1;
                let hl = self.nodes[l as usize].bounds.hit(origin, inv, t_min, limit);
                let hr = self.nodes[r as usize].bounds.hit(origin, inv, t_min, limit);
                match (hl, hr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (l, r) } else { (r, l) };
                        stack[sp] = far;
                        sp += 1;
                        node_idx = near;
                        continue;
                    }
                    (Some(_), None) => {
                        node_idx = l;
                        continue;
                    }
                    (None, Some(_)) => {
                        node_idx = r;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            if sp == 0 {
                break;
            }
            sp -= 1;
            node_idx = stack[sp];
        }
        best
    }
}

/// Brute-force reference used by tests and the equivalence checks.
pub fn intersect_brute(primitives: &[Primitive], origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<RawHit> {
    let mut best = None;
    for (i, p) in primitives.iter().enumerate() {
        if let Some(t) = p.intersect(origin, dir, t_min, t_max) {
            if closer(t, i as u32, best) {
                best = Some((t, i as u32));
            }
        }
    }
    best
}

fn build_node(nodes: &mut Vec<Node>, node_idx: usize, items: &mut [Item], start: usize, end: usize) {
    let slice = &mut items[start..end];
    let bounds = slice.iter().fold(Aabb::EMPTY, |b, it| b.union(&it.bounds));
    let count = slice.len();
    let make_leaf = |nodes: &mut Vec<Node>| {
        nodes[node_idx] = Node { bounds, first: start as u32, count: count as u32 };
    };
    if count <= MAX_LEAF {
        make_leaf(nodes);
        return;
    }
    let cbounds = slice.iter().fold(Aabb::EMPTY, |mut b, it| {
        b.grow(it.centroid);
        b
    });
    let ext = cbounds.extent();

    let mut best: Option<(f64, usize, usize)> = None; // (cost, axis, split bin)
    for axis in 0..3 {
        if ext[axis] <= 0.0 {
            continue;
        }
        let mut bin_bounds = [Aabb::EMPTY; BIN_COUNT];
        let mut bin_counts = [0usize; BIN_COUNT];
        let scale = BIN_COUNT as f64 / ext[axis];
        for it in slice.iter() {
            let b = (((it.centroid[axis] - cbounds.min[axis]) * scale) as usize).min(BIN_COUNT - 1);
            bin_counts[b] += 1;
            bin_bounds[b] = bin_bounds[b].union(&it.bounds);
        }
        let mut right_area = [0.0; BIN_COUNT];
        let mut right_count = [0usize; BIN_COUNT];
        let mut acc = Aabb::EMPTY;
        let mut n = 0;
        for b in (1..BIN_COUNT).rev() {
            acc = acc.union(&bin_bounds[b]);
            n += bin_counts[b];
            right_area[b] = acc.surface_area();
            right_count[b] = n;
        }
        let mut acc = Aabb::EMPTY;
        let mut n = 0;
        for split in 1..BIN_COUNT {
            acc = acc.union(&bin_bounds[split - 1]);
            n += bin_counts[split - 1];
            if n == 0 || right_count[split] == 0 {
                continue;
            }
            let cost = acc.surface_area() * n as f64 + right_area[split] * right_count[split] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, split));
            }
        }
    }

    let mid = match best {
        Some((_, axis, split)) => {
            let scale = BIN_COUNT as f64 / ext[axis];
            let lo = cbounds.min[axis];
            partition(slice, |it| {
                ((((it.centroid[axis] - lo) * scale) as usize).min(BIN_COUNT - 1)) < split
            })
        }
        // Coincident centroids: split the run in half to bound leaf size.
        None => count / 2,
    };
    if mid == 0 || mid == count {
        make_leaf(nodes);
        return;
    }
    let left = nodes.len();
    nodes.push(Node { bounds: Aabb::EMPTY, first: 0, count: 0 });
    nodes.push(Node { bounds: Aabb::EMPTY, first: 0, count: 0 });
    nodes[node_idx] = Node { bounds, first: left as u32, count: 0 };
    build_node(nodes, left, items, start, start + mid);
    build_node(nodes, left + 1, items, start + mid, end);
}

fn partition(slice: &mut [Item], pred: impl Fn(&Item) -> bool) -> usize {
    let mut i = 0;
    for j in 0..slice.len() {
        if pred(&slice[j]) {
            slice.swap(i, j);
            i += 1;
        }
    }
    i
}
