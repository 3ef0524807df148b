//! Bounding volume hierarchy over scene primitives, built with a binned
//! surface-area heuristic.

use super::geometry::{Aabb, Primitive, Ray};
use crate::math::Vec3;

const MAX_LEAF: usize = 4;
const BINS: usize = 12;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the right child
    /// (the left child always follows its parent).
    offset: u32,
    /// Zero for interior nodes.
    count: u32,
    axis: u8,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

struct BuildItem {
    bounds: Aabb,
    centroid: Vec3,
    index: u32,
}

fn padded_bounds(p: &Primitive) -> Aabb {
    let b = p.shape.bounds();
    let extent = (b.max - b.min).max_component().max(b.max.max(-b.min).max_component());
    let pad = Vec3::splat(1e-9 * (1.0 + extent));
    Aabb {
        min: b.min - pad,
        max: b.max + pad,
    }
}

impl Bvh {
    pub fn build(prims: &[Primitive]) -> Bvh {
        let mut items: Vec<BuildItem> = prims
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let bounds = padded_bounds(p);
                BuildItem {
                    bounds,
                    centroid: bounds.centroid(),
                    index: i as u32,
                }
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * prims.len().max(1)),
            order: Vec::with_capacity(prims.len()),
        };
        if !items.is_empty() {
            let n = items.len();
            bvh.build_recursive(&mut items, 0, n);
        }
        bvh
    }

    fn build_recursive(&mut self, items: &mut [BuildItem], start: usize, end: usize) -> usize {
        let node_index = self.nodes.len();
        let slice = &mut items[start..end];
        let bounds = slice.iter().fold(Aabb::EMPTY, |a, it| a.union(it.bounds));
        self.nodes.push(Node {
            bounds,
            offset: 0,
            count: 0,
            axis: 0,
        });

        let count = slice.len();
        if count <= MAX_LEAF {
            self.make_leaf(node_index, slice);
            return node_index;
        }

        let cbounds = slice
            .iter()
            .fold(Aabb::EMPTY, |a, it| a.grow(it.centroid));
        let extent = cbounds.max - cbounds.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };

        let mid = if extent[axis] <= 0.0 {
            // All centroids coincide; split by count.
            count / 2
        } else {
            match best_sah_split(slice, &cbounds, axis, &bounds) {
                Some(split) => split,
                None => {
                    self.make_leaf(node_index, slice);
                    return node_index;
                }
            }
        };

        let mid = if mid == 0 || mid == count { count / 2 } else { mid };
        if extent[axis] <= 0.0 {
            slice.sort_by_key(|it| it.index);
        }

        self.build_recursive(items, start, start + mid);
        let right = self.build_recursive(items, start + mid, end);
        let node = &mut self.nodes[node_index];
        node.offset = right as u32;
        node.axis = axis as u8;
        node_index
    }

    fn make_leaf(&mut self, node_index: usize, slice: &[BuildItem]) {
        let node = &mut self.nodes[node_index];
        node.offset = self.order.len() as u32;
        node.count = slice.len() as u32;
        self.order.extend(slice.iter().map(|it| it.index));
    }

    /// Nearest hit as `(primitive index, distance, normal)`. Ties in distance
    /// resolve to the lower primitive index so results match a linear scan.
    pub fn intersect(&self, prims: &[Primitive], ray: &Ray) -> Option<(usize, f64, Vec3)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let neg = [ray.dir.x < 0.0, ray.dir.y < 0.0, ray.dir.z < 0.0];
        let mut best: Option<(usize, f64, Vec3)> = None;
        let mut r = *ray;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut current = 0usize;
        loop {
            let node = &self.nodes[current];
            if node.bounds.hit(r.origin, inv_dir, r.t_min, r.t_max).is_some() {
                if node.count > 0 {
                    let first = node.offset as usize;
                    for &pi in &self.order[first..first + node.count as usize] {
                        let pi = pi as usize;
                        if let Some((t, n)) = prims[pi].shape.intersect(&r) {
                            let better = match best {
                                None => true,
                                Some((bi, bt, _)) => t < bt || (t == bt && pi < bi),
                            };
                            if better {
                                best = Some((pi, t, n));
                                r.t_max = t;
                            }
                        }
                    }
                } else {
                    // Visit the near child first.
                    let (first, second) = if neg[node.axis as usize] {
                        (node.offset as usize, current + 1)
                    } else {
                        (current + 1, node.offset as usize)
                    };
                    stack[sp] = second as u32;
                    sp += 1;
                    current = first;
                    continue;
                }
            }
            if sp == 0 {
                break;
            }
            sp -= 1;
            current = stack[sp] as usize;
        }
        best
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Exhaustive nearest-hit search with the same tie-breaking as the BVH.
pub fn intersect_linear(prims: &[Primitive], ray: &Ray) -> Option<(usize, f64, Vec3)> {
    let mut best: Option<(usize, f64, Vec3)> = None;
    let mut r = *ray;
    for (pi, p) in prims.iter().enumerate() {
        if let Some((t, n)) = p.shape.intersect(&r) {
            let better = match best {
                None => true,
                Some((_, bt, _)) => t < bt,
            };
            if better {
                best = Some((pi, t, n));
                r.t_max = t;
            }
        }
    }
    best
}

fn best_sah_split(
    slice: &mut [BuildItem],
    cbounds: &Aabb,
    axis: usize,
    bounds: &Aabb,
) -> Option<usize> {
    let lo = cbounds.min[axis];
    let scale = BINS as f64 / (cbounds.max[axis] - lo);
    let bin_of = |c: f64| (((c - lo) * scale) as usize).min(BINS - 1);

    let mut bin_bounds = [Aabb::EMPTY; BINS];
    let mut bin_counts = [0usize; BINS];
    for it in slice.iter() {
        let b = bin_of(it.centroid[axis]);
        bin_counts[b] += 1;
        bin_bounds[b] = bin_bounds[b].union(it.bounds);
    }

    let mut best_cost = f64::INFINITY;
    let mut best_split = 0;
    for split in 1..BINS {
        let (mut lb, mut lc) = (Aabb::EMPTY, 0);
        for i in 0..split {
            lb = lb.union(bin_bounds[i]);
            lc += bin_counts[i];
        }
        let (mut rb, mut rc) = (Aabb::EMPTY, 0);
        for i in split..BINS {
            rb = rb.union(bin_bounds[i]);
            rc += bin_counts[i];
        }
        if lc == 0 || rc == 0 {
            continue;
        }
        let cost = TRAVERSAL_COST
            + INTERSECT_COST
                * (lc as f64 * lb.surface_area() + rc as f64 * rb.surface_area())
                / bounds.surface_area().max(f64::MIN_POSITIVE);
        if cost < best_cost {
            best_cost = cost;
            best_split = split;
        }
    }

    let leaf_cost = INTERSECT_COST * slice.len() as f64;
    if best_split == 0 || (best_cost >= leaf_cost && slice.len() <= MAX_LEAF) {
        return None;
    }

    // Partition in place.
    let mut left = 0;
    for i in 0..slice.len() {
        if bin_of(slice[i].centroid[axis]) < best_split {
            slice.swap(i, left);
            left += 1;
        }
    }
    Some(left)
}
