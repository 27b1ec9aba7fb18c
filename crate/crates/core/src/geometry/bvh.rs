use super::triangle::intersect_indexed;
use super::{Hit, Ray, Triangle, Vec3};

const MAX_LEAF_SIZE: usize = 4;

/// Relative padding applied to every node box so that floating-point slab
/// tests never cull a box whose triangles produce a hit.
const BOX_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn of_triangle(tri: &Triangle) -> Aabb {
        let mut b = Aabb::EMPTY;
        b.grow(tri.a);
        b.grow(tri.b);
        b.grow(tri.c);
        b
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    fn padded(&self) -> Aabb {
        let largest = self
            .min
            .to_array()
            .into_iter()
            .chain(self.max.to_array())
            .fold(0.0_f64, |m, c| m.max(c.abs()));
        let pad = BOX_PAD * (1.0 + largest);
        let pad = Vec3::new(pad, pad, pad);
        Aabb {
            min: self.min - pad,
            max: self.max + pad,
        }
    }

    fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Entry parameter of the ray into the box, if the overlap with
    /// `[0, t_max]` is non-empty.
    #[inline]
    fn entry(&self, origin: Vec3, inv_dir: Vec3, dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t_near = 0.0_f64;
        let mut t_far = t_max;
        for axis in 0..3 {
            if dir[axis] == 0.0 {
                if origin[axis] < self.min[axis] || origin[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let t1 = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let t2 = (self.max[axis] - origin[axis]) * inv_dir[axis];
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            t_near = t_near.max(lo);
            t_far = t_far.min(hi);
            if t_near > t_far {
                return None;
            }
        }
        Some(t_near)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first slot in `order`. Internal: index of the left child; the
    /// right child follows it.
    first: u32,
    /// Zero for internal nodes.
    count: u32,
}

/// Bounding volume hierarchy over a triangle list, median split on the
/// longest centroid axis.
///
/// Queries return exactly what an exhaustive scan would: the smallest `t`,
/// lowest triangle index on ties.
#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Bvh {
        if triangles.is_empty() {
            return Bvh::default();
        }
        assert!(triangles.len() < u32::MAX as usize, "too many triangles");

        let boxes: Vec<Aabb> = triangles.iter().map(Aabb::of_triangle).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(Triangle::centroid).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = vec![Node {
            bounds: Aabb::EMPTY,
            first: 0,
            count: 0,
        }];

        // (node index, start, end) into `order`
        let mut pending = vec![(0usize, 0usize, order.len())];
        while let Some((node_idx, start, end)) = pending.pop() {
            let slice = &mut order[start..end];
            let bounds = slice
                .iter()
                .fold(Aabb::EMPTY, |b, &i| b.union(&boxes[i as usize]));
            let count = end - start;

            let mut centroid_bounds = Aabb::EMPTY;
            for &i in slice.iter() {
                centroid_bounds.grow(centroids[i as usize]);
            }
            let axis = centroid_bounds.longest_axis();
            let flat = centroid_bounds.max[axis] <= centroid_bounds.min[axis];

            if count <= MAX_LEAF_SIZE || flat {
                nodes[node_idx] = Node {
                    bounds: bounds.padded(),
                    first: start as u32,
                    count: count as u32,
                };
                continue;
            }

            let mid = count / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });

            let left = nodes.len();
            let blank = Node {
                bounds: Aabb::EMPTY,
                first: 0,
                count: 0,
            };
            nodes.push(blank);
            nodes.push(blank);
            nodes[node_idx] = Node {
                bounds: bounds.padded(),
                first: left as u32,
                count: 0,
            };
            pending.push((left + 1, start + mid, end));
            pending.push((left, start, start + mid));
        }

        Bvh { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Nearest hit among `triangles`, which must be the slice the hierarchy
    /// was built from.
    pub fn nearest_hit(&self, triangles: &[Triangle], ray: &Ray) -> Option<Hit> {
        let root = self.nodes.first()?;
        let origin = ray.origin();
        let dir = ray.direction();
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);

        let mut best: Option<Hit> = None;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        if let Some(t) = root.bounds.entry(origin, inv_dir, dir, f64::INFINITY) {
            stack.push((0, t));
        }

        while let Some((idx, t_entry)) = stack.pop() {
            let limit = best.map_or(f64::INFINITY, |h| h.t);
            // Equal entry must still be visited for the index tie-break.
            if t_entry > limit {
                continue;
            }
            let node = &self.nodes[idx as usize];
            if node.count > 0 {
                let first = node.first as usize;
                for &tri_idx in &self.order[first..first + node.count as usize] {
                    let tri_idx = tri_idx as usize;
                    if let Some(hit) = intersect_indexed(ray, &triangles[tri_idx], tri_idx) {
                        if best.is_none_or(|b| hit.is_closer_than(&b)) {
                            best = Some(hit);
                        }
                    }
                }
                continue;
            }

            let (l, r) = (node.first, node.first + 1);
            let tl = self.nodes[l as usize]
                .bounds
                .entry(origin, inv_dir, dir, limit);
            let tr = self.nodes[r as usize]
                .bounds
                .entry(origin, inv_dir, dir, limit);
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    // Nearer child on top.
                    if a <= b {
                        stack.push((r, b));
                        stack.push((l, a));
                    } else {
                        stack.push((l, a));
                        stack.push((r, b));
                    }
                }
                (Some(a), None) => stack.push((l, a)),
                (None, Some(b)) => stack.push((r, b)),
                (None, None) => {}
            }
        }
        best
    }
}
