//! Exact nearest-neighbor search over 3D points.
//!
//! Median split on the widest-spread axis with small leaf buckets. Descent
//! prunes a subtree only when its splitting plane is strictly farther than the
//! current best, so equidistant candidates are always visited and ties resolve
//! to the lowest point index, matching an exhaustive scan exactly.

use alloc::vec::Vec;

use crate::math::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// Squared distance in a fixed operation order, shared by every search path.
#[inline]
pub fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

impl KdTree {
    /// Builds the index. Panics if there are more than `u32::MAX` points.
    pub fn build(points: Vec<Vec3>) -> Self {
        assert!(points.len() < u32::MAX as usize, "too many points for the k-d index");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build_node(&points, &mut order, 0, &mut nodes);
        }
        Self {
            points,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index and squared distance of the nearest point, lowest index on ties.
    /// Returns `None` for an empty tree or a query with non-finite coordinates.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        if self.nodes.is_empty() || !query.iter().all(|c| c.is_finite()) {
            return None;
        }
        let mut best = (f64::INFINITY, u32::MAX);
        self.search(0, query, &mut best);
        Some((best.1 as usize, best.0))
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (f64, u32)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start as usize..end as usize] {
                    let d = sq_dist(&self.points[idx as usize], q);
                    if d < best.0 || (d == best.0 && idx < best.1) {
                        *best = (d, idx);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, q, best);
                if diff * diff <= best.0 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

fn build_node(points: &[Vec3], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return id;
    }

    let axis = widest_axis(points, order);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let value = points[order[mid] as usize][axis];

    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(points, lo, offset, nodes);
    let right = build_node(points, hi, offset + mid, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

fn widest_axis(points: &[Vec3], order: &[u32]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let spread = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let mut axis = 0;
    for a in 1..3 {
        if spread[a] > spread[axis] {
            axis = a;
        }
    }
    axis
}
