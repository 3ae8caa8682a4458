use nalgebra::Vector3;

use super::CloudError;

/// Balanced 3-D KD-tree over point indices, median-split on the widest axis.
///
/// Queries are exact: results are identical to a brute-force scan, with
/// distance ties broken by the lower point index.
#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    /// Point index at this node (the median of its range).
    index: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Result<Self, CloudError> {
        if points.is_empty() {
            return Err(CloudError::EmptyCloud);
        }
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_recursive(points, &mut indices, &mut nodes);
        Ok(Self {
            points: points.to_vec(),
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// K nearest neighbors by Euclidean distance, ascending; fewer are
    /// returned when the cloud holds fewer than `k` points.
    pub fn nearest_k(&self, q: &Vector3<f64>, k: usize) -> Vec<(usize, f64)> {
        assert!(k >= 1);
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.search(self.root, q, k, &mut best);
        best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    /// Nearest single neighbor.
    pub fn nearest(&self, q: &Vector3<f64>) -> (usize, f64) {
        self.nearest_k(q, 1)[0]
    }

    /// All neighbors within `radius`, sorted ascending by distance.
    pub fn within_radius(&self, q: &Vector3<f64>, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.radius_search(self.root, q, radius * radius, &mut out);
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn search(&self, node: usize, q: &Vector3<f64>, k: usize, best: &mut Vec<(f64, usize)>) {
        let n = &self.nodes[node];
        let p = &self.points[n.index];
        let d2 = (p - q).norm_squared();
        insert_candidate(best, k, d2, n.index);

        let delta = q[n.axis] - p[n.axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(c) = near {
            self.search(c, q, k, best);
        }
        // Non-strict bound so equal-distance lower-index points are found.
        let worst = best.last().map_or(f64::INFINITY, |b| b.0);
        if let Some(c) = far {
            if best.len() < k || delta * delta <= worst {
                self.search(c, q, k, best);
            }
        }
    }

    fn radius_search(&self, node: usize, q: &Vector3<f64>, r2: f64, out: &mut Vec<(usize, f64)>) {
        let n = &self.nodes[node];
        let p = &self.points[n.index];
        let d2 = (p - q).norm_squared();
        if d2 <= r2 {
            out.push((n.index, d2.sqrt()));
        }
        let delta = q[n.axis] - p[n.axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(c) = near {
            self.radius_search(c, q, r2, out);
        }
        if let Some(c) = far {
            if delta * delta <= r2 {
                self.radius_search(c, q, r2, out);
            }
        }
    }
}

fn insert_candidate(best: &mut Vec<(f64, usize)>, k: usize, d2: f64, index: usize) {
    let key = (d2, index);
    let pos = best.partition_point(|&(bd, bi)| (bd, bi) < key);
    if pos >= k {
        return;
    }
    best.insert(pos, key);
    best.truncate(k);
}

fn build_recursive(
    points: &[Vector3<f64>],
    indices: &mut [usize],
    nodes: &mut Vec<Node>,
) -> usize {
    debug_assert!(!indices.is_empty());
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for &i in indices.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };

    let mid = indices.len() / 2;
    indices.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let median = indices[mid];

    let node_slot = nodes.len();
    nodes.push(Node {
        index: median,
        axis,
        left: None,
        right: None,
    });

    let (left_slice, rest) = indices.split_at_mut(mid);
    let right_slice = &mut rest[1..];
    let left = if left_slice.is_empty() {
        None
    } else {
        Some(build_recursive(points, left_slice, nodes))
    };
    let right = if right_slice.is_empty() {
        None
    } else {
        Some(build_recursive(points, right_slice, nodes))
    };
    nodes[node_slot].left = left;
    nodes[node_slot].right = right;
    node_slot
}
