use std::cmp::Ordering;

use smallvec::SmallVec;

use super::Vec3;
use crate::error::{DdmError, Result};

const LEAF_SIZE: usize = 16;

/// One K-NN result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Static k-d tree over a point set. Results are identical to a brute-force
/// scan ordered by (squared distance, index).
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    // points permuted by `order`, so leaves are contiguous
    leaf_points: Vec<Vec3>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(DdmError::invalid("cannot index an empty point set"));
        }
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            leaf_points: Vec::new(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build_node(0, points.len());
        tree.leaf_points = tree.order.iter().map(|&i| tree.points[i]).collect();
        Ok(tree)
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

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = bounds(self.order[start..end].iter().map(|&i| &self.points[i]));
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let extent = hi - lo;
        let axis = extent.imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    /// The `k` nearest points to `q`, ascending by distance; ties go to the
    /// lower point index.
    pub fn knn(&self, q: &Vec3, k: usize) -> Result<Vec<Neighbor>> {
        Ok(self
            .knn_dist2(q, k)?
            .into_iter()
            .map(|(index, d2)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect())
    }

    /// As [`KdTree::knn`], reporting squared distances and avoiding a heap
    /// allocation for `k ≤ 8`.
    pub fn knn_dist2(&self, q: &Vec3, k: usize) -> Result<SmallVec<[(usize, f64); 8]>> {
        if k == 0 {
            return Err(DdmError::invalid("K must be positive"));
        }
        if k > self.points.len() {
            return Err(DdmError::invalid(format!(
                "K = {k} exceeds the number of indexed points ({})",
                self.points.len()
            )));
        }
        let mut best: SmallVec<[Candidate; 8]> = SmallVec::with_capacity(k);
        let mut stack: SmallVec<[(usize, f64); 64]> = SmallVec::new();
        let root = &self.nodes[0];
        stack.push((0, box_dist2(q, &root.lo, &root.hi)));
        while let Some((node, d2)) = stack.pop() {
            if !visit(&best, k, d2) {
                continue;
            }

            match self.nodes[node].kind {
                NodeKind::Leaf { start, end } => {
                    for (slot, p) in self.leaf_points[start..end].iter().enumerate() {
                        let dist2 = (q - p).norm_squared();
                        if best.len() == k && dist2 > best[k - 1].dist2 {
                            continue;
                        }
                        insert(
                            &mut best,
                            k,
                            Candidate {
                                dist2,
                                index: self.order[start + slot],
                            },
                        );
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = box_dist2(q, &self.nodes[left].lo, &self.nodes[left].hi);
                    let dr = box_dist2(q, &self.nodes[right].lo, &self.nodes[right].hi);
                    // nearer child on top of the stack
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        Ok(best.into_iter().map(|c| (c.index, c.dist2)).collect())
    }

    pub fn nearest(&self, q: &Vec3) -> Neighbor {
        let (index, d2) = self.knn_dist2(q, 1).expect("tree is non-empty")[0];
        Neighbor {
            index,
            distance: d2.sqrt(),
        }
    }
}

// Sorted insertion into a buffer of at most `k` candidates.
fn insert(best: &mut SmallVec<[Candidate; 8]>, k: usize, c: Candidate) {
    if best.len() == k {
        if c >= best[k - 1] {
            return;
        }
        best.pop();
    }
    let pos = best.partition_point(|b| *b < c);
    best.insert(pos, c);
}

// Boxes at exactly the current worst distance are still visited so that
// equal-distance points with lower indices can displace the worst entry.
fn visit(best: &[Candidate], k: usize, box_d2: f64) -> bool {
    best.len() < k || box_d2 <= best[best.len() - 1].dist2
}

pub(crate) fn bounds<'a>(mut pts: impl Iterator<Item = &'a Vec3>) -> (Vec3, Vec3) {
    let first = *pts.next().expect("non-empty");
    let (mut lo, mut hi) = (first, first);
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

pub(crate) fn box_dist2(q: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d2 = 0.0;
    for a in 0..3 {
        let g = if q[a] < lo[a] {
            lo[a] - q[a]
        } else if q[a] > hi[a] {
            q[a] - hi[a]
        } else {
            0.0
        };
        d2 += g * g;
    }
    d2
}
