//! Exact nearest-neighbour queries over a sample.
//!
//! A k-d tree answers k-th neighbour distance queries; every distance goes
//! through [`distance_sq`] so tree results equal a linear scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sample::{distance_sq, SampleSet};

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable k-d tree over an owned [`SampleSet`].
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    sample: SampleSet,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Heap entry ordered by squared distance, then by point index.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NeighborIndex {
    /// Builds the tree. Construction is deterministic.
    pub fn new(sample: SampleSet) -> Self {
        let mut index = NeighborIndex {
            order: (0..sample.len()).collect(),
            nodes: Vec::new(),
            sample,
        };
        let len = index.order.len();
        index.build(0, len);
        index
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let sample = &self.sample;
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            sample.point(a)[axis]
                .total_cmp(&sample.point(b)[axis])
                .then(a.cmp(&b))
        });
        let value = self.sample.point(self.order[mid])[axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let n = self.sample.dim().get();
        (0..n)
            .map(|axis| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &i| {
                        let c = self.sample.point(i)[axis];
                        (lo.min(c), hi.max(c))
                    },
                );
                hi - lo
            })
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(axis, _)| axis)
            .unwrap_or(0)
    }

    pub fn sample(&self) -> &SampleSet {
        &self.sample
    }

    pub fn into_sample(self) -> SampleSet {
        self.sample
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        let n = self.sample.dim().get();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Squared distance from `x` to its `k`-th nearest sample point.
    ///
    /// With `exclude_self`, a sample point at exactly zero distance is skipped.
    pub fn kth_distance_sq(&self, x: &[f64], k: usize, exclude_self: bool) -> Result<f64> {
        self.check_query(x)?;
        let len = self.sample.len();
        if k == 0 || k > len {
            return Err(Error::NeighborOutOfRange { k, available: len });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, x, k, exclude_self, &mut heap);
        if heap.len() < k {
            return Err(Error::NeighborOutOfRange {
                k,
                available: heap.len(),
            });
        }
        Ok(heap.peek().map(|c| c.d2).unwrap_or(0.0))
    }

    /// Euclidean distance to the `k`-th nearest sample point.
    pub fn kth_distance(&self, x: &[f64], k: usize, exclude_self: bool) -> Result<f64> {
        self.kth_distance_sq(x, k, exclude_self).map(f64::sqrt)
    }

    /// Indices of the `k` nearest points in ascending (distance, index) order.
    pub fn nearest(&self, x: &[f64], k: usize, exclude_self: bool) -> Result<Vec<usize>> {
        self.kth_distance_sq(x, k, exclude_self)?;
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, x, k, exclude_self, &mut heap);
        Ok(heap.into_sorted_vec().into_iter().map(|c| c.idx).collect())
    }

    fn search(
        &self,
        node: usize,
        x: &[f64],
        k: usize,
        exclude_self: bool,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let d2 = distance_sq(x, self.sample.point(idx));
                    if exclude_self && d2 == 0.0 {
                        continue;
                    }
                    let cand = Candidate { d2, idx };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = x[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, x, k, exclude_self, heap);
                let worst = heap.peek().map(|c| c.d2).unwrap_or(f64::INFINITY);
                if heap.len() < k || diff * diff <= worst {
                    self.search(far, x, k, exclude_self, heap);
                }
            }
        }
    }

    /// Indices `j` with `|x - x_j| > radius`, ascending.
    pub fn beyond_radius(&self, x: &[f64], radius: f64) -> Result<Vec<usize>> {
        self.check_query(x)?;
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be >= 0")));
        }
        Ok((0..self.sample.len())
            .filter(|&j| distance_sq(x, self.sample.point(j)).sqrt() > radius)
            .collect())
    }
}
