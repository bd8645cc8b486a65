//! Exact Euclidean nearest neighbours.
//!
//! Neighbours are ordered by `(squared distance, row index)`, so equal
//! distances resolve to the lower row index. The k-d tree only prunes
//! subtrees whose lower bound is strictly worse than the current k-th
//! candidate, which keeps its answers identical to a linear scan.

use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::data::Dataset;

const LEAF_SIZE: usize = 16;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Neighbour index over a subset of a dataset's rows.
pub(crate) struct NeighborIndex<'a> {
    data: &'a Dataset,
    points: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(data: &'a Dataset, rows: Vec<usize>) -> Self {
        let mut index = NeighborIndex {
            data,
            points: rows,
            nodes: Vec::new(),
        };
        if !index.points.is_empty() {
            let n = index.points.len();
            index.build(0, n);
        }
        index
    }

    pub fn all(data: &'a Dataset) -> Self {
        Self::new(data, (0..data.n_rows()).collect())
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let d = self.data.n_features();
        let mut best = (0, -1.0);
        for j in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &p in &self.points[start..end] {
                let v = self.data.row(p)[j];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (j, hi - lo);
            }
        }
        let dim = best.0;
        if best.1 <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let data = self.data;
        self.points[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            data.row(a)[dim].total_cmp(&data.row(b)[dim]).then(a.cmp(&b))
        });
        let value = data.row(self.points[mid])[dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// The `k` nearest indexed rows to `x`, skipping row `exclude`.
    pub fn query(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
        self.query_with_dist(x, k, exclude).into_iter().map(|(i, _)| i).collect()
    }

    /// Like [`query`](Self::query) but also returns squared distances.
    pub fn query_with_dist(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, x, k, exclude, &mut heap);
        let mut out: Vec<Cand> = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| (c.idx, c.d2)).collect()
    }

    fn search(&self, node: usize, x: &[f64], k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &p in &self.points[start..end] {
                    if Some(p) == exclude {
                        continue;
                    }
                    let c = Cand {
                        d2: sq_dist(x, self.data.row(p)),
                        idx: p,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = x[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, x, k, exclude, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.search(far, x, k, exclude, heap);
                }
            }
        }
    }

    /// Neighbours of each dataset row in `queries`, excluding the row itself.
    pub fn neighbors_of_rows(&self, queries: &[usize], k: usize) -> Vec<Vec<usize>> {
        queries
            .par_iter()
            .map(|&q| self.query(self.data.row(q), k, Some(q)))
            .collect()
    }
}

/// O(n²) reference used by tests.
#[cfg(test)]
pub(crate) fn brute_force(data: &Dataset, rows: &[usize], x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut c: Vec<Cand> = rows
        .iter()
        .filter(|&&r| Some(r) != exclude)
        .map(|&r| Cand {
            d2: sq_dist(x, data.row(r)),
            idx: r,
        })
        .collect();
    c.sort_unstable();
    c.into_iter().take(k).map(|c| c.idx).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_data(values: &[(i8, i8)]) -> Dataset {
        let rows: Vec<Vec<f64>> = values.iter().map(|&(a, b)| vec![a as f64, b as f64]).collect();
        let n = rows.len();
        Dataset::from_rows(&rows, vec![0; n], 1).unwrap()
    }

    #[test]
    fn ties_resolve_to_lower_index() {
        let d = grid_data(&[(1, 0), (-1, 0), (0, 1), (0, -1), (0, 0)]);
        let idx = NeighborIndex::all(&d);
        assert_eq!(idx.query(&[0.0, 0.0], 3, Some(4)), vec![0, 1, 2]);
    }

    proptest! {
        // small integer coordinates force many exact ties
        #[test]
        fn matches_brute_force(
            pts in proptest::collection::vec((-4i8..4, -4i8..4), 1..200),
            q in (-5i8..5, -5i8..5),
            k in 1usize..12,
        ) {
            let d = grid_data(&pts);
            let rows: Vec<usize> = (0..d.n_rows()).filter(|i| i % 3 != 1).collect();
            let idx = NeighborIndex::new(&d, rows.clone());
            let x = [q.0 as f64, q.1 as f64];
            prop_assert_eq!(idx.query(&x, k, None), brute_force(&d, &rows, &x, k, None));
            let ex = rows.first().copied();
            prop_assert_eq!(idx.query(&x, k, ex), brute_force(&d, &rows, &x, k, ex));
        }
    }
}
