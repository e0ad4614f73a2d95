//! Exact k-nearest-neighbour scores over a feature matrix.
//!
//! Two independent routes compute the same neighbour distances: a
//! median-split kd-tree (the production path) and a brute-force pairwise
//! scan kept as the reference implementation. Both use the module's shared
//! Euclidean distance, so their outputs are comparable to the last bit —
//! the property tests hold them to exactly that.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::series::DetectorConfig;

use super::{euclidean, evt_threshold, FeatureMatrix, OutlierScoreSet, ScoreMethod};

/// How the k neighbour distances are combined into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnVariant {
    /// Weighted sum with linearly decaying weights — nearer neighbours
    /// count more.
    Agg,
    /// Plain sum of the k distances.
    Sum,
}

impl KnnVariant {
    fn method(self) -> ScoreMethod {
        match self {
            KnnVariant::Agg => ScoreMethod::KnnAgg,
            KnnVariant::Sum => ScoreMethod::KnnSum,
        }
    }
}

/// Total-ordered f64 for the bounded max-heap.
#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct KdNode {
    point: usize,
    axis: usize,
    left: Option<Box<KdNode>>,
    right: Option<Box<KdNode>>,
}

/// Median-split kd-tree over the matrix rows.
struct KdTree<'a> {
    rows: &'a [Vec<f64>],
    root: Option<Box<KdNode>>,
}

impl<'a> KdTree<'a> {
    fn build(rows: &'a [Vec<f64>], dim: usize) -> Self {
        let mut indices: Vec<usize> = (0..rows.len()).collect();
        let root = Self::build_node(rows, dim, &mut indices, 0);
        Self { rows, root }
    }

    fn build_node(
        rows: &[Vec<f64>],
        dim: usize,
        indices: &mut [usize],
        depth: usize,
    ) -> Option<Box<KdNode>> {
        if indices.is_empty() {
            return None;
        }
        let axis = depth % dim;
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| rows[a][axis].total_cmp(&rows[b][axis]));
        let point = indices[mid];
        let (left_indices, rest) = indices.split_at_mut(mid);
        let right_indices = &mut rest[1..];
        Some(Box::new(KdNode {
            point,
            axis,
            left: Self::build_node(rows, dim, left_indices, depth + 1),
            right: Self::build_node(rows, dim, right_indices, depth + 1),
        }))
    }

    /// Distances to the k nearest neighbours of `rows[query]` (the query
    /// point itself excluded), ascending.
    fn k_nearest(&self, query: usize, k: usize) -> Vec<f64> {
        let q = &self.rows[query];
        let mut best: BinaryHeap<OrdF64> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root.as_deref(), q, query, k, &mut best);
        best.into_sorted_vec().into_iter().map(|d| d.0).collect()
    }

    fn search(
        &self,
        node: Option<&KdNode>,
        q: &[f64],
        skip: usize,
        k: usize,
        best: &mut BinaryHeap<OrdF64>,
    ) {
        let Some(node) = node else { return };
        let p = &self.rows[node.point];
        if node.point != skip {
            let d = euclidean(q, p);
            if best.len() < k {
                best.push(OrdF64(d));
            } else if d < best.peek().expect("heap is full").0 {
                best.pop();
                best.push(OrdF64(d));
            }
        }
        let diff = q[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left.as_deref(), node.right.as_deref())
        } else {
            (node.right.as_deref(), node.left.as_deref())
        };
        self.search(near, q, skip, k, best);
        // The far half-space can only contain a better neighbour if the
        // splitting plane is at most the current worst distance away (or
        // the heap is not full yet).
        let must_check = best.len() < k || diff.abs() <= best.peek().expect("non-empty").0;
        if must_check {
            self.search(far, q, skip, k, best);
        }
    }
}

fn check_knn_input(matrix: &FeatureMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "neighbour count must be at least 1".into(),
        ));
    }
    if matrix.dim() == 0 {
        return Err(Error::InvalidConfig(
            "feature matrix has no columns".into(),
        ));
    }
    if matrix.n_rows() <= k {
        return Err(Error::InsufficientData {
            context: "k-nearest-neighbour distances",
            needed: k + 1,
            got: matrix.n_rows(),
        });
    }
    Ok(())
}

/// Per-row distances to the k nearest neighbours, ascending, via the
/// kd-tree.
pub fn knn_distances(matrix: &FeatureMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    check_knn_input(matrix, k)?;
    let tree = KdTree::build(&matrix.rows, matrix.dim());
    Ok((0..matrix.n_rows())
        .map(|i| tree.k_nearest(i, k))
        .collect())
}

/// Reference implementation of [`knn_distances`]: a full pairwise scan.
/// Kept (and exercised) so the kd-tree always has an independent witness.
pub fn knn_distances_brute(matrix: &FeatureMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    check_knn_input(matrix, k)?;
    let n = matrix.n_rows();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut distances: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(&matrix.rows[i], &matrix.rows[j]))
            .collect();
        distances.sort_unstable_by(|a, b| a.total_cmp(b));
        distances.truncate(k);
        out.push(distances);
    }
    Ok(out)
}

/// Combine ascending neighbour distances into a single score.
fn combine(distances: &[f64], variant: KnnVariant) -> f64 {
    match variant {
        KnnVariant::Sum => distances.iter().sum(),
        KnnVariant::Agg => {
            let k = distances.len();
            let weight_sum = (k * (k + 1) / 2) as f64;
            distances
                .iter()
                .enumerate()
                .map(|(i, d)| ((k - i) as f64 / weight_sum) * d)
                .sum()
        }
    }
}

/// k-nearest-neighbour outlier scores without a threshold (the threshold
/// slot is `+∞` and nothing is flagged).
pub fn knn_scores(matrix: &FeatureMatrix, k: usize, variant: KnnVariant) -> Result<OutlierScoreSet> {
    let distances = knn_distances(matrix, k)?;
    let scores = distances.iter().map(|d| combine(d, variant)).collect();
    Ok(OutlierScoreSet::from_scores(
        variant.method(),
        scores,
        f64::INFINITY,
    ))
}

/// k-nearest-neighbour detection: scores plus the extreme-value threshold
/// over their distribution.
pub fn knn_detect(
    matrix: &FeatureMatrix,
    k: usize,
    variant: KnnVariant,
    config: &DetectorConfig,
) -> Result<OutlierScoreSet> {
    config.validate()?;
    let mut set = knn_scores(matrix, k, variant)?;
    let threshold = evt_threshold(&set.scores, config.evt_alpha)?;
    set = OutlierScoreSet::from_scores(set.method, set.scores, threshold);
    Ok(set)
}
