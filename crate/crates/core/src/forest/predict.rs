//! Greedy and backtracking tree search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

use super::{Branch, Forest, ForestMode, Node, Query, RegressionTree, WeakLearnerParams};
use crate::error::{Error, Result};
use crate::features::l2_distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub world_point: Vector3<f64>,
    /// L2 distance between the query descriptor and the leaf's mean descriptor.
    pub descriptor_distance: f64,
    pub leaves_examined: usize,
    /// Arena index of the winning leaf.
    pub leaf: usize,
}

/// Routes a query through one split: left iff `response ≤ threshold`.
pub fn evaluate_weak_learner(query: &Query<'_>, params: &WeakLearnerParams) -> Result<(Branch, f64)> {
    let response = query.response(&params.selector)?;
    let branch = if response <= params.threshold {
        Branch::Left
    } else {
        Branch::Right
    };
    Ok((branch, response))
}

fn check_query(tree: &RegressionTree, query: &Query<'_>) -> Result<()> {
    let len = tree.mode().descriptor_len();
    if query.descriptor.len() != len {
        return Err(Error::InvalidInput(format!(
            "query descriptor has length {}, tree expects {len}",
            query.descriptor.len()
        )));
    }
    if tree.mode() == ForestMode::IndoorRgbd && query.frame.is_none() {
        return Err(Error::InvalidInput("indoor query needs its RGB-D frame".into()));
    }
    Ok(())
}

/// Single root-to-leaf descent.
pub fn predict_greedy(tree: &RegressionTree, query: &Query<'_>) -> Result<Prediction> {
    predict_backtracking(tree, query, 1)
}

/// Unvisited sibling waiting in the backtracking queue.
struct Pending {
    key: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Reversed so the max-heap pops the smallest key, oldest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-bin-first search over up to `max_leaves` leaves.
///
/// The query first descends greedily; every sibling it passes is queued
/// with key `|response − threshold|` of the parent split. Queued subtrees
/// are then explored in increasing key order (ties in insertion order),
/// each by a greedy descent that queues further siblings. The leaf with the
/// smallest descriptor distance wins; on equal distance the earlier leaf is
/// kept.
pub fn predict_backtracking(tree: &RegressionTree, query: &Query<'_>, max_leaves: usize) -> Result<Prediction> {
    if max_leaves == 0 {
        return Err(Error::InvalidInput("max_leaves must be at least 1".into()));
    }
    check_query(tree, query)?;
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut best: Option<Prediction> = None;
    let mut examined = 0usize;
    let mut start = Some(0usize);

    while let Some(mut node) = start.take() {
        loop {
            match tree.node(node) {
                Node::Split(split) => {
                    let (branch, response) = evaluate_weak_learner(query, &split.params)?;
                    let (near, far) = match branch {
                        Branch::Left => (split.left, split.right),
                        Branch::Right => (split.right, split.left),
                    };
                    queue.push(Pending {
                        key: (response - split.params.threshold).abs(),
                        seq,
                        node: far,
                    });
                    seq += 1;
                    node = near;
                }
                Node::Leaf(leaf) => {
                    examined += 1;
                    let dist = l2_distance(query.descriptor, &leaf.mean_descriptor);
                    if best.as_ref().is_none_or(|b| dist < b.descriptor_distance) {
                        best = Some(Prediction {
                            world_point: leaf.mean_position,
                            descriptor_distance: dist,
                            leaves_examined: 0,
                            leaf: node,
                        });
                    }
                    break;
                }
            }
        }
        if examined < max_leaves {
            start = queue.pop().map(|p| p.node);
        }
    }

    let mut best = best.expect("every descent ends at a leaf");
    best.leaves_examined = examined;
    Ok(best)
}

/// One backtracking prediction per tree, in tree order.
pub fn forest_predict(forest: &Forest, query: &Query<'_>, max_leaves: usize) -> Result<Vec<Prediction>> {
    forest
        .trees()
        .iter()
        .map(|tree| predict_backtracking(tree, query, max_leaves))
        .collect()
}
