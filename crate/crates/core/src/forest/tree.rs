//! Greedy binary CART trees on the Gini criterion.
//!
//! Growth is fully deterministic given the node RNG: candidate features
//! are evaluated in ascending index order and thresholds in ascending
//! value order, with strict improvement required to replace the incumbent
//! best split, so ties resolve to the lowest feature index and then the
//! lowest threshold.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

/// Flat training view: row-major values plus binary labels.
pub struct Dataset<'a> {
    pub values: &'a [f64],
    pub n_cols: usize,
    pub labels: &'a [u8],
}

impl Dataset<'_> {
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Class counts of the training rows that reached this node.
        counts: [u32; 2],
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// Gini impurity 1 - sum(p_k^2) of a two-class count vector.
pub fn gini(counts: &[u32; 2]) -> f64 {
    let total = (counts[0] + counts[1]) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / total;
    let p1 = counts[1] as f64 / total;
    1.0 - (p0 * p0 + p1 * p1)
}

pub struct GrowParams {
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    pub mtry: usize,
}

impl Tree {
    /// Grow a tree on the given rows (bootstrap indices, duplicates
    /// allowed). `rng` drives only the per-node feature subsampling.
    pub fn grow(data: &Dataset, rows: &mut [usize], params: &GrowParams, rng: &mut SplitMix64) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut scratch: Vec<usize> = (0..data.n_cols).collect();
        tree.grow_node(data, rows, 0, params, rng, &mut scratch);
        tree
    }

    fn grow_node(
        &mut self,
        data: &Dataset,
        rows: &mut [usize],
        depth: u32,
        params: &GrowParams,
        rng: &mut SplitMix64,
        feature_scratch: &mut [usize],
    ) -> usize {
        let counts = class_counts(data, rows);
        let n = rows.len();
        let at_depth_limit = params.max_depth.is_some_and(|d| depth >= d);
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || at_depth_limit || n < 2 * params.min_samples_leaf || n < 2 {
            return self.push(Node::Leaf { counts });
        }

        let best = find_best_split(data, rows, &counts, params, rng, feature_scratch);
        let Some((feature, threshold)) = best else {
            return self.push(Node::Leaf { counts });
        };

        // stable partition keeps row order deterministic
        let split_at = partition_stable(data, rows, feature, threshold);
        let idx = self.push(Node::Split {
            feature,
            threshold,
            counts,
            left: 0,
            right: 0,
        });
        let (left_rows, right_rows) = rows.split_at_mut(split_at);
        let left = self.grow_node(data, left_rows, depth + 1, params, rng, feature_scratch);
        let right = self.grow_node(data, right_rows, depth + 1, params, rng, feature_scratch);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[idx] {
            *l = left;
            *r = right;
        }
        idx
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Majority class of the leaf the feature vector falls into; a tied
    /// leaf votes the positive class.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { counts } => {
                    return if counts[1] >= counts[0] && counts[1] > 0 { 1 } else { 0 };
                }
            }
        }
    }
}

fn class_counts(data: &Dataset, rows: &[usize]) -> [u32; 2] {
    let mut counts = [0u32; 2];
    for &r in rows {
        counts[data.labels[r] as usize] += 1;
    }
    counts
}

/// Sample `mtry` distinct features, then scan each (in ascending index
/// order) for the threshold minimizing the weighted child Gini.
fn find_best_split(
    data: &Dataset,
    rows: &[usize],
    counts: &[u32; 2],
    params: &GrowParams,
    rng: &mut SplitMix64,
    feature_scratch: &mut [usize],
) -> Option<(usize, f64)> {
    let n_features = data.n_cols;
    let mtry = params.mtry.min(n_features).max(1);
    // partial Fisher-Yates: first mtry entries are the sample
    for i in 0..mtry {
        let j = i + rng.below((n_features - i) as u64) as usize;
        feature_scratch.swap(i, j);
    }
    let mut candidates: Vec<usize> = feature_scratch[..mtry].to_vec();
    candidates.sort_unstable();

    let n = rows.len() as f64;
    let min_leaf = params.min_samples_leaf as u32;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(rows.len());

    for &feature in &candidates {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data.value(r, feature), data.labels[r])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = [0u32; 2];
        for i in 0..sorted.len() - 1 {
            left[sorted[i].1 as usize] += 1;
            if sorted[i + 1].0 <= sorted[i].0 {
                continue; // can only cut between distinct values
            }
            let left_n = (i + 1) as u32;
            let right_n = (sorted.len() - i - 1) as u32;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let score = (left_n as f64 * gini(&left) + right_n as f64 * gini(&right)) / n;
            let improves = match best {
                None => true,
                Some((s, _, _)) => score < s,
            };
            if improves {
                let threshold = (sorted[i].0 + sorted[i + 1].0) / 2.0;
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Stable in-place partition: rows with value <= threshold first. Returns
/// the boundary index.
fn partition_stable(data: &Dataset, rows: &mut [usize], feature: usize, threshold: f64) -> usize {
    let mut left: Vec<usize> = Vec::with_capacity(rows.len());
    let mut right: Vec<usize> = Vec::with_capacity(rows.len());
    for &r in rows.iter() {
        if data.value(r, feature) <= threshold {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    let boundary = left.len();
    rows[..boundary].copy_from_slice(&left);
    rows[boundary..].copy_from_slice(&right);
    boundary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_reference_values() {
        assert_eq!(gini(&[10, 0]), 0.0);
        assert_eq!(gini(&[5, 5]), 0.5);
        assert!((gini(&[3, 1]) - 0.375).abs() < 1e-12);
        assert_eq!(gini(&[0, 0]), 0.0);
    }

    #[test]
    fn separable_data_grows_a_single_split() {
        let values: Vec<f64> = (0..10).map(|i| if i < 5 { -1.0 - i as f64 } else { 1.0 + i as f64 }).collect();
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let data = Dataset {
            values: &values,
            n_cols: 1,
            labels: &labels,
        };
        let mut rows: Vec<usize> = (0..10).collect();
        let params = GrowParams {
            max_depth: None,
            min_samples_leaf: 1,
            mtry: 1,
        };
        let tree = Tree::grow(&data, &mut rows, &params, &mut SplitMix64::new(1));
        assert_eq!(tree.nodes.len(), 3, "one split, two leaves");
        for i in 0..10 {
            assert_eq!(tree.predict(&[values[i]]), labels[i]);
        }
    }

    #[test]
    fn depth_limit_zero_yields_a_stump_leaf() {
        let values = vec![0.0, 1.0, 2.0, 3.0];
        let labels = vec![0, 0, 1, 1];
        let data = Dataset {
            values: &values,
            n_cols: 1,
            labels: &labels,
        };
        let mut rows: Vec<usize> = (0..4).collect();
        let params = GrowParams {
            max_depth: Some(0),
            min_samples_leaf: 1,
            mtry: 1,
        };
        let tree = Tree::grow(&data, &mut rows, &params, &mut SplitMix64::new(1));
        assert_eq!(tree.nodes.len(), 1);
        // tied leaf votes class 1
        assert_eq!(tree.predict(&[0.0]), 1);
    }

    #[test]
    fn constant_feature_cannot_split() {
        let values = vec![2.0; 6];
        let labels = vec![0, 1, 0, 1, 0, 1];
        let data = Dataset {
            values: &values,
            n_cols: 1,
            labels: &labels,
        };
        let mut rows: Vec<usize> = (0..6).collect();
        let params = GrowParams {
            max_depth: None,
            min_samples_leaf: 1,
            mtry: 1,
        };
        let tree = Tree::grow(&data, &mut rows, &params, &mut SplitMix64::new(1));
        assert_eq!(tree.nodes.len(), 1, "no valid split exists");
    }
}
