//! Random forest classifier: bagging over Gini decision trees with a
//! mode vote, plus the evaluation metrics and the six model-input groups
//! used to compare feature blocks.

mod metrics;
mod suite;
mod tree;

pub use metrics::{auc_from_scores, evaluate, metrics_from_confusion, ConfusionMetrics, EvaluationReport};
pub use suite::{
    model_label, render_table, run_model_suite, run_model_suite_with_models, select_model_inputs,
    split_grouped, split_train_test, GroupResult, SplitIndices, SuiteConfig, SuiteReport,
};
pub use tree::{gini, Dataset, Node, Tree};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use tree::GrowParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// None = grow to purity.
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    /// Features sampled per split; None = floor(sqrt(n_features)).
    pub mtry: Option<usize>,
    pub seed: u64,
    /// Class receiving tied votes. Default 1 (MCI): the screening-
    /// conservative choice.
    pub vote_tie: u8,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            mtry: None,
            seed: 0,
            vote_tie: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("degenerate labels: training data contains a single class")]
    DegenerateLabels,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("model group {0} outside 1..=6")]
    UnknownGroup(u8),
    #[error("class {class} has {rows} rows; at least 2 required to split")]
    InsufficientClass { class: u8, rows: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A trained ensemble. Immutable after training; safe to share across
/// threads for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

/// Train on row-major features. Tree `i` bootstraps its rows and samples
/// its split features from a SplitMix64 seeded with `config.seed + i`, so
/// training is deterministic for any degree of parallelism.
pub fn train_forest(
    rows: &[Vec<f64>],
    labels: &[u8],
    feature_names: &[String],
    config: &ForestConfig,
) -> Result<ForestModel, ForestError> {
    let n = rows.len();
    if n == 0 {
        return Err(ForestError::EmptyTrainingSet);
    }
    if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
        return Err(ForestError::DegenerateLabels);
    }
    let n_features = feature_names.len();
    if config.n_trees == 0 {
        return Err(ForestError::InvalidConfig("n_trees must be >= 1".into()));
    }
    let mtry = config.mtry.unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize).max(1);
    if mtry > n_features {
        return Err(ForestError::InvalidConfig(format!(
            "mtry {mtry} exceeds {n_features} features"
        )));
    }

    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    let data = Dataset {
        values: &flat,
        n_cols: n_features,
        labels,
    };
    let params = GrowParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf.max(1),
        mtry,
    };

    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(config.seed.wrapping_add(i as u64));
            let mut bootstrap: Vec<usize> =
                (0..n).map(|_| rng.below(n as u64) as usize).collect();
            Tree::grow(&data, &mut bootstrap, &params, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        config: config.clone(),
        feature_names: feature_names.to_vec(),
        trees,
    })
}

impl ForestModel {
    /// Fraction of trees voting the positive class.
    pub fn predict_score(&self, x: &[f64]) -> f64 {
        let votes: usize = self.trees.iter().map(|t| t.predict(x) as usize).sum();
        votes as f64 / self.trees.len() as f64
    }

    /// Mode of the tree votes; exact ties go to `config.vote_tie`.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let ones: usize = self.trees.iter().map(|t| t.predict(x) as usize).sum();
        let zeros = self.trees.len() - ones;
        match ones.cmp(&zeros) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.config.vote_tie,
        }
    }

    /// Mean decrease in Gini impurity per feature, over all split nodes of
    /// all trees, weighted by the fraction of the tree's bootstrap rows
    /// reaching the node, normalized to sum to 1.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.feature_names.len()];
        for tree in &self.trees {
            let root_total = match &tree.nodes[0] {
                Node::Split { counts, .. } | Node::Leaf { counts } => (counts[0] + counts[1]) as f64,
            };
            for node in &tree.nodes {
                if let Node::Split {
                    feature,
                    counts,
                    left,
                    right,
                    ..
                } = node
                {
                    let node_n = (counts[0] + counts[1]) as f64;
                    let child = |idx: usize| -> ([u32; 2], f64) {
                        match &tree.nodes[idx] {
                            Node::Split { counts, .. } | Node::Leaf { counts } => {
                                (*counts, (counts[0] + counts[1]) as f64)
                            }
                        }
                    };
                    let (lc, ln) = child(*left);
                    let (rc, rn) = child(*right);
                    let decrease = gini(counts) - (ln * gini(&lc) + rn * gini(&rc)) / node_n;
                    acc[*feature] += (node_n / root_total) * decrease;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            for a in acc.iter_mut() {
                *a /= total;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn separable_data_reaches_perfect_training_accuracy() {
        let mut rng = SplitMix64::new(3);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![if i < 50 { -1.0 - rng.unit() } else { 1.0 + rng.unit() }])
            .collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i >= 50)).collect();
        let model = train_forest(&rows, &labels, &names(1), &ForestConfig::default()).unwrap();
        let correct = rows
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| model.predict(x) == y)
            .count();
        assert_eq!(correct, 100);
    }

    #[test]
    fn single_class_training_is_rejected() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert_eq!(
            train_forest(&rows, &[0, 0], &names(1), &ForestConfig::default()),
            Err(ForestError::DegenerateLabels)
        );
    }

    #[test]
    fn same_seed_bit_identical_serialization() {
        let mut rng = SplitMix64::new(10);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
        let labels: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        let cfg = ForestConfig {
            n_trees: 20,
            seed: 99,
            ..Default::default()
        };
        let a = train_forest(&rows, &labels, &names(4), &cfg).unwrap();
        let b = train_forest(&rows, &labels, &names(4), &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn training_is_thread_count_independent() {
        let mut rng = SplitMix64::new(10);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
        let labels: Vec<u8> = (0..80).map(|i| (i % 2) as u8).collect();
        let cfg = ForestConfig {
            n_trees: 16,
            seed: 5,
            ..Default::default()
        };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let multi = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| train_forest(&rows, &labels, &names(5), &cfg).unwrap());
        let b = multi.install(|| train_forest(&rows, &labels, &names(5), &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn prediction_consistent_with_score() {
        let mut rng = SplitMix64::new(4);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let labels: Vec<u8> = (0..50).map(|_| (rng.below(2)) as u8).collect();
        let model = train_forest(
            &rows,
            &labels,
            &names(2),
            &ForestConfig {
                n_trees: 30,
                seed: 8,
                ..Default::default()
            },
        )
        .unwrap();
        for x in rows.iter().take(20) {
            let score = model.predict_score(x);
            assert_eq!(model.predict(x) == 1, score >= 0.5, "tie rule: predict=1 iff score >= 0.5");
        }
    }

    #[test]
    fn permutation_null_accuracy_is_chance() {
        // random labels, random features: held-out accuracy over 20 seeds
        // must be 0.50 +/- 0.05
        let mut total = 0.0;
        for seed in 0..20u64 {
            let mut rng = SplitMix64::new(1000 + seed);
            let n = 2000;
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
            let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
            rng.shuffle(&mut labels);
            let cut = (n * 2) / 3;
            let model = train_forest(
                &rows[..cut],
                &labels[..cut],
                &names(5),
                &ForestConfig {
                    n_trees: 30,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let correct = rows[cut..]
                .iter()
                .zip(&labels[cut..])
                .filter(|(x, &y)| model.predict(x) == y)
                .count();
            total += correct as f64 / (n - cut) as f64;
        }
        let mean = total / 20.0;
        assert!(
            (mean - 0.50).abs() <= 0.05,
            "permutation-null accuracy {mean} outside 0.50 +/- 0.05"
        );
    }

    #[test]
    fn single_feature_model_has_importance_one() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let model = train_forest(&rows, &labels, &names(1), &ForestConfig::default()).unwrap();
        let imp = model.feature_importance();
        assert!((imp[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_column_ranks_first_in_importance() {
        for seed in 0..20u64 {
            let mut rng = SplitMix64::new(7000 + seed);
            let n = 400;
            let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let rows: Vec<Vec<f64>> = labels
                .iter()
                .map(|&y| {
                    let mut row: Vec<f64> = (0..19).map(|_| rng.normal()).collect();
                    row[7] = y as f64 + 0.1 * rng.normal(); // planted signal
                    row
                })
                .collect();
            let model = train_forest(
                &rows,
                &labels,
                &names(19),
                &ForestConfig {
                    n_trees: 30,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let imp = model.feature_importance();
            let top = imp
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(top, 7, "seed {seed}: planted column not first: {imp:?}");
        }
    }

    #[test]
    fn importances_are_normalized() {
        let mut rng = SplitMix64::new(2);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..6).map(|_| rng.normal()).collect()).collect();
        let labels: Vec<u8> = (0..100).map(|_| rng.below(2) as u8).collect();
        let model = train_forest(&rows, &labels, &names(6), &ForestConfig::default()).unwrap();
        let imp = model.feature_importance();
        assert!(imp.iter().all(|&w| w >= 0.0));
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_transform_preserves_training_predictions_on_monotone_problem() {
        // splits are order statistics: a strictly monotone transform of a
        // 1-feature problem yields the same decision regions
        let mut rng = SplitMix64::new(12);
        let raw: Vec<f64> = (0..80).map(|_| rng.normal() * 3.0).collect();
        let labels: Vec<u8> = raw.iter().map(|&x| u8::from(x + 0.3 * rng.normal() > 0.0)).collect();
        let rows_raw: Vec<Vec<f64>> = raw.iter().map(|&x| vec![x]).collect();
        let transformed = crate::preprocess::quantile_normalize(&raw);
        let rows_tr: Vec<Vec<f64>> = transformed.iter().map(|&x| vec![x]).collect();
        let cfg = ForestConfig {
            n_trees: 25,
            seed: 3,
            ..Default::default()
        };
        let m_raw = train_forest(&rows_raw, &labels, &names(1), &cfg).unwrap();
        let m_tr = train_forest(&rows_tr, &labels, &names(1), &cfg).unwrap();
        for i in 0..raw.len() {
            assert_eq!(
                m_raw.predict(&rows_raw[i]),
                m_tr.predict(&rows_tr[i]),
                "prediction diverged on training row {i}"
            );
        }
    }
}
