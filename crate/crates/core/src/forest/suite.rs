//! The six model-input groups, train/test splitting, and the consolidated
//! comparison run that produces one result row per group.

use serde::{Deserialize, Serialize};

use super::{evaluate, train_forest, EvaluationReport, ForestConfig, ForestError};
use crate::dbi::{FeatureMatrix, DRIVER_COLUMNS, DRIVING_COLUMNS};
use crate::preprocess::{default_continuous_columns, Preprocessor};
use crate::rng::SplitMix64;

/// Feature columns for model group 1..=6.
pub fn select_model_inputs(group: u8) -> Result<Vec<&'static str>, ForestError> {
    match group {
        1 => Ok(vec!["age"]),
        2 => Ok(vec!["total_trips", "peak_trips", "night_trips"]),
        3 => Ok(DRIVER_COLUMNS.to_vec()),
        4 => Ok(DRIVING_COLUMNS.to_vec()),
        5 => {
            let mut cols = vec!["age"];
            cols.extend(DRIVING_COLUMNS);
            Ok(cols)
        }
        6 => {
            let mut cols = DRIVER_COLUMNS.to_vec();
            cols.extend(DRIVING_COLUMNS);
            Ok(cols)
        }
        other => Err(ForestError::UnknownGroup(other)),
    }
}

pub fn model_label(group: u8) -> &'static str {
    match group {
        1 => "Only age",
        2 => "Number of trips (total, peak, night)",
        3 => "Driver variables",
        4 => "Driving variables",
        5 => "Age with driving variables",
        6 => "All the variables",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified row-level holdout: each class's rows are shuffled and split
/// independently at `test_fraction`. Deterministic under `seed`.
pub fn split_train_test(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, ForestError> {
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            return Err(ForestError::InsufficientClass {
                class,
                rows: idx.len(),
            });
        }
        rng.shuffle(&mut idx);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Participant-grouped holdout: whole participants are assigned to train
/// or test, stratified by the participant's label, so no identity leaks
/// across the split. Used by the planted-signal checks.
pub fn split_grouped(
    labels: &[u8],
    groups: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, ForestError> {
    let mut order: Vec<String> = Vec::new();
    let mut label_of: std::collections::HashMap<&str, u8> = std::collections::HashMap::new();
    for (g, &y) in groups.iter().zip(labels) {
        if !label_of.contains_key(g.as_str()) {
            order.push(g.clone());
            label_of.insert(g.as_str(), y);
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut test_groups: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<&str> = order
            .iter()
            .map(|s| s.as_str())
            .filter(|g| label_of[g] == class)
            .collect();
        if idx.len() < 2 {
            return Err(ForestError::InsufficientClass {
                class,
                rows: idx.len(),
            });
        }
        rng.shuffle(&mut idx);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test_groups.extend(&idx[..n_test]);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        if test_groups.contains(g.as_str()) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok(SplitIndices { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub forest: ForestConfig,
    pub test_fraction: f64,
    /// Split whole participants instead of rows.
    pub grouped_split: bool,
    /// Restrict the run to one group (1..=6); None runs all six.
    pub only_group: Option<u8>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            forest: ForestConfig::default(),
            test_fraction: 0.33,
            grouped_split: false,
            only_group: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: u8,
    pub label: String,
    pub features: Vec<String>,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub groups: Vec<GroupResult>,
}

/// Run the comparison: split once, fit preprocessing on the training rows
/// of the continuous columns, then train and evaluate one forest per
/// requested group on its column subset.
pub fn run_model_suite(matrix: &FeatureMatrix, cfg: &SuiteConfig) -> Result<SuiteReport, ForestError> {
    run_model_suite_with_models(matrix, cfg).map(|(report, _)| report)
}

/// Like [`run_model_suite`], additionally returning the trained model per
/// group so callers can serialize them.
pub fn run_model_suite_with_models(
    matrix: &FeatureMatrix,
    cfg: &SuiteConfig,
) -> Result<(SuiteReport, Vec<super::ForestModel>), ForestError> {
    let split = if cfg.grouped_split {
        let groups: Vec<String> = matrix.keys.iter().map(|k| k.participant_id.clone()).collect();
        split_grouped(&matrix.labels, &groups, cfg.test_fraction, cfg.forest.seed)?
    } else {
        split_train_test(&matrix.labels, cfg.test_fraction, cfg.forest.seed)?
    };

    let continuous = default_continuous_columns(matrix);
    let pre = Preprocessor::fit(matrix, &split.train, &continuous);
    let transformed = pre.transform(matrix);

    let groups: Vec<u8> = match cfg.only_group {
        Some(g) => {
            select_model_inputs(g)?;
            vec![g]
        }
        None => (1..=6).collect(),
    };

    let mut results = Vec::new();
    let mut models = Vec::new();
    for group in groups {
        let columns = select_model_inputs(group)?;
        let sub = transformed.select_columns(&columns);
        let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) {
            (
                idx.iter().map(|&i| sub.rows[i].clone()).collect(),
                idx.iter().map(|&i| sub.labels[i]).collect(),
            )
        };
        let (x_train, y_train) = take(&split.train);
        let (x_test, y_test) = take(&split.test);
        let model = train_forest(&x_train, &y_train, &sub.column_names, &cfg.forest)?;
        let report = evaluate(&model, &x_test, &y_test)?;
        results.push(GroupResult {
            group,
            label: model_label(group).to_string(),
            features: sub.column_names.clone(),
            report,
        });
        models.push(model);
    }
    Ok((
        SuiteReport {
            config: cfg.clone(),
            n_rows: matrix.n_rows(),
            n_train: split.train.len(),
            n_test: split.test.len(),
            groups: results,
        },
        models,
    ))
}

/// Aligned plain-text table, two lines per model (one per observed class).
pub fn render_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<5} {:<38} {:>8} {:>6} {:>9} {:>7} {:>7}   {:<18}\n",
        "Model", "Input", "Accuracy", "AUC", "Precision", "Recall", "F1", "Confusion (obs 0/1)"
    ));
    out.push_str(&"-".repeat(106));
    out.push('\n');
    for g in &report.groups {
        let r = &g.report;
        out.push_str(&format!(
            "{:<5} {:<38} {:>8.2} {:>6.2} {:>9.2} {:>7.2} {:>7.2}   [{:>5} {:>5}]\n",
            g.group,
            g.label,
            r.accuracy,
            r.auc,
            r.precision[0],
            r.recall[0],
            r.f1[0],
            r.confusion[0][0],
            r.confusion[0][1],
        ));
        out.push_str(&format!(
            "{:<5} {:<38} {:>8} {:>6} {:>9.2} {:>7.2} {:>7.2}   [{:>5} {:>5}]\n",
            "",
            "",
            "",
            "",
            r.precision[1],
            r.recall[1],
            r.f1[1],
            r.confusion[1][0],
            r.confusion[1][1],
        ));
    }
    out
}
