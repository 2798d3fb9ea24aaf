//! Classification metrics: confusion matrix (rows = observed class,
//! columns = predicted class), accuracy, per-class precision/recall/F1,
//! and AUC as the tie-averaged Mann-Whitney statistic of the vote
//! fraction, which equals the trapezoidal ROC area.

use serde::{Deserialize, Serialize};

use super::{ForestError, ForestModel};

/// Metrics derived purely from a 2x2 confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
}

/// `confusion[observed][predicted]`.
pub fn metrics_from_confusion(confusion: &[[usize; 2]; 2]) -> ConfusionMetrics {
    let total: usize = confusion.iter().flatten().sum();
    let accuracy = if total == 0 {
        0.0
    } else {
        (confusion[0][0] + confusion[1][1]) as f64 / total as f64
    };
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut precision = [0.0; 2];
    let mut recall = [0.0; 2];
    let mut f1 = [0.0; 2];
    for k in 0..2 {
        let col_sum = confusion[0][k] + confusion[1][k];
        let row_sum = confusion[k][0] + confusion[k][1];
        precision[k] = ratio(confusion[k][k], col_sum);
        recall[k] = ratio(confusion[k][k], row_sum);
        f1[k] = if precision[k] + recall[k] == 0.0 {
            0.0
        } else {
            2.0 * precision[k] * recall[k] / (precision[k] + recall[k])
        };
    }
    ConfusionMetrics {
        accuracy,
        precision,
        recall,
        f1,
    }
}

/// Mann-Whitney AUC with average ranks for tied scores. Equivalent to the
/// probability that a random positive outscores a random negative, ties
/// counted half.
pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Result<f64, ForestError> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ForestError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // 1-based ranks with ties averaged
    let mut rank_sum_pos = 0.0f64;
    let n = scores.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// The full metric bundle for one trained model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub auc: f64,
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
    /// `confusion[observed][predicted]`; entries sum to the test-set size.
    pub confusion: [[usize; 2]; 2],
    /// (feature name, weight) pairs in model column order; weights are
    /// non-negative and sum to 1.
    pub importances: Vec<(String, f64)>,
}

pub fn evaluate(
    model: &ForestModel,
    rows: &[Vec<f64>],
    labels: &[u8],
) -> Result<EvaluationReport, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::EmptyTestSet);
    }
    let mut confusion = [[0usize; 2]; 2];
    let mut scores = Vec::with_capacity(rows.len());
    for (x, &y) in rows.iter().zip(labels) {
        confusion[y as usize][model.predict(x) as usize] += 1;
        scores.push(model.predict_score(x));
    }
    let m = metrics_from_confusion(&confusion);
    let auc = auc_from_scores(&scores, labels)?;
    let importances = model
        .feature_names
        .iter()
        .cloned()
        .zip(model.feature_importance())
        .collect();
    Ok(EvaluationReport {
        accuracy: m.accuracy,
        auc,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        confusion,
        importances,
    })
}
