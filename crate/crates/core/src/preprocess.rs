//! Outlier treatment and distribution normalization for the continuous
//! driving indexes: quantile-based flooring/capping at the 10th/90th
//! percentiles, then a per-column rank transform to [0, 1], with a
//! skewness report around the whole thing.
//!
//! Fitting happens on training rows only; the fitted floor/cap values and
//! the training empirical CDF are then applied to test rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dbi::{FeatureMatrix, DRIVING_COLUMNS};

pub const DEFAULT_FLOOR_P: f64 = 0.10;
pub const DEFAULT_CAP_P: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("empty input")]
    EmptyInput,
    #[error("quantile fraction {0} outside [0, 1]")]
    BadFraction(String),
    #[error("degenerate column: variance is zero")]
    DegenerateColumn,
    #[error("skewness needs at least 3 values, got {0}")]
    TooFewValues(usize),
    #[error("unknown column {0}")]
    UnknownColumn(String),
}

/// Linear-interpolation quantile: h = (n-1)p on the sorted values.
pub fn quantile(values: &[f64], p: f64) -> Result<f64, PreprocessError> {
    if values.is_empty() {
        return Err(PreprocessError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(PreprocessError::BadFraction(format!("{p}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Clamp values below the `lo_p` quantile up to it and above the `hi_p`
/// quantile down to it. Order and length are preserved.
pub fn winsorize(column: &[f64], lo_p: f64, hi_p: f64) -> Vec<f64> {
    if column.is_empty() {
        return Vec::new();
    }
    let floor = quantile(column, lo_p).expect("non-empty");
    let cap = quantile(column, hi_p).expect("non-empty");
    column.iter().map(|&x| x.clamp(floor, cap)).collect()
}

/// Population sample skewness g1 = m3 / m2^{3/2} with central moments
/// divided by n.
pub fn skewness(column: &[f64]) -> Result<f64, PreprocessError> {
    let n = column.len();
    if n < 3 {
        return Err(PreprocessError::TooFewValues(n));
    }
    let nf = n as f64;
    let mean = column.iter().sum::<f64>() / nf;
    let m2 = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = column.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(PreprocessError::DegenerateColumn);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Rank transform with Hazen plotting positions: the value with (tie-
/// averaged) rank r among m values maps to (r - 0.5) / m. Monotone
/// non-decreasing in the input; output lies in (0, 1).
pub fn quantile_normalize(column: &[f64]) -> Vec<f64> {
    let ranks = average_ranks(column);
    let m = column.len() as f64;
    ranks.iter().map(|r| (r - 0.5) / m).collect()
}

/// 1-based ranks with ties averaged.
fn average_ranks(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the averaged 1-based rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Per-column diagnostics emitted by the preprocessing pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    /// Absent for degenerate (constant) columns.
    pub skewness_before: Option<f64>,
    pub skewness_after: Option<f64>,
    pub floor_value: f64,
    pub cap_value: f64,
    pub n_floored: usize,
    pub n_capped: usize,
}

/// Keyed by column name; BTreeMap keeps the JSON deterministic.
pub type PreprocessReport = BTreeMap<String, ColumnReport>;

/// A fitted transform for one column: winsorization bounds plus the
/// training empirical CDF as (value, normalized) grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedColumn {
    pub floor_value: f64,
    pub cap_value: f64,
    grid_values: Vec<f64>,
    grid_normalized: Vec<f64>,
}

impl FittedColumn {
    fn fit(column: &[f64], lo_p: f64, hi_p: f64) -> (FittedColumn, ColumnReport, Vec<f64>) {
        let floor_value = quantile(column, lo_p).expect("non-empty");
        let cap_value = quantile(column, hi_p).expect("non-empty");
        let n_floored = column.iter().filter(|&&x| x < floor_value).count();
        let n_capped = column.iter().filter(|&&x| x > cap_value).count();
        let winsorized: Vec<f64> = column.iter().map(|&x| x.clamp(floor_value, cap_value)).collect();
        let normalized = quantile_normalize(&winsorized);

        // unique (value -> normalized) pairs; ties already share a rank
        let mut pairs: Vec<(f64, f64)> = winsorized.iter().copied().zip(normalized.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let (grid_values, grid_normalized): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

        let report = ColumnReport {
            skewness_before: skewness(column).ok(),
            skewness_after: skewness(&normalized).ok(),
            floor_value,
            cap_value,
            n_floored,
            n_capped,
        };
        (
            FittedColumn {
                floor_value,
                cap_value,
                grid_values,
                grid_normalized,
            },
            report,
            normalized,
        )
    }

    /// Winsorize with the training bounds, then map through the training
    /// empirical CDF with linear interpolation, clamped to [0, 1].
    pub fn apply(&self, x: f64) -> f64 {
        let x = x.clamp(self.floor_value, self.cap_value);
        let g = &self.grid_values;
        let q = &self.grid_normalized;
        if x <= g[0] {
            return q[0];
        }
        if x >= g[g.len() - 1] {
            return q[q.len() - 1];
        }
        let i = match g.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return q[i],
            Err(i) => i,
        };
        let t = (x - g[i - 1]) / (g[i] - g[i - 1]);
        (q[i - 1] + t * (q[i] - q[i - 1])).clamp(0.0, 1.0)
    }
}

/// Fitted transforms for a set of continuous columns of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    /// column index -> fitted transform
    pub columns: BTreeMap<usize, FittedColumn>,
    pub report: PreprocessReport,
}

impl Preprocessor {
    /// Fit on the given rows (training split). `continuous` are column
    /// indexes into the matrix; everything else passes through untouched.
    pub fn fit(matrix: &FeatureMatrix, row_idx: &[usize], continuous: &[usize]) -> Preprocessor {
        let mut columns = BTreeMap::new();
        let mut report = BTreeMap::new();
        for &c in continuous {
            let col: Vec<f64> = row_idx.iter().map(|&r| matrix.rows[r][c]).collect();
            if col.is_empty() {
                continue;
            }
            let (fitted, col_report, _) = FittedColumn::fit(&col, DEFAULT_FLOOR_P, DEFAULT_CAP_P);
            report.insert(matrix.column_names[c].clone(), col_report);
            columns.insert(c, fitted);
        }
        Preprocessor { columns, report }
    }

    /// Apply the fitted transforms to every row of a matrix, leaving
    /// untouched columns (and row order, labels, keys) as they are.
    pub fn transform(&self, matrix: &FeatureMatrix) -> FeatureMatrix {
        let mut out = matrix.clone();
        for row in out.rows.iter_mut() {
            for (&c, fitted) in &self.columns {
                row[c] = fitted.apply(row[c]);
            }
        }
        out
    }
}

/// Default continuous set: the 12 driving-index columns present in the
/// matrix.
pub fn default_continuous_columns(matrix: &FeatureMatrix) -> Vec<usize> {
    DRIVING_COLUMNS
        .iter()
        .filter_map(|name| matrix.column_index(name))
        .collect()
}

/// Fit-and-apply on the same matrix: per continuous column, record
/// skewness, winsorize at the 10th/90th percentiles, rank-normalize, and
/// record skewness again. Categorical/driver columns and labels pass
/// through untouched.
pub fn preprocess_matrix(
    matrix: &FeatureMatrix,
    continuous: &[usize],
) -> (FeatureMatrix, PreprocessReport) {
    let all_rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let mut out = matrix.clone();
    let mut report = BTreeMap::new();
    for &c in continuous {
        let col: Vec<f64> = matrix.column(c);
        let (_, col_report, normalized) = FittedColumn::fit(&col, DEFAULT_FLOOR_P, DEFAULT_CAP_P);
        report.insert(matrix.column_names[c].clone(), col_report);
        for (r, v) in normalized.into_iter().enumerate() {
            out.rows[r][c] = v;
        }
    }
    let _ = all_rows;
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbi::RowKey;
    use crate::rng::SplitMix64;

    #[test]
    fn quantile_reference_values() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert!((quantile(&v, 0.10).unwrap() - 1.9).abs() < 1e-12);
        assert!((quantile(&v, 0.90).unwrap() - 9.1).abs() < 1e-12);
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 10.0);
        assert_eq!(quantile(&[7.0], 0.5).unwrap(), 7.0);
        assert_eq!(quantile(&[], 0.5), Err(PreprocessError::EmptyInput));
    }

    #[test]
    fn winsorize_reference() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let w = winsorize(&v, 0.10, 0.90);
        let expected = [1.9, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 9.1];
        for (a, b) in w.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn winsorize_constant_column_unchanged() {
        let v = vec![3.0; 8];
        assert_eq!(winsorize(&v, 0.10, 0.90), v);
    }

    #[test]
    fn winsorize_bounds_hold_for_any_column() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..50 {
            let v: Vec<f64> = (0..40).map(|_| rng.normal() * 10.0).collect();
            let w = winsorize(&v, 0.10, 0.90);
            let lo = quantile(&v, 0.10).unwrap();
            let hi = quantile(&v, 0.90).unwrap();
            let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((min - lo).abs() < 1e-12 && (max - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn skewness_reference_values() {
        assert!(skewness(&[1.0, 2.0, 3.0]).unwrap().abs() < 1e-12);
        // m2 = 0.1875, m3 = 0.09375 -> g1 = 2/sqrt(3)
        let g = skewness(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((g - 1.1547).abs() < 1e-4, "got {g}");
        assert_eq!(skewness(&[5.0, 5.0, 5.0]), Err(PreprocessError::DegenerateColumn));
        assert_eq!(skewness(&[1.0, 2.0]), Err(PreprocessError::TooFewValues(2)));
    }

    #[test]
    fn skewness_is_antisymmetric() {
        let mut rng = SplitMix64::new(21);
        for _ in 0..100 {
            let v: Vec<f64> = (0..30).map(|_| rng.normal() + rng.unit()).collect();
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let a = skewness(&v).unwrap();
            let b = skewness(&neg).unwrap();
            assert!((a + b).abs() < 1e-9, "skew({a}) vs skew(-x)={b}");
        }
    }

    #[test]
    fn normalize_reference() {
        let out = quantile_normalize(&[5.0, 1.0, 3.0]);
        let expected = [2.5 / 3.0, 0.5 / 3.0, 1.5 / 3.0];
        for (a, b) in out.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(quantile_normalize(&[2.0, 2.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn normalize_preserves_strict_order() {
        let mut rng = SplitMix64::new(3);
        let mut v: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        let out = quantile_normalize(&v);
        for w in out.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn normalize_is_idempotent_on_ranks() {
        let mut rng = SplitMix64::new(8);
        let v: Vec<f64> = (0..100).map(|_| (rng.normal() * 4.0).round()).collect();
        let once = quantile_normalize(&v);
        let twice = quantile_normalize(&once);
        assert_eq!(once, twice, "ranks of ranks are ranks");
    }

    fn toy_matrix(col: Vec<f64>) -> FeatureMatrix {
        let n = col.len();
        FeatureMatrix {
            column_names: vec!["cat".into(), "x".into()],
            rows: col.into_iter().enumerate().map(|(i, x)| vec![(i % 3) as f64, x]).collect(),
            labels: vec![0; n],
            keys: (0..n)
                .map(|i| RowKey {
                    participant_id: format!("p{i}"),
                    period_id: "q".into(),
                    trip_id: format!("t{i}"),
                })
                .collect(),
        }
    }

    fn lognormal_column(rng: &mut SplitMix64, n: usize, sigma: f64) -> Vec<f64> {
        (0..n).map(|_| (rng.normal() * sigma).exp()).collect()
    }

    #[test]
    fn pipeline_tames_lognormal_skewness() {
        let mut rng = SplitMix64::new(404);
        let col = lognormal_column(&mut rng, 7794, 1.5);
        assert!(skewness(&col).unwrap() > 5.0, "raw log-normal column is heavily skewed");
        let m = toy_matrix(col);
        let (out, report) = preprocess_matrix(&m, &[1]);
        let after: Vec<f64> = out.column(1);
        assert!(skewness(&after).unwrap().abs() < 1.0);
        let r = &report["x"];
        assert!(r.skewness_before.unwrap() > 5.0);
        assert!(r.skewness_after.unwrap().abs() < 1.0);
        assert!(r.n_floored > 0 && r.n_capped > 0);
        // categorical column is bit-identical
        assert_eq!(m.column(0), out.column(0));
        // labels and keys never move
        assert_eq!(m.labels, out.labels);
        assert_eq!(m.keys, out.keys);
        // all transformed values in [0, 1]
        assert!(after.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn winsorization_never_increases_skewness_on_heavy_tails() {
        for seed in 0..50u64 {
            let mut r = SplitMix64::new(seed * 7 + 1);
            let lognormal = lognormal_column(&mut r, 400, 1.2);
            let pareto: Vec<f64> = (0..400)
                .map(|_| (1.0 - r.unit()).powf(-1.0 / 2.5)) // Pareto(alpha=2.5)
                .collect();
            for col in [lognormal, pareto] {
                let before = skewness(&col).unwrap().abs();
                let after = skewness(&winsorize(&col, 0.10, 0.90)).unwrap().abs();
                assert!(
                    after <= before + 1e-9,
                    "winsorization increased |skewness|: {before} -> {after}"
                );
            }
        }
    }

    #[test]
    fn constant_column_passes_through_as_half() {
        let m = toy_matrix(vec![4.0; 6]);
        let (out, report) = preprocess_matrix(&m, &[1]);
        assert!(out.column(1).iter().all(|&v| v == 0.5));
        assert_eq!(report["x"].skewness_before, None);
        assert_eq!(report["x"].skewness_after, None);
    }

    #[test]
    fn train_fitted_transform_applies_to_test_rows() {
        let mut rng = SplitMix64::new(99);
        let col: Vec<f64> = (0..200).map(|_| rng.normal() * 10.0).collect();
        let m = toy_matrix(col);
        let train: Vec<usize> = (0..150).collect();
        let pre = Preprocessor::fit(&m, &train, &[1]);
        let out = pre.transform(&m);
        for r in 0..m.n_rows() {
            let v = out.rows[r][1];
            assert!((0.0..=1.0).contains(&v), "row {r} value {v} outside [0,1]");
        }
        // interpolation through the training CDF is monotone
        let fitted = &pre.columns[&1];
        let mut last = -1.0;
        for i in 0..100 {
            let x = -40.0 + i as f64;
            let y = fitted.apply(x);
            assert!(y >= last);
            last = y;
        }
    }
}
