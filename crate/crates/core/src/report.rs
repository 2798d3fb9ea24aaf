//! Statistical report emitters: the time-of-day trip distribution and the
//! per-participant quarterly aggregates of the twelve driving indexes,
//! split by MCI status. Both are plot-ready CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dbi::{DbiRecord, TimeOfDay, TimeWindows};
use crate::extract::TripMeta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeOfDayRow {
    pub window: String,
    pub trips: u64,
    pub share: f64,
}

/// Trip counts and shares over the four wall-clock windows, keyed on each
/// trip's local start minute.
pub fn time_of_day_report(trips: &[TripMeta], windows: &TimeWindows) -> Vec<TimeOfDayRow> {
    let mut counts = [0u64; 4];
    for t in trips {
        let idx = match windows.classify_minute(t.start_local_minute) {
            TimeOfDay::Morning => 0,
            TimeOfDay::Afternoon => 1,
            TimeOfDay::Evening => 2,
            TimeOfDay::Night => 3,
        };
        counts[idx] += 1;
    }
    let total = counts.iter().sum::<u64>().max(1) as f64;
    ["morning", "afternoon", "evening", "night"]
        .iter()
        .zip(counts)
        .map(|(name, trips)| TimeOfDayRow {
            window: name.to_string(),
            trips,
            share: trips as f64 / total,
        })
        .collect()
}

pub fn time_of_day_csv(rows: &[TimeOfDayRow]) -> String {
    let mut out = String::from("window,trips,share\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.4}", r.window, r.trips, r.share);
    }
    out
}

/// One participant-quarter aggregate: the mean of each driving index over
/// that participant's trips in the quarter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterlyRow {
    pub participant_id: String,
    pub quarter: String,
    pub mci: u8,
    pub trips: u64,
    /// Means of the 12 driving columns, in matrix order.
    pub means: [f64; 12],
}

pub fn quarterly_report(records: &[DbiRecord]) -> Vec<QuarterlyRow> {
    let mut groups: BTreeMap<(String, String), Vec<&DbiRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.participant_id.clone(), r.period_id.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((participant_id, quarter), rows)| {
            let n = rows.len() as f64;
            let mut means = [0.0f64; 12];
            for r in &rows {
                let features = r.feature_row();
                for (m, v) in means.iter_mut().zip(&features[7..19]) {
                    *m += v / n;
                }
            }
            QuarterlyRow {
                participant_id,
                quarter,
                mci: rows[0].mci,
                trips: rows.len() as u64,
                means,
            }
        })
        .collect()
}

pub fn quarterly_csv(rows: &[QuarterlyRow]) -> String {
    let mut out = String::from("participant_id,quarter,mci,trips");
    for name in crate::dbi::DRIVING_COLUMNS {
        let _ = write!(out, ",mean_{name}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{}", r.participant_id, r.quarter, r.mci, r.trips);
        for m in r.means {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn meta(minute: u32) -> TripMeta {
        TripMeta {
            trip_id: "p-t0001".into(),
            participant_id: "p".into(),
            start_utc: Utc.timestamp_millis_opt(0).unwrap(),
            start_local_minute: minute,
            quarter: "2024Q1".into(),
            duration_s: 100.0,
            distance_km: Some(1.0),
            mean_speed_kmh: Some(30.0),
            mean_rpm: Some(1000.0),
            n_samples: 100,
            n_harsh_accel: 0,
            n_hard_brake: 0,
            n_hard_turn: 0,
        }
    }

    #[test]
    fn all_morning_trips_give_full_morning_share() {
        let trips: Vec<TripMeta> = (0..10).map(|_| meta(8 * 60)).collect();
        let rows = time_of_day_report(&trips, &TimeWindows::default());
        assert_eq!(rows[0].window, "morning");
        assert_eq!(rows[0].share, 1.0);
        assert_eq!(rows[1].trips + rows[2].trips + rows[3].trips, 0);
    }

    #[test]
    fn shares_sum_to_one() {
        let trips: Vec<TripMeta> = [300u32, 750, 1100, 1300, 90]
            .iter()
            .map(|&m| meta(m))
            .collect();
        let rows = time_of_day_report(&trips, &TimeWindows::default());
        let total: f64 = rows.iter().map(|r| r.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(rows.iter().map(|r| r.trips).sum::<u64>(), 5);
    }

    #[test]
    fn quarterly_rows_count_participant_quarters() {
        use crate::synth::{generate_truth, ledger_records, CohortSpec};
        let spec = CohortSpec {
            n_participants: 4,
            trips_per_participant: 20,
            weeks: 16, // spans Q1 and Q2 from the default start date
            seed: 31,
            ..Default::default()
        };
        let records = ledger_records(&generate_truth(&spec).unwrap().ledger);
        let rows = quarterly_report(&records);
        let mut expected: std::collections::BTreeSet<(String, String)> = Default::default();
        for r in &records {
            expected.insert((r.participant_id.clone(), r.period_id.clone()));
        }
        assert_eq!(rows.len(), expected.len(), "one row per participant-quarter");
        let total: u64 = rows.iter().map(|r| r.trips).sum();
        assert_eq!(total as usize, records.len());
        // mean duration per group is the plain average
        let first = &rows[0];
        let group: Vec<&DbiRecord> = records
            .iter()
            .filter(|r| r.participant_id == first.participant_id && r.period_id == first.quarter)
            .collect();
        let mean_dur: f64 = group.iter().map(|r| r.duration_s).sum::<f64>() / group.len() as f64;
        assert!((first.means[3] - mean_dur).abs() < 1e-9);
    }
}
